#include "clapping/harness/objective.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "clapping/error.hpp"
#include "clapping/harness/dataset.hpp"
#include "clapping/math/worker_op.hpp"

namespace clapping::harness {

FullObjective::FullObjective(const math::ModelChain& chain, const math::Batch& rows) : flat_(chain), rows_(&rows) {
  flat_.boundaries.clear();
  flat_.validate();
  if (rows.cols() != flat_.input_dim()) throw ContractViolation("objective: row length != model input");
  if (rows.rows() == 0) throw ContractViolation("objective: no rows");
}

FullEval FullObjective::evaluate(const math::ParamSet& params, bool with_gradient) const {
  FullEval out;
  if (!with_gradient) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_->rows(); ++r) s += math::chain_loss(flat_, rows_->row(r), params);
    out.loss = s / static_cast<double>(rows_->rows());
    return out;
  }
  math::ParamSet g = math::zero_params(flat_);
  const math::WorkerOperator op(flat_, 0);
  auto tape = op.make_tape();
  const math::Vector one{1.0};
  const double scale = 1.0 / static_cast<double>(rows_->rows());
  double s = 0.0;
  for (std::size_t r = 0; r < rows_->rows(); ++r) {
    s += op.forward(rows_->row(r), params, tape)[0];
    op.backward(tape, params, one, {}, g, scale);
  }
  out.loss = s * scale;
  double sq = 0.0;
  for (const auto& gi : g) sq += math::squared_norm(gi);
  out.grad_norm = std::sqrt(sq);
  return out;
}

math::ParamSet FullObjective::gradient(const math::ParamSet& params) const {
  math::ParamSet g = math::zero_params(flat_);
  const math::WorkerOperator op(flat_, 0);
  auto tape = op.make_tape();
  const math::Vector one{1.0};
  const double scale = 1.0 / static_cast<double>(rows_->rows());
  for (std::size_t r = 0; r < rows_->rows(); ++r) {
    op.forward(rows_->row(r), params, tape);
    op.backward(tape, params, one, {}, g, scale);
  }
  return g;
}

std::optional<std::filesystem::path> default_cache_dir() {
  if (const char* d = std::getenv("CLAPPING_SIM_CACHE_DIR"); d && *d) return std::filesystem::path(d);
  if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return std::filesystem::path(x) / "clapping-sim";
  if (const char* h = std::getenv("HOME"); h && *h) return std::filesystem::path(h) / ".cache" / "clapping-sim";
  return std::nullopt;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::optional<FStarResult> read_cache(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  std::string f, g;
  std::uint64_t iters = 0;
  if (!(in >> f >> g >> iters)) return std::nullopt;
  FStarResult r;
  r.f_star = std::strtod(f.c_str(), nullptr);
  r.grad_norm = std::strtod(g.c_str(), nullptr);
  r.iterations = iters;
  r.from_cache = true;
  return r;
}

void write_cache(const std::filesystem::path& file, const FStarResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  if (ec) return;  // caching is best effort
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%a %a %" PRIu64 "\n", r.f_star, r.grad_norm, r.iterations);
    out << buf;
  }
  std::filesystem::rename(tmp, file, ec);
}

}  // namespace

FStarResult compute_f_star(const math::Batch& rows, double reg, const FStarOptions& opts) {
  if (!(reg > 0.0)) throw ConfigError("f* needs a strongly convex objective (C_r > 0)", "dataset.reg");
  if (rows.rows() == 0) throw ContractViolation("f*: no rows");

  std::optional<std::filesystem::path> file;
  if (opts.use_cache) {
    const auto dir = opts.cache_dir ? opts.cache_dir : default_cache_dir();
    if (dir) {
      char name[64];
      std::snprintf(name, sizeof name, "fstar-%016" PRIx64 ".txt", dataset_hash(rows, reg));
      file = *dir / name;
      if (auto hit = read_cache(*file)) return *hit;
    }
  }

  const auto n = static_cast<Eigen::Index>(rows.rows());
  const auto d = static_cast<Eigen::Index>(rows.cols());
  Eigen::Map<const RowMatrix> X(rows.data().data(), n, d);
  const Eigen::MatrixXd gram = X.transpose() * X;
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double L = lmax / (4.0 * static_cast<double>(n)) + 2.0 * reg;
  const double step = 1.0 / L;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z(n), s(n), g(d);
  auto eval = [&](double& loss) {
    z.noalias() = X * w;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += math::softplus(z(i));
      s(i) = math::sigmoid(z(i));
    }
    g.noalias() = X.transpose() * s;
    g /= static_cast<double>(n);
    g += 2.0 * reg * w;
    loss = acc / static_cast<double>(n) + reg * w.squaredNorm();
  };

  FStarResult r;
  double loss = 0.0;
  eval(loss);
  while (g.norm() > opts.grad_tol && r.iterations < opts.max_iters) {
    w -= step * g;
    eval(loss);
    ++r.iterations;
  }
  r.f_star = loss;
  r.grad_norm = g.norm();
  if (r.grad_norm > opts.grad_tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "f*: gradient descent stopped after %" PRIu64 " iterations with |grad| = %.3e",
                  r.iterations, r.grad_norm);
    throw ConvergenceError(buf);
  }
  if (file) write_cache(*file, r);
  return r;
}

}  // namespace clapping::harness
