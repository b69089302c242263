#include "clapping/engine/data.hpp"

#include <algorithm>

#include "clapping/error.hpp"

namespace clapping::engine {

InMemoryDataset::InMemoryDataset(math::Batch rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0) throw ConfigError("dataset is empty", "dataset.n");
  if (rows_.cols() == 0) throw ConfigError("dataset has zero dimension", "dataset.dim");
}

void InMemoryDataset::load(std::uint64_t id, math::MutView out) const {
  if (id >= rows_.rows()) throw ContractViolation("dataset: sample id out of range");
  if (out.size() != rows_.cols()) throw ContractViolation("dataset: output length mismatch");
  const auto r = rows_.row(static_cast<std::size_t>(id));
  std::copy(r.begin(), r.end(), out.begin());
}

StreamSource::StreamSource(std::size_t dim, Generator gen) : dim_(dim), gen_(std::move(gen)) {
  if (dim_ == 0) throw ConfigError("stream has zero dimension", "dataset.dim");
  if (!gen_) throw ConfigError("stream needs a generator");
}

void StreamSource::load(std::uint64_t id, math::MutView out) const {
  if (out.size() != dim_) throw ContractViolation("stream: output length mismatch");
  gen_(id, out);
}

}  // namespace clapping::engine
