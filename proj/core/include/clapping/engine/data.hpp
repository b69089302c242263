#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include "clapping/math/vector.hpp"

namespace clapping::engine {

/// Where input vectors y_0 = x come from. Samples are addressed by id.
class DataSource {
 public:
  virtual ~DataSource() = default;
  /// Number of samples, or nullopt for an unbounded stream.
  virtual std::optional<std::size_t> size() const = 0;
  virtual std::size_t dim() const = 0;
  virtual void load(std::uint64_t id, math::MutView out) const = 0;
};

/// A finite dataset held row-major in memory.
class InMemoryDataset final : public DataSource {
 public:
  explicit InMemoryDataset(math::Batch rows);

  std::optional<std::size_t> size() const override { return rows_.rows(); }
  std::size_t dim() const override { return rows_.cols(); }
  void load(std::uint64_t id, math::MutView out) const override;

  const math::Batch& rows() const noexcept { return rows_; }

 private:
  math::Batch rows_;
};

/// An unbounded stream: sample `id` is produced by a deterministic generator,
/// and every fresh draw takes the next id.
class StreamSource final : public DataSource {
 public:
  using Generator = std::function<void(std::uint64_t id, math::MutView out)>;
  StreamSource(std::size_t dim, Generator gen);

  std::optional<std::size_t> size() const override { return std::nullopt; }
  std::size_t dim() const override { return dim_; }
  void load(std::uint64_t id, math::MutView out) const override;

 private:
  std::size_t dim_;
  Generator gen_;
};

}  // namespace clapping::engine
