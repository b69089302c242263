#include "clapping/engine/schedule.hpp"

#include <algorithm>

#include "clapping/error.hpp"

namespace clapping::engine {

Schedule::Schedule(double constant) : pieces_{{1, constant}} {}

Schedule::Schedule(std::vector<std::pair<std::uint64_t, double>> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty() || pieces_.front().first != 1)
    throw ConfigError("schedule must start at step 1");
  for (std::size_t i = 1; i < pieces_.size(); ++i)
    if (pieces_[i].first <= pieces_[i - 1].first)
      throw ConfigError("schedule steps must be strictly increasing");
}

Schedule Schedule::geometric(double value, std::uint64_t every, double factor, std::uint64_t horizon) {
  if (every == 0) throw ConfigError("schedule period must be positive");
  std::vector<std::pair<std::uint64_t, double>> p;
  for (std::uint64_t start = 1; start <= std::max<std::uint64_t>(horizon, 1); start += every) {
    p.emplace_back(start, value);
    value *= factor;
  }
  return Schedule(std::move(p));
}

double Schedule::at(std::uint64_t t) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                             [](std::uint64_t s, const auto& piece) { return s < piece.first; });
  return it == pieces_.begin() ? pieces_.front().second : std::prev(it)->second;
}

std::vector<std::uint64_t> Schedule::change_points() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 1; i < pieces_.size(); ++i)
    if (pieces_[i].second != pieces_[i - 1].second) out.push_back(pieces_[i].first);
  return out;
}

double Schedule::min_value() const {
  double m = pieces_.front().second;
  for (const auto& p : pieces_) m = std::min(m, p.second);
  return m;
}

double Schedule::max_value() const {
  double m = pieces_.front().second;
  for (const auto& p : pieces_) m = std::max(m, p.second);
  return m;
}

}  // namespace clapping::engine
