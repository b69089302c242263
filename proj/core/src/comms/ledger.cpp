#include "clapping/comms/ledger.hpp"

#include <cmath>

#include "clapping/error.hpp"

namespace clapping::comms {

double transfer_seconds(std::uint64_t bytes, double bandwidth_bps) {
  if (!(bandwidth_bps > 0.0)) throw ConfigError("bandwidth must be positive", "bandwidth_bps");
  return static_cast<double>(bytes) * 8.0 / bandwidth_bps;
}

TransferLedger::TransferLedger(std::size_t num_boundaries, double bandwidth_bps, double latency_seconds)
    : links_(2 * num_boundaries), bandwidth_(bandwidth_bps), latency_(latency_seconds) {
  if (!(bandwidth_bps > 0.0) || !std::isfinite(bandwidth_bps))
    throw ConfigError("bandwidth must be positive and finite", "bandwidth_bps");
  if (!(latency_seconds >= 0.0)) throw ConfigError("latency must be >= 0", "latency_seconds");
}

void TransferLedger::record(std::size_t boundary, Direction dir, std::uint64_t payload_bytes,
                            std::uint64_t value_bytes, std::uint64_t messages) {
  if (boundary >= num_boundaries()) throw ContractViolation("ledger: boundary out of range");
  auto& c = links_[2 * boundary + static_cast<std::size_t>(dir)];
  c.payload_bytes += payload_bytes;
  c.value_bytes += value_bytes;
  c.header_bytes += messages * kHeaderBytes;
  c.messages += messages;
  simulate_time(payload_bytes);
  seconds_ += latency_ * static_cast<double>(messages);
}

void TransferLedger::simulate_time(std::uint64_t bytes) { seconds_ += transfer_seconds(bytes, bandwidth_); }

const LinkCounters& TransferLedger::counters(std::size_t boundary, Direction dir) const {
  if (boundary >= num_boundaries()) throw ContractViolation("ledger: boundary out of range");
  return links_[2 * boundary + static_cast<std::size_t>(dir)];
}

std::uint64_t TransferLedger::total_payload_bytes(Direction dir) const {
  std::uint64_t s = 0;
  for (std::size_t b = 0; b < num_boundaries(); ++b) s += counters(b, dir).payload_bytes;
  return s;
}

std::uint64_t TransferLedger::total_payload_bytes() const {
  return total_payload_bytes(Direction::Forward) + total_payload_bytes(Direction::Backward);
}

std::uint64_t TransferLedger::total_value_bytes() const {
  std::uint64_t s = 0;
  for (const auto& c : links_) s += c.value_bytes;
  return s;
}

std::uint64_t TransferLedger::total_messages() const {
  std::uint64_t s = 0;
  for (const auto& c : links_) s += c.messages;
  return s;
}

}  // namespace clapping::comms
