#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clapping/comms/wire.hpp"

namespace clapping::comms {

struct LinkCounters {
  std::uint64_t payload_bytes = 0;  // message bodies
  std::uint64_t value_bytes = 0;    // bodies minus index bytes
  std::uint64_t header_bytes = 0;
  std::uint64_t messages = 0;
};

/// Seconds to push `bytes` through a link of `bandwidth_bps` bits per second.
double transfer_seconds(std::uint64_t bytes, double bandwidth_bps);

/// Byte counters per (boundary, direction) and a serial-link time model.
///
/// Time advances by payload_bytes·8/bandwidth plus a fixed latency per message
/// (zero by default). Headers are counted but not charged to the link, and
/// compute time is not modeled.
class TransferLedger {
 public:
  TransferLedger(std::size_t num_boundaries, double bandwidth_bps, double latency_seconds = 0.0);

  void record(std::size_t boundary, Direction dir, std::uint64_t payload_bytes,
              std::uint64_t value_bytes, std::uint64_t messages = 1);
  /// Adds the transfer time of `bytes` without touching the counters.
  void simulate_time(std::uint64_t bytes);

  const LinkCounters& counters(std::size_t boundary, Direction dir) const;
  std::uint64_t total_payload_bytes(Direction dir) const;
  std::uint64_t total_payload_bytes() const;
  std::uint64_t total_value_bytes() const;
  std::uint64_t total_messages() const;

  double simulated_seconds() const noexcept { return seconds_; }
  double bandwidth_bps() const noexcept { return bandwidth_; }
  double latency_seconds() const noexcept { return latency_; }
  std::size_t num_boundaries() const noexcept { return links_.size() / 2; }

 private:
  std::vector<LinkCounters> links_;
  double bandwidth_;
  double latency_;
  double seconds_ = 0.0;
};

}  // namespace clapping::comms
