#include <gtest/gtest.h>

#include "clapping/comms/ledger.hpp"

using namespace clapping::comms;

TEST(Ledger, OneMegabyteAtHundredMbps) {
  TransferLedger l(1, 100e6);
  l.simulate_time(1000000);
  EXPECT_NEAR(l.simulated_seconds(), 0.08, 1e-15);
  l.simulate_time(0);
  EXPECT_NEAR(l.simulated_seconds(), 0.08, 1e-15);
}

TEST(Ledger, DenseVersusTopFivePercentTimeRatio) {
  // d = 4000: dense 16000 bytes, top-200 at 8 bytes per entry 1600 bytes.
  EXPECT_NEAR(transfer_seconds(16000, 100e6) / transfer_seconds(1600, 100e6), 10.0, 1e-12);
}

TEST(Ledger, TotalsAreConserved) {
  TransferLedger l(2, 1e6);
  l.record(0, Direction::Forward, 100, 60, 2);
  l.record(1, Direction::Forward, 50, 50);
  l.record(1, Direction::Backward, 30, 20);
  EXPECT_EQ(l.total_payload_bytes(Direction::Forward), 150u);
  EXPECT_EQ(l.total_payload_bytes(Direction::Backward), 30u);
  EXPECT_EQ(l.total_payload_bytes(), 180u);
  EXPECT_EQ(l.total_value_bytes(), 130u);
  EXPECT_EQ(l.total_messages(), 4u);
  EXPECT_EQ(l.counters(0, Direction::Forward).header_bytes, 16u);
  EXPECT_NEAR(l.simulated_seconds(), 180.0 * 8 / 1e6, 1e-15);
}

TEST(Ledger, LatencyIsChargedPerMessage) {
  TransferLedger l(1, 1e6, 0.01);
  l.record(0, Direction::Forward, 0, 0, 3);
  EXPECT_NEAR(l.simulated_seconds(), 0.03, 1e-15);
}
