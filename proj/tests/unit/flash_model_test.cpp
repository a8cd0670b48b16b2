#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sprinkler/flash_model.hpp"

using namespace sprinkler;

namespace {

Geometry two_by_four() {
  Geometry g;
  g.num_channels = 1;
  g.chips_per_channel = 1;
  g.dies_per_chip = 2;
  g.planes_per_die = 4;
  g.blocks_per_die = 16;
  g.pages_per_block = 16;
  return g;
}

PhysicalAddress at(std::uint32_t die, std::uint32_t plane, std::uint32_t page, std::uint32_t block = 0) {
  return PhysicalAddress{0, 0, die, plane, block, page};
}

}  // namespace

TEST_SUITE("flash_model") {
  TEST_CASE("plane share legality") {
    const Geometry g = two_by_four();
    std::vector<PhysicalAddress> same_page{at(0, 0, 7), at(0, 1, 7)};
    CHECK(check_plane_share_legal(same_page, g));

    std::vector<PhysicalAddress> different_page{at(0, 0, 7), at(0, 1, 8)};
    CHECK_FALSE(check_plane_share_legal(different_page, g));

    std::vector<PhysicalAddress> five{at(0, 0, 1), at(0, 1, 1), at(0, 2, 1), at(0, 3, 1), at(0, 0, 1)};
    CHECK_FALSE(check_plane_share_legal(five, g));

    std::vector<PhysicalAddress> repeated_plane{at(0, 2, 3), at(0, 2, 3)};
    CHECK_FALSE(check_plane_share_legal(repeated_plane, g));

    // Block numbers may differ.
    std::vector<PhysicalAddress> other_blocks{at(0, 0, 5, 1), at(0, 3, 5, 2)};
    CHECK(check_plane_share_legal(other_blocks, g));

    std::vector<PhysicalAddress> two_chips{at(0, 0, 1), PhysicalAddress{0, 1, 0, 1, 0, 1}};
    Geometry wide = g;
    wide.chips_per_channel = 2;
    CHECK_THROWS_AS(check_plane_share_legal(two_chips, wide), std::logic_error);
  }

  TEST_CASE("flp classes") {
    const Geometry g = two_by_four();
    std::vector<PhysicalAddress> one{at(0, 0, 0)};
    CHECK(classify_flp(one, g) == FlpClass::kNonPal);

    std::vector<PhysicalAddress> two_dies{at(0, 0, 3), at(1, 2, 9)};
    CHECK(classify_flp(two_dies, g) == FlpClass::kPal2);

    std::vector<PhysicalAddress> one_die{at(1, 0, 4), at(1, 3, 4)};
    CHECK(classify_flp(one_die, g) == FlpClass::kPal1);

    std::vector<PhysicalAddress> all;
    for (std::uint32_t d = 0; d < 2; ++d)
      for (std::uint32_t p = 0; p < 4; ++p) all.push_back(at(d, p, d));
    CHECK(classify_flp(all, g) == FlpClass::kPal3);

    std::vector<PhysicalAddress> bad{at(0, 0, 1), at(0, 1, 2)};
    CHECK_THROWS_AS(classify_flp(bad, g), std::logic_error);
    CHECK_THROWS_AS(classify_flp(std::span<const PhysicalAddress>{}, g), std::logic_error);
  }

  TEST_CASE("flp classes agree with the oracle") {
    std::mt19937_64 rng(11);
    const Geometry g = two_by_four();
    int legal = 0;
    for (int i = 0; i < 2000; ++i) {
      std::vector<PhysicalAddress> m;
      const int n = 1 + static_cast<int>(rng() % 8);
      for (int k = 0; k < n; ++k)
        m.push_back(at(rng() % 2, rng() % 4, rng() % 2));
      const bool ok = testing::oracle_legal(m, g);
      if (!ok) {
        CHECK_THROWS(classify_flp(m, g));
        continue;
      }
      ++legal;
      CHECK(classify_flp(m, g) == testing::oracle_flp(m, g));
    }
    CHECK(legal > 100);
  }

  TEST_CASE("bus grants") {
    ChannelBus bus;
    CHECK(bus.grant(100, 12) == BusGrant{100, 112});
    CHECK(bus.grant(100, 12) == BusGrant{112, 124});
    CHECK(bus.total_wait() == 12);

    // A short request fits into an earlier hole.
    ChannelBus holes;
    holes.grant(0, 10);
    holes.grant(50, 10);
    CHECK(holes.grant(5, 20) == BusGrant{10, 30});
    CHECK(holes.grant(20, 30) == BusGrant{60, 90});
    CHECK_THROWS_AS(holes.grant(0, 0), std::logic_error);

    holes.prune(40);
    CHECK(holes.grants().size() == 2);
  }

  TEST_CASE("grants never overlap") {
    std::mt19937_64 rng(5);
    ChannelBus bus;
    for (int i = 0; i < 3000; ++i) {
      const SimTime start = static_cast<SimTime>(rng() % 100000);
      const SimTime dur = 1 + static_cast<SimTime>(rng() % 300);
      const BusGrant got = bus.grant(start, dur);
      CHECK(got.start >= start);
      CHECK(got.duration() == dur);
    }
    SimTime last_end = -1;
    for (const auto& [s, e] : bus.grants()) {
      CHECK(s >= last_end);
      last_end = e;
    }
  }

  TEST_CASE("single page read") {
    Geometry g = two_by_four();
    TimingParams t;
    t.txn_decision_window = from_us(1.0);
    ChipState chip(g.dies_per_chip);
    BusArbiter bus(1);
    std::vector<PhysicalAddress> m{at(0, 0, 0)};
    const auto s = execute_transaction(OpKind::kRead, m, chip, bus, g, t, 0);
    // command, cell, data out; the decision window is the engine's business
    CHECK(s.end == from_us(0.2 + 20.0 + 12.3));
    CHECK(t.txn_decision_window + s.end == from_us(33.5));
    CHECK(chip.rb_busy);
    CHECK_THROWS_AS(execute_transaction(OpKind::kRead, m, chip, bus, g, t, 0), std::logic_error);
    chip.release();
    CHECK_FALSE(chip.rb_busy);
  }

  TEST_CASE("program cell by page parity") {
    Geometry g = two_by_four();
    TimingParams t;
    ChipState chip(g.dies_per_chip);
    BusArbiter bus(1);
    std::vector<PhysicalAddress> fast{at(0, 0, 4)};
    auto s = execute_transaction(OpKind::kProgram, fast, chip, bus, g, t, 0);
    REQUIRE(s.cells.size() == 1);
    CHECK(s.cells[0].end - s.cells[0].start == from_us(200.0));
    CHECK(s.data_slots.empty());
    chip.release();
    std::vector<PhysicalAddress> slow{at(0, 0, 5)};
    s = execute_transaction(OpKind::kProgram, slow, chip, bus, g, t, s.end);
    CHECK(s.cells[0].end - s.cells[0].start == from_us(2200.0));
  }

  TEST_CASE("pal3 read overlaps both dies") {
    Geometry g = two_by_four();
    TimingParams t;
    ChipState chip(g.dies_per_chip);
    BusArbiter bus(1);
    std::vector<PhysicalAddress> m;
    for (std::uint32_t d = 0; d < 2; ++d)
      for (std::uint32_t p = 0; p < 4; ++p) m.push_back(at(d, p, 3));
    const auto s = execute_transaction(OpKind::kRead, m, chip, bus, g, t, 0);
    REQUIRE(s.cells.size() == 2);
    for (const auto& c : s.cells) CHECK(c.end - c.start == t.read_cell);
    CHECK(s.cells[1].start < s.cells[0].end);
    // Eight serial reads would need eight cell intervals.
    const SimTime span = s.cells[1].end - s.cells[0].start;
    CHECK(span == t.read_cell + 4 * t.command_overhead);
    CHECK(span < 8 * t.read_cell);
    CHECK(s.total_cell_time() == 2 * t.read_cell);
  }

  TEST_CASE("schedules match the oracle on an idle chip") {
    std::mt19937_64 rng(3);
    const Geometry g = two_by_four();
    for (int i = 0; i < 1500; ++i) {
      TimingParams t;
      t.read_cell = from_us(1 + static_cast<double>(rng() % 50));
      t.program_cell_fast = from_us(1 + static_cast<double>(rng() % 200));
      t.program_cell_slow = t.program_cell_fast + from_us(static_cast<double>(rng() % 300));
      t.bus_transfer_per_page = from_us(0.5 + static_cast<double>(rng() % 30));
      t.command_overhead = from_us(0.1 * static_cast<double>(1 + rng() % 5));
      const OpKind kind = rng() % 2 ? OpKind::kRead : OpKind::kProgram;

      std::vector<PhysicalAddress> m;
      const std::uint32_t pages[2] = {static_cast<std::uint32_t>(rng() % 16),
                                      static_cast<std::uint32_t>(rng() % 16)};
      for (std::uint32_t d = 0; d < 2; ++d)
        for (std::uint32_t p = 0; p < 4; ++p)
          if (rng() % 2) m.push_back(at(d, p, pages[d]));
      if (m.empty()) m.push_back(at(0, 0, pages[0]));
      std::shuffle(m.begin(), m.end(), rng);

      const SimTime now = static_cast<SimTime>(rng() % 1000);
      ChipState chip(g.dies_per_chip);
      BusArbiter bus(1);
      const auto got = execute_transaction(kind, m, chip, bus, g, t, now);
      const auto want = testing::oracle_schedule(kind, m, g, t, now);
      INFO("case " << i);
      CHECK(got.end == want.end);
      for (const auto& c : got.cells) {
        CHECK(c.start == want.cell_start[c.die]);
        CHECK(c.end == want.cell_end[c.die]);
      }
      CHECK(got.bus_wait == 0);
    }
  }

  TEST_CASE("busy die delays the next cell") {
    Geometry g = two_by_four();
    TimingParams t;
    ChipState chip(g.dies_per_chip);
    BusArbiter bus(1);
    chip.die_busy_until[1] = from_us(500);
    std::vector<PhysicalAddress> m{at(1, 0, 0)};
    const auto s = execute_transaction(OpKind::kRead, m, chip, bus, g, t, 0);
    CHECK(s.cells[0].start == from_us(500));
  }

  TEST_CASE("transfer time") {
    CHECK(TimingParams::transfer_time(2048, 2048.0 / 12.3) == from_us(12.3));
    CHECK_THROWS_AS(TimingParams::transfer_time(2048, 0.0), ConfigError);
  }
}
