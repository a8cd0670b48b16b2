#pragma once

#include <compare>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sprinkler {

// Simulated time is kept in integer nanoseconds so that sums of timing
// parameters are exact; configuration and reports use microseconds.
using SimTime = std::int64_t;

inline constexpr SimTime kNsPerUs = 1000;

inline SimTime from_us(double us) {
  return static_cast<SimTime>(std::llround(us * static_cast<double>(kNsPerUs)));
}

inline double to_us(SimTime t) {
  return static_cast<double>(t) / static_cast<double>(kNsPerUs);
}

using ChipIndex = std::uint32_t;
using MemId = std::uint64_t;
using TagId = std::uint64_t;
using TxnId = std::uint64_t;

enum class IoKind : std::uint8_t { kRead, kWrite };
enum class OpKind : std::uint8_t { kRead, kProgram, kErase };
enum class FlpClass : std::uint8_t { kNonPal = 0, kPal1 = 1, kPal2 = 2, kPal3 = 3 };

inline constexpr int kFlpClassCount = 4;

std::string_view to_string(IoKind k);
std::string_view to_string(OpKind k);
std::string_view to_string(FlpClass c);

inline OpKind op_for(IoKind k) {
  return k == IoKind::kRead ? OpKind::kRead : OpKind::kProgram;
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chips are numbered so that consecutive indices walk across channels first:
// chip index = offset_in_channel * num_channels + channel. Ascending chip index
// therefore visits every channel at offset 0, then offset 1, and so on.
struct Geometry {
  std::uint32_t num_channels = 8;
  std::uint32_t chips_per_channel = 8;
  std::uint32_t dies_per_chip = 2;
  std::uint32_t planes_per_die = 4;
  std::uint32_t blocks_per_die = 8192;
  std::uint32_t pages_per_block = 128;
  std::uint32_t page_size = 2048;

  std::uint32_t total_chips() const { return num_channels * chips_per_channel; }
  std::uint32_t blocks_per_plane() const { return blocks_per_die / planes_per_die; }
  // Largest legal transaction: every plane of every die.
  std::uint32_t max_txn_members() const { return dies_per_chip * planes_per_die; }
  std::uint64_t pages_per_plane() const {
    return std::uint64_t{blocks_per_plane()} * pages_per_block;
  }
  std::uint64_t pages_per_die() const { return pages_per_plane() * planes_per_die; }
  std::uint64_t pages_per_chip() const { return pages_per_die() * dies_per_chip; }
  std::uint64_t raw_pages() const { return pages_per_chip() * total_chips(); }

  ChipIndex chip_index(std::uint32_t channel, std::uint32_t chip) const {
    return chip * num_channels + channel;
  }
  std::uint32_t channel_of(ChipIndex c) const { return c % num_channels; }
  std::uint32_t offset_of(ChipIndex c) const { return c / num_channels; }

  void validate() const;

  bool operator==(const Geometry&) const = default;
};

struct PhysicalAddress {
  std::uint32_t channel = 0;
  std::uint32_t chip = 0;  // offset within the channel
  std::uint32_t die = 0;
  std::uint32_t plane = 0;
  std::uint32_t block = 0;  // within the plane
  std::uint32_t page = 0;   // within the block

  auto operator<=>(const PhysicalAddress&) const = default;

  ChipIndex chip_index(const Geometry& g) const { return g.chip_index(channel, chip); }

  bool same_resource(const PhysicalAddress& o) const {
    return channel == o.channel && chip == o.chip && die == o.die && plane == o.plane;
  }

  bool valid_for(const Geometry& g) const {
    return channel < g.num_channels && chip < g.chips_per_channel &&
           die < g.dies_per_chip && plane < g.planes_per_die &&
           block < g.blocks_per_plane() && page < g.pages_per_block;
  }
};

std::string to_string(const PhysicalAddress& a);

// Dense page number, unique per physical page.
std::uint64_t pack(const PhysicalAddress& a, const Geometry& g);
PhysicalAddress unpack(std::uint64_t packed, const Geometry& g);

struct TimingParams {
  SimTime read_cell = from_us(20.0);
  SimTime program_cell_fast = from_us(200.0);
  SimTime program_cell_slow = from_us(2200.0);
  SimTime erase_cell = from_us(1500.0);
  SimTime bus_transfer_per_page = from_us(12.3);
  SimTime command_overhead = from_us(0.2);
  SimTime txn_decision_window = from_us(1.0);

  // Even pages within a block program fast, odd pages slow.
  SimTime program_cell(std::uint32_t page_in_block) const {
    return (page_in_block % 2 == 0) ? program_cell_fast : program_cell_slow;
  }

  // Page transfer time over a bus running at `mega_transfers` MT/s, one byte
  // per transfer.
  static SimTime transfer_time(std::uint32_t page_size, double mega_transfers);

  void validate() const;

  bool operator==(const TimingParams&) const = default;
};

}  // namespace sprinkler
