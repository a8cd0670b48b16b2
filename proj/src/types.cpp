#include "sprinkler/types.hpp"

#include <sstream>

namespace sprinkler {

std::string_view to_string(IoKind k) {
  return k == IoKind::kRead ? "read" : "write";
}

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kRead:
      return "read";
    case OpKind::kProgram:
      return "program";
    case OpKind::kErase:
      return "erase";
  }
  return "?";
}

std::string_view to_string(FlpClass c) {
  switch (c) {
    case FlpClass::kNonPal:
      return "NON_PAL";
    case FlpClass::kPal1:
      return "PAL1";
    case FlpClass::kPal2:
      return "PAL2";
    case FlpClass::kPal3:
      return "PAL3";
  }
  return "?";
}

void Geometry::validate() const {
  if (num_channels == 0 || chips_per_channel == 0 || dies_per_chip == 0 ||
      planes_per_die == 0 || blocks_per_die == 0 || pages_per_block == 0 ||
      page_size == 0) {
    throw ConfigError("geometry: all counts must be >= 1");
  }
  if (blocks_per_die % planes_per_die != 0) {
    throw ConfigError("geometry: blocks_per_die must be a multiple of planes_per_die");
  }
  if (raw_pages() >= 0xffffffffULL) {
    throw ConfigError("geometry: more than 2^32-1 physical pages is not supported");
  }
}

std::string to_string(const PhysicalAddress& a) {
  std::ostringstream os;
  os << "(ch" << a.channel << ",c" << a.chip << ",d" << a.die << ",p" << a.plane
     << ",b" << a.block << ",pg" << a.page << ")";
  return os.str();
}

std::uint64_t pack(const PhysicalAddress& a, const Geometry& g) {
  std::uint64_t v = a.chip_index(g);
  v = v * g.dies_per_chip + a.die;
  v = v * g.planes_per_die + a.plane;
  v = v * g.blocks_per_plane() + a.block;
  v = v * g.pages_per_block + a.page;
  return v;
}

PhysicalAddress unpack(std::uint64_t packed, const Geometry& g) {
  PhysicalAddress a;
  a.page = static_cast<std::uint32_t>(packed % g.pages_per_block);
  packed /= g.pages_per_block;
  a.block = static_cast<std::uint32_t>(packed % g.blocks_per_plane());
  packed /= g.blocks_per_plane();
  a.plane = static_cast<std::uint32_t>(packed % g.planes_per_die);
  packed /= g.planes_per_die;
  a.die = static_cast<std::uint32_t>(packed % g.dies_per_chip);
  packed /= g.dies_per_chip;
  const auto chip = static_cast<ChipIndex>(packed);
  a.channel = g.channel_of(chip);
  a.chip = g.offset_of(chip);
  return a;
}

SimTime TimingParams::transfer_time(std::uint32_t page_size, double mega_transfers) {
  if (mega_transfers <= 0.0) throw ConfigError("timing: bus rate must be > 0");
  return from_us(static_cast<double>(page_size) / mega_transfers);
}

void TimingParams::validate() const {
  if (read_cell <= 0 || program_cell_fast <= 0 || program_cell_slow <= 0 ||
      erase_cell <= 0 || bus_transfer_per_page <= 0 || command_overhead <= 0 ||
      txn_decision_window <= 0) {
    throw ConfigError("timing: all times must be > 0");
  }
}

}  // namespace sprinkler
