#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sprinkler/types.hpp"

namespace sprinkler {

class CapacityExhausted : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class UnmappedRead : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

enum class VictimPolicy : std::uint8_t { kGreedyMaxInvalid };

struct GcConfig {
  double free_block_threshold = 0.05;  // per (chip, die), fraction of blocks
  VictimPolicy victim_policy = VictimPolicy::kGreedyMaxInvalid;
  double precondition_fill = 0.95;

  void validate() const;
};

struct FtlConfig {
  double export_fraction = 0.9;
  GcConfig gc;

  void validate() const;
};

struct Migration {
  std::uint64_t vpage = 0;
  PhysicalAddress from;
  PhysicalAddress to;
};

struct MigrationReport {
  ChipIndex chip = 0;
  std::uint32_t die = 0;
  PhysicalAddress victim;  // page field is 0
  std::vector<Migration> migrations;
};

struct PreprocessedPage {
  std::uint64_t vpage = 0;
  PhysicalAddress target;
  bool unmapped = false;                    // read of never-written data
  std::optional<PhysicalAddress> replaced;  // write: page invalidated by this write
};

// Notifications for migrations that moved data to a different
// (chip, die, plane); moves within one plane are not reported.
std::vector<Migration> crossing_migrations(std::span<const Migration> migrations);

// Pure page-level mapping FTL. Consecutive virtual pages are striped across
// channels, then chips, then dies, then planes; overwrites stay on the same
// plane when it has room. Garbage collection runs synchronously on the
// mapping state; the engine replays the returned migrations as timed flash
// work.
class Ftl {
 public:
  using ReaddressingCallback = std::function<void(std::span<const Migration>)>;

  Ftl(const Geometry& geometry, const FtlConfig& config);

  const Geometry& geometry() const { return geometry_; }
  std::uint64_t exported_pages() const { return fwd_.size(); }
  std::uint64_t exported_bytes() const { return exported_pages() * geometry_.page_size; }
  std::uint64_t mapped_pages() const { return mapped_; }

  // Splits a byte range into page-sized pieces and translates each one,
  // allocating on writes. Throws std::out_of_range if the range runs past
  // the exported capacity.
  std::vector<PreprocessedPage> preprocess(IoKind kind, std::uint64_t offset, std::uint64_t length);

  // Current location of a written page; throws UnmappedRead otherwise.
  PhysicalAddress translate(std::uint64_t vpage) const;
  std::optional<PhysicalAddress> lookup(std::uint64_t vpage) const;

  // Out-of-place update: allocates a fresh page, invalidates the old one.
  PreprocessedPage write(std::uint64_t vpage);

  // Where a first write of `vpage` is placed before falling back to other
  // planes of the same die.
  PhysicalAddress stripe_target(std::uint64_t vpage) const;

  // Binds `vpage` to the next free page of one plane, bypassing striping
  // and GC. For laying out hand-built scenarios.
  PhysicalAddress place(std::uint64_t vpage, ChipIndex chip, std::uint32_t die, std::uint32_t plane);

  bool needs_gc(ChipIndex chip, std::uint32_t die) const;
  std::uint32_t free_blocks(ChipIndex chip, std::uint32_t die) const;

  // Greedy max-invalid victim (ties: lowest plane, then block). Pinned
  // blocks are skipped. Returns std::nullopt when no block is eligible and
  // free space remains; throws CapacityExhausted when nothing can be
  // reclaimed and the die has no free block.
  std::optional<MigrationReport> run_gc(ChipIndex chip, std::uint32_t die);

  // GC reports produced since the last call (including GC triggered by
  // writes inside preprocess()).
  std::vector<MigrationReport> take_gc_reports();

  void set_readdressing_callback(ReaddressingCallback cb) { callback_ = std::move(cb); }

  // Blocks holding data an outstanding request still needs are not erased.
  void pin(const PhysicalAddress& a);
  void unpin(const PhysicalAddress& a);

  // Writes every page in [0, fraction * exported) in order, instantly.
  void precondition_sequential(double fraction);
  // Issues random aligned `io_bytes` writes instantly until `fill` of the
  // exported space is mapped; GC runs as needed.
  void precondition_random(double fill, std::uint64_t io_bytes, std::uint64_t seed);

  // Full consistency check of forward/reverse maps and block counters.
  // Throws std::logic_error describing the first violation.
  void audit() const;

  enum class PageState : std::uint8_t { kFree, kValid, kInvalid };
  PageState page_state(const PhysicalAddress& a) const;
  std::uint32_t valid_pages(const PhysicalAddress& block_addr) const;

  std::uint64_t gc_runs() const { return gc_runs_; }
  std::uint64_t gc_migrations() const { return gc_migrations_; }

 private:
  static constexpr std::uint32_t kUnmapped = 0xffffffffu;
  static constexpr std::uint32_t kFreePage = 0xffffffffu;
  static constexpr std::uint32_t kInvalidPage = 0xfffffffeu;

  enum class BlockState : std::uint8_t { kFree, kOpen, kFull };

  struct Block {
    std::uint32_t valid = 0;
    std::uint32_t write_ptr = 0;
    std::uint32_t pins = 0;
    BlockState state = BlockState::kFree;
  };

  struct Plane {
    std::deque<std::uint32_t> free_blocks;
    std::int64_t active = -1;
  };

  std::size_t plane_id(ChipIndex chip, std::uint32_t die, std::uint32_t plane) const {
    return (std::size_t{chip} * geometry_.dies_per_chip + die) * geometry_.planes_per_die + plane;
  }
  std::size_t block_id(const PhysicalAddress& a) const {
    return plane_id(a.chip_index(geometry_), a.die, a.plane) * geometry_.blocks_per_plane() + a.block;
  }
  std::size_t die_id(ChipIndex chip, std::uint32_t die) const {
    return std::size_t{chip} * geometry_.dies_per_chip + die;
  }
  std::uint64_t plane_free_pages(std::size_t pid) const;

  std::optional<PhysicalAddress> allocate_in_plane(ChipIndex chip, std::uint32_t die,
                                                   std::uint32_t plane);
  PhysicalAddress allocate_in_die(ChipIndex chip, std::uint32_t die, std::uint32_t preferred_plane);
  PhysicalAddress allocate_for_migration(ChipIndex chip, std::uint32_t die);
  void ensure_space(ChipIndex chip, std::uint32_t die);
  void bind(std::uint64_t vpage, const PhysicalAddress& a);
  void invalidate(const PhysicalAddress& a);

  Geometry geometry_;
  FtlConfig config_;
  std::uint32_t gc_free_target_ = 1;
  std::vector<std::uint32_t> fwd_;  // vpage -> packed physical page
  std::vector<std::uint32_t> rev_;  // packed physical page -> vpage / marker
  std::vector<Block> blocks_;
  std::vector<Plane> planes_;
  std::vector<std::uint32_t> die_free_blocks_;
  std::uint64_t mapped_ = 0;
  std::uint64_t gc_runs_ = 0;
  std::uint64_t gc_migrations_ = 0;
  bool in_gc_ = false;
  std::vector<MigrationReport> reports_;
  ReaddressingCallback callback_;
};

}  // namespace sprinkler
