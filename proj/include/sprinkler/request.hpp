#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "sprinkler/completion_bitmap.hpp"
#include "sprinkler/types.hpp"

namespace sprinkler {

inline constexpr TagId kNoTag = std::numeric_limits<TagId>::max();

enum class MemState : std::uint8_t { kPending, kCommitted, kInTransaction, kDone };

// One page of flash work. Host requests belong to a tag; garbage collection
// work carries kNoTag and never occupies a device-queue entry.
struct MemoryRequest {
  MemId id = 0;
  TagId tag = kNoTag;
  std::uint32_t index_in_tag = 0;
  OpKind op = OpKind::kRead;
  std::uint64_t vpage = 0;
  PhysicalAddress target;  // where the flash operation really goes
  PhysicalAddress sched;   // where the scheduler believes it goes
  MemState state = MemState::kPending;
  bool pinned = false;     // holds a pin on target's block
  bool unmapped = false;   // read of never-written data, served without flash
  std::vector<MemId> hazard_reads;  // earlier reads of the same page (writes only)
};

// Host I/O request occupying one device-queue entry.
struct IORequest {
  TagId id = 0;
  SimTime arrival_time = 0;  // accepted into the device queue
  IoKind kind = IoKind::kRead;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool fua = false;

  std::vector<MemId> mems;  // page order
  CompletionBitmap bitmap;
  std::uint32_t uncommitted = 0;
  std::uint32_t done = 0;
  std::uint32_t delivered = 0;  // in-order DMA progress (reads)
  std::vector<bool> page_done;
};

}  // namespace sprinkler
