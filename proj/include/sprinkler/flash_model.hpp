#pragma once

#include <map>
#include <span>
#include <vector>

#include "sprinkler/types.hpp"

namespace sprinkler {

// True iff the requests (all on one die) can be served by a single
// multi-plane operation: same page offset, pairwise-distinct planes, and no
// more requests than planes. Throws std::logic_error if the requests span
// more than one chip.
bool check_plane_share_legal(std::span<const PhysicalAddress> reqs, const Geometry& geometry);

// Classifies a transaction's members. Throws std::logic_error on an empty
// set, members on different chips, or a die group that fails
// check_plane_share_legal.
FlpClass classify_flp(std::span<const PhysicalAddress> members, const Geometry& geometry);

struct BusGrant {
  SimTime start = 0;
  SimTime end = 0;

  SimTime duration() const { return end - start; }
  bool operator==(const BusGrant&) const = default;
};

// Grants on one shared channel. A request gets the earliest gap at or after
// its start time, so later callers may fill holes left by earlier grants.
class ChannelBus {
 public:
  BusGrant grant(SimTime start, SimTime duration);

  // Forget grants that end at or before `t`; no future request may start
  // earlier than `t` after this call.
  void prune(SimTime t);

  SimTime total_wait() const { return total_wait_; }
  const std::map<SimTime, SimTime>& grants() const { return grants_; }

 private:
  std::map<SimTime, SimTime> grants_;  // start -> end, non-overlapping
  SimTime total_wait_ = 0;
};

class BusArbiter {
 public:
  explicit BusArbiter(std::uint32_t num_channels) : channels_(num_channels) {}

  BusGrant bus_arbitrate(std::uint32_t channel, SimTime start, SimTime duration);

  void prune(SimTime t) {
    for (auto& c : channels_) c.prune(t);
  }

  const ChannelBus& channel(std::uint32_t c) const { return channels_.at(c); }
  SimTime total_wait() const;

 private:
  std::vector<ChannelBus> channels_;
};

struct CellInterval {
  std::uint32_t die = 0;
  SimTime start = 0;
  SimTime end = 0;
};

// Everything a transaction occupies, in absolute simulated time.
struct TransactionSchedule {
  OpKind kind = OpKind::kRead;
  SimTime start = 0;  // chip becomes busy
  SimTime end = 0;    // chip released
  // One entry per member (same order as the members passed in): the command
  // slot for reads and erases, the command plus data-in slot for programs.
  std::vector<BusGrant> command_slots;
  // Data-out slots for reads; empty for programs and erases.
  std::vector<BusGrant> data_slots;
  // One interval per die that has members.
  std::vector<CellInterval> cells;
  // Time each member's work is finished on the chip.
  std::vector<SimTime> member_done;
  // Sum over slots of (granted start - requested start).
  SimTime bus_wait = 0;

  SimTime busy_time() const { return end - start; }
  SimTime total_cell_time() const;
};

struct ChipState {
  std::vector<SimTime> die_busy_until;
  bool rb_busy = false;
  SimTime busy_until = 0;

  explicit ChipState(std::uint32_t dies = 1) : die_busy_until(dies, 0) {}
  void release() { rb_busy = false; }
};

// Computes and reserves the timing of one transaction on `chip`, starting no
// earlier than `now`. Members are executed in the given order; the caller
// sorts them (the engine uses die, plane order). Bus slots for one member
// follow the previous member's slot, and every die starts its single cell
// interval once all of its members' bus work that must precede the cell is
// done. Throws std::logic_error if the chip is already busy or the members
// are not a legal transaction.
TransactionSchedule execute_transaction(OpKind kind, std::span<const PhysicalAddress> members,
                                        ChipState& chip, BusArbiter& bus,
                                        const Geometry& geometry, const TimingParams& timing,
                                        SimTime now);

}  // namespace sprinkler
