#include "sprinkler/flash_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace sprinkler {

namespace {

void require_one_chip(std::span<const PhysicalAddress> reqs) {
  for (const auto& r : reqs) {
    if (r.channel != reqs.front().channel || r.chip != reqs.front().chip) {
      throw std::logic_error("flash requests span more than one chip");
    }
  }
}

}  // namespace

bool check_plane_share_legal(std::span<const PhysicalAddress> reqs, const Geometry& geometry) {
  if (reqs.empty()) return true;
  require_one_chip(reqs);
  if (reqs.size() > geometry.planes_per_die) return false;
  std::vector<bool> seen(geometry.planes_per_die, false);
  for (const auto& r : reqs) {
    if (r.die != reqs.front().die || r.page != reqs.front().page) return false;
    if (r.plane >= geometry.planes_per_die || seen[r.plane]) return false;
    seen[r.plane] = true;
  }
  return true;
}

FlpClass classify_flp(std::span<const PhysicalAddress> members, const Geometry& geometry) {
  if (members.empty()) throw std::logic_error("classify_flp: empty transaction");
  require_one_chip(members);
  std::vector<std::vector<PhysicalAddress>> by_die(geometry.dies_per_chip);
  for (const auto& m : members) {
    if (m.die >= geometry.dies_per_chip) throw std::logic_error("classify_flp: die out of range");
    by_die[m.die].push_back(m);
  }
  std::size_t dies_used = 0;
  bool multi_plane = false;
  for (const auto& group : by_die) {
    if (group.empty()) continue;
    ++dies_used;
    if (!check_plane_share_legal(group, geometry)) {
      throw std::logic_error("classify_flp: die group is not plane-share legal");
    }
    if (group.size() >= 2) multi_plane = true;
  }
  if (members.size() == 1) return FlpClass::kNonPal;
  if (dies_used == 1) return FlpClass::kPal1;
  return multi_plane ? FlpClass::kPal3 : FlpClass::kPal2;
}

BusGrant ChannelBus::grant(SimTime start, SimTime duration) {
  if (duration <= 0) throw std::logic_error("bus grant with non-positive duration");
  SimTime t = start;
  // The grant just before `t` may still cover it.
  auto it = grants_.upper_bound(t);
  if (it != grants_.begin()) {
    auto prev = std::prev(it);
    if (prev->second > t) t = prev->second;
  }
  // Walk forward until a gap of `duration` opens up.
  it = grants_.lower_bound(t);
  while (it != grants_.end() && it->first < t + duration) {
    t = std::max(t, it->second);
    ++it;
  }
  grants_.emplace(t, t + duration);
  total_wait_ += t - start;
  return BusGrant{t, t + duration};
}

void ChannelBus::prune(SimTime t) {
  auto it = grants_.begin();
  while (it != grants_.end() && it->second <= t) it = grants_.erase(it);
}

BusGrant BusArbiter::bus_arbitrate(std::uint32_t channel, SimTime start, SimTime duration) {
  return channels_.at(channel).grant(start, duration);
}

SimTime BusArbiter::total_wait() const {
  SimTime w = 0;
  for (const auto& c : channels_) w += c.total_wait();
  return w;
}

SimTime TransactionSchedule::total_cell_time() const {
  SimTime t = 0;
  for (const auto& c : cells) t += c.end - c.start;
  return t;
}

TransactionSchedule execute_transaction(OpKind kind, std::span<const PhysicalAddress> members,
                                        ChipState& chip, BusArbiter& bus,
                                        const Geometry& geometry, const TimingParams& timing,
                                        SimTime now) {
  if (chip.rb_busy) throw std::logic_error("execute_transaction: chip is busy");
  if (kind == OpKind::kErase) {
    if (members.size() != 1) throw std::logic_error("erase transactions have one member");
  } else {
    classify_flp(members, geometry);
  }

  const std::uint32_t channel = members.front().channel;
  TransactionSchedule s;
  s.kind = kind;
  s.start = now;
  s.command_slots.reserve(members.size());
  s.member_done.assign(members.size(), now);

  auto take_bus = [&](SimTime ready, SimTime duration) {
    BusGrant g = bus.bus_arbitrate(channel, ready, duration);
    s.bus_wait += g.start - ready;
    return g;
  };

  // Per die: when its cell may start and the cell length.
  std::vector<SimTime> die_ready(geometry.dies_per_chip, now);
  std::vector<SimTime> die_cell(geometry.dies_per_chip, 0);
  std::vector<bool> die_used(geometry.dies_per_chip, false);

  const SimTime front_slot = kind == OpKind::kProgram
                                 ? timing.command_overhead + timing.bus_transfer_per_page
                                 : timing.command_overhead;
  SimTime ready = now;
  for (const auto& m : members) {
    BusGrant g = take_bus(ready, front_slot);
    s.command_slots.push_back(g);
    ready = g.end;
    die_used[m.die] = true;
    die_ready[m.die] = std::max(die_ready[m.die], g.end);
    SimTime cell = 0;
    switch (kind) {
      case OpKind::kRead:
        cell = timing.read_cell;
        break;
      case OpKind::kProgram:
        cell = timing.program_cell(m.page);
        break;
      case OpKind::kErase:
        cell = timing.erase_cell;
        break;
    }
    die_cell[m.die] = std::max(die_cell[m.die], cell);
  }

  std::vector<SimTime> die_cell_end(geometry.dies_per_chip, now);
  for (std::uint32_t d = 0; d < geometry.dies_per_chip; ++d) {
    if (!die_used[d]) continue;
    const SimTime start = std::max(die_ready[d], chip.die_busy_until[d]);
    die_cell_end[d] = start + die_cell[d];
    chip.die_busy_until[d] = die_cell_end[d];
    s.cells.push_back(CellInterval{d, start, die_cell_end[d]});
  }

  SimTime end = now;
  if (kind == OpKind::kRead) {
    // Data leaves the chip die by die in the order cells finish.
    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return die_cell_end[members[a].die] < die_cell_end[members[b].die];
    });
    s.data_slots.resize(members.size());
    SimTime out_ready = now;
    for (std::size_t i : order) {
      BusGrant g =
          take_bus(std::max(out_ready, die_cell_end[members[i].die]), timing.bus_transfer_per_page);
      s.data_slots[i] = g;
      s.member_done[i] = g.end;
      out_ready = g.end;
      end = std::max(end, g.end);
    }
  } else {
    for (std::size_t i = 0; i < members.size(); ++i) {
      s.member_done[i] = die_cell_end[members[i].die];
      end = std::max(end, s.member_done[i]);
    }
  }
  s.end = end;
  chip.rb_busy = true;
  chip.busy_until = end;
  return s;
}

}  // namespace sprinkler
