#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace sprinkler::testing {

bool oracle_legal(std::span<const PhysicalAddress> members, const Geometry& g) {
  if (members.empty() || members.size() > std::size_t{g.dies_per_chip} * g.planes_per_die) return false;
  std::map<std::uint32_t, std::uint32_t> page_of_die;
  std::set<std::pair<std::uint32_t, std::uint32_t>> die_plane;
  for (const auto& m : members) {
    if (m.channel != members[0].channel || m.chip != members[0].chip) return false;
    auto [it, fresh] = page_of_die.emplace(m.die, m.page);
    if (!fresh && it->second != m.page) return false;
    if (!die_plane.emplace(m.die, m.plane).second) return false;
  }
  return true;
}

FlpClass oracle_flp(std::span<const PhysicalAddress> members, const Geometry&) {
  std::map<std::uint32_t, int> per_die;
  for (const auto& m : members) ++per_die[m.die];
  if (members.size() == 1) return FlpClass::kNonPal;
  if (per_die.size() == 1) return FlpClass::kPal1;
  for (const auto& [die, n] : per_die) {
    if (n > 1) return FlpClass::kPal3;
  }
  return FlpClass::kPal2;
}

OracleSchedule oracle_schedule(OpKind kind, std::span<const PhysicalAddress> members, const Geometry& g,
                               const TimingParams& t, SimTime now) {
  OracleSchedule s;
  s.cell_start.assign(g.dies_per_chip, -1);
  s.cell_end.assign(g.dies_per_chip, -1);
  std::vector<SimTime> ready(g.dies_per_chip, -1);
  SimTime bus = now;
  for (const auto& m : members) {
    SimTime slot = t.command_overhead;
    if (kind == OpKind::kProgram) slot += t.bus_transfer_per_page;
    bus += slot;
    ready[m.die] = bus;
  }
  for (const auto& m : members) {
    SimTime cell = t.read_cell;
    if (kind == OpKind::kProgram) cell = t.program_cell(m.page);
    if (kind == OpKind::kErase) cell = t.erase_cell;
    s.cell_start[m.die] = ready[m.die];
    s.cell_end[m.die] = std::max(s.cell_end[m.die], ready[m.die] + cell);
  }
  s.end = bus;
  for (SimTime e : s.cell_end) s.end = std::max(s.end, e);
  if (kind == OpKind::kRead) {
    // Data leaves in cell-completion order; ties keep member order.
    std::vector<SimTime> ends;
    for (const auto& m : members) ends.push_back(s.cell_end[m.die]);
    std::stable_sort(ends.begin(), ends.end());
    SimTime out = bus;
    for (SimTime e : ends) out = std::max(out, e) + t.bus_transfer_per_page;
    s.end = out;
  }
  return s;
}

BruteForceFaro brute_force_faro(std::span<const FaroEntry> bucket, const Geometry&) {
  BruteForceFaro r;
  r.priority.assign(bucket.size(), FaroPriority{});
  const std::size_t n = bucket.size();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::map<std::uint32_t, std::uint32_t> page_of_die;
    std::set<std::pair<std::uint32_t, std::uint32_t>> used;
    bool ok = true;
    OpKind op{};
    bool first = true;
    std::map<std::uint64_t, std::uint32_t> per_tag;
    std::uint32_t size = 0;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      const FaroEntry& e = bucket[i];
      if (first) {
        op = e.op;
        first = false;
      }
      if (e.op != op) ok = false;
      auto [it, fresh] = page_of_die.emplace(e.die, e.page);
      if (!fresh && it->second != e.page) ok = false;
      if (!used.emplace(e.die, e.plane).second) ok = false;
      ++per_tag[e.tag_order];
      ++size;
    }
    if (!ok) continue;
    if (op == OpKind::kErase && size > 1) continue;
    r.best = std::max<std::size_t>(r.best, size);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      auto& p = r.priority[i];
      p.overlap_depth = std::max(p.overlap_depth, size);
      p.connectivity = std::max(p.connectivity, per_tag[bucket[i].tag_order]);
    }
  }
  return r;
}

}  // namespace sprinkler::testing
