#include "sprinkler/schedulers.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>

namespace sprinkler {

void LayoutIndex::insert(ChipIndex chip, MemId id) {
  auto& b = buckets_.at(chip);
  if (!b.insert(id).second) throw std::logic_error("layout index: duplicate entry");
  nonempty_.insert(chip);
  ++size_;
}

void LayoutIndex::erase(ChipIndex chip, MemId id) {
  auto& b = buckets_.at(chip);
  if (b.erase(id) == 0) throw std::logic_error("layout index: missing entry");
  if (b.empty()) nonempty_.erase(chip);
  --size_;
}

void LayoutIndex::move(MemId id, ChipIndex from, ChipIndex to) {
  if (from == to) return;
  erase(from, id);
  insert(to, id);
}

std::vector<ChipIndex> rios_traverse(const Geometry& geometry) {
  std::vector<ChipIndex> order;
  order.reserve(geometry.total_chips());
  for (std::uint32_t offset = 0; offset < geometry.chips_per_channel; ++offset) {
    for (std::uint32_t ch = 0; ch < geometry.num_channels; ++ch) {
      order.push_back(geometry.chip_index(ch, offset));
    }
  }
  return order;
}

namespace {

using GroupKey = std::tuple<OpKind, std::uint32_t, std::uint32_t>;  // op, die, page

// Distinct-plane counts per (op, die, page) and the best such count per
// (op, die).
struct GroupCounts {
  std::map<GroupKey, std::vector<bool>> planes;
  std::map<GroupKey, std::uint32_t> count;
  std::map<std::pair<OpKind, std::uint32_t>, std::uint32_t> best;

  void add(const FaroEntry& e, std::uint32_t planes_per_die) {
    const GroupKey k{e.op, e.die, e.page};
    auto& seen = planes[k];
    if (seen.empty()) seen.assign(planes_per_die, false);
    if (e.plane < planes_per_die && !seen[e.plane]) {
      seen[e.plane] = true;
      const std::uint32_t c = ++count[k];
      auto& b = best[{e.op, e.die}];
      b = std::max(b, c);
    }
  }

  std::uint32_t depth_of(const FaroEntry& e, std::uint32_t dies) const {
    if (e.op == OpKind::kErase) return 1;
    auto it = count.find(GroupKey{e.op, e.die, e.page});
    std::uint32_t d = it == count.end() ? 1 : it->second;
    for (std::uint32_t die = 0; die < dies; ++die) {
      if (die == e.die) continue;
      auto b = best.find({e.op, die});
      if (b != best.end()) d += b->second;
    }
    return d;
  }
};

}  // namespace

std::vector<FaroPriority> faro_priorities(std::span<const FaroEntry> bucket, const Geometry& geometry) {
  GroupCounts all;
  std::map<std::uint64_t, GroupCounts> per_tag;
  for (const auto& e : bucket) {
    all.add(e, geometry.planes_per_die);
    per_tag[e.tag_order].add(e, geometry.planes_per_die);
  }
  std::vector<FaroPriority> out;
  out.reserve(bucket.size());
  for (const auto& e : bucket) {
    out.push_back(FaroPriority{all.depth_of(e, geometry.dies_per_chip),
                               per_tag.at(e.tag_order).depth_of(e, geometry.dies_per_chip)});
  }
  return out;
}

std::vector<MemId> faro_select(std::span<const FaroEntry> bucket, const Geometry& geometry,
                               std::size_t limit) {
  const auto prio = faro_priorities(bucket, geometry);
  std::vector<std::size_t> order(bucket.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = prio[a];
    const auto& pb = prio[b];
    if (pa.overlap_depth != pb.overlap_depth) return pa.overlap_depth > pb.overlap_depth;
    if (pa.connectivity != pb.connectivity) return pa.connectivity > pb.connectivity;
    if (bucket[a].tag_order != bucket[b].tag_order) return bucket[a].tag_order < bucket[b].tag_order;
    return bucket[a].id < bucket[b].id;
  });

  if (bucket.empty() || limit == 0) return {};
  // The lead is the top-ranked entry; its coalition is the batch.
  const std::size_t lead = order.front();
  const FaroEntry& e = bucket[lead];
  std::vector<std::size_t> coalition{lead};
  if (e.op != OpKind::kErase) {
    // Lead's own die: same page, distinct planes, best-ranked first.
    std::vector<bool> used(geometry.planes_per_die, false);
    used[e.plane] = true;
    for (std::size_t j : order) {
      const FaroEntry& f = bucket[j];
      if (j == lead || f.op != e.op || f.die != e.die || f.page != e.page || used[f.plane]) continue;
      used[f.plane] = true;
      coalition.push_back(j);
    }
    // Other dies: the page group with the most distinct planes; ties go to
    // the group whose best member ranks first.
    for (std::uint32_t die = 0; die < geometry.dies_per_chip; ++die) {
      if (die == e.die) continue;
      std::map<std::uint32_t, std::vector<std::size_t>> groups;  // page -> members
      std::map<std::uint32_t, std::vector<bool>> seen;
      std::vector<std::uint32_t> page_rank;  // pages in order of first appearance
      for (std::size_t j : order) {
        const FaroEntry& f = bucket[j];
        if (f.op != e.op || f.die != die) continue;
        auto& s = seen[f.page];
        if (s.empty()) {
          s.assign(geometry.planes_per_die, false);
          page_rank.push_back(f.page);
        }
        if (s[f.plane]) continue;
        s[f.plane] = true;
        groups[f.page].push_back(j);
      }
      const std::vector<std::size_t>* pick = nullptr;
      for (std::uint32_t page : page_rank) {
        const auto& g = groups[page];
        if (!pick || g.size() > pick->size()) pick = &g;
      }
      if (pick) coalition.insert(coalition.end(), pick->begin(), pick->end());
    }
  }
  // Keep the global rank order inside the coalition.
  std::vector<std::size_t> rank(bucket.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  std::sort(coalition.begin(), coalition.end(), [&](std::size_t x, std::size_t y) { return rank[x] < rank[y]; });
  if (coalition.size() > limit) coalition.resize(limit);
  std::vector<MemId> batch;
  for (std::size_t j : coalition) batch.push_back(bucket[j].id);
  return batch;
}

std::vector<MemId> hazard_filter(std::span<const MemId> batch,
                                 const std::function<std::span<const MemId>(MemId)>& hazard_reads,
                                 const std::function<bool(MemId)>& committed) {
  std::map<MemId, std::size_t> pos;
  for (std::size_t i = 0; i < batch.size(); ++i) pos[batch[i]] = i;

  // Sort key: a write sits just behind the last of its reads in the batch.
  std::vector<std::tuple<std::size_t, bool, std::size_t>> keyed;  // (anchor, moved, original index)
  keyed.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::size_t anchor = i;
    bool held = false;
    for (MemId r : hazard_reads(batch[i])) {
      auto it = pos.find(r);
      if (it != pos.end()) {
        anchor = std::max(anchor, it->second);
      } else if (!committed(r)) {
        held = true;
        break;
      }
    }
    if (!held) keyed.emplace_back(anchor, anchor != i, i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<MemId> out;
  out.reserve(keyed.size());
  for (const auto& [anchor, moved, i] : keyed) out.push_back(batch[i]);
  return out;
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kVas:
      return "vas";
    case PolicyKind::kPas:
      return "pas";
    case PolicyKind::kSpk1:
      return "spk1";
    case PolicyKind::kSpk2:
      return "spk2";
    case PolicyKind::kSpk3:
      return "spk3";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto k : {PolicyKind::kVas, PolicyKind::kPas, PolicyKind::kSpk1, PolicyKind::kSpk2,
                 PolicyKind::kSpk3}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown policy '" + std::string(name) + "' (expected vas|pas|spk1|spk2|spk3)");
}

namespace {

void commit_tag(SchedulingContext& ctx, const IORequest& t) {
  std::vector<MemId> ids;
  for (MemId id : t.mems) {
    const auto& m = ctx.mem(id);
    if (m.state == MemState::kPending && !m.unmapped) ids.push_back(id);
  }
  for (MemId id : ids) ctx.commit(id);
}

// Whole-I/O commitment in arrival order. With `skip` the scan passes over
// blocked I/Os instead of stopping at the first one.
void whole_io_step(SchedulingContext& ctx, bool skip) {
  std::vector<bool> claimed(ctx.geometry().total_chips(), false);
  const std::vector<TagId> tags = ctx.open_tags();
  for (TagId tid : tags) {
    const IORequest& t = ctx.tag(tid);
    const auto chips = ctx.tag_chips(tid);
    bool collide = false;
    for (ChipIndex c : chips) {
      if (claimed[c] || ctx.chip_has_work(c)) {
        collide = true;
        break;
      }
    }
    // A write may not pass an earlier read of the page it replaces.
    for (MemId id : t.mems) {
      if (collide) break;
      for (MemId r : ctx.mem(id).hazard_reads) {
        if (!ctx.committed(r) && ctx.mem(r).tag != tid) {
          collide = true;
          break;
        }
      }
    }
    if (collide) {
      if (skip) continue;
      return;
    }
    commit_tag(ctx, t);
    for (ChipIndex c : chips) claimed[c] = true;
  }
}

// Candidates for one chip. A write still waiting on an uncommitted read can
// never share a batch with it (batches are single-op), so it sits out.
std::vector<FaroEntry> bucket_entries(SchedulingContext& ctx, ChipIndex chip) {
  std::vector<FaroEntry> out;
  for (MemId id : ctx.layout().bucket(chip)) {
    const auto& m = ctx.mem(id);
    if (std::any_of(m.hazard_reads.begin(), m.hazard_reads.end(),
                    [&](MemId r) { return !ctx.committed(r); })) {
      continue;
    }
    out.push_back(FaroEntry{id, m.op, ctx.tag_order(m.tag), m.sched.die, m.sched.plane, m.sched.page});
  }
  return out;
}

std::vector<MemId> guard(SchedulingContext& ctx, const std::vector<MemId>& batch) {
  return hazard_filter(
      batch,
      [&](MemId id) { return std::span<const MemId>(ctx.mem(id).hazard_reads); },
      [&](MemId id) { return ctx.committed(id); });
}

void commit_all(SchedulingContext& ctx, const std::vector<MemId>& ids) {
  for (MemId id : ids) ctx.commit(id);
}

class VasPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::kVas; }
  bool uses_readdressing() const override { return false; }
  void step(SchedulingContext& ctx) override { vas_step(ctx); }
};

class PasPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::kPas; }
  bool uses_readdressing() const override { return false; }
  void step(SchedulingContext& ctx) override { whole_io_step(ctx, true); }
};

// Oldest entries of a bucket, stopping at the first one that would not fit
// in the same transaction.
std::vector<MemId> fifo_prefix(const std::vector<FaroEntry>& bucket, const Geometry& g, std::size_t limit) {
  std::vector<MemId> out;
  std::vector<std::optional<std::uint32_t>> die_page(g.dies_per_chip);
  std::vector<std::uint32_t> planes(g.dies_per_chip, 0);
  for (const FaroEntry& e : bucket) {
    if (out.size() >= limit) break;
    if (!out.empty() && e.op != bucket.front().op) break;
    if (die_page[e.die] && (*die_page[e.die] != e.page || (planes[e.die] >> e.plane & 1u))) break;
    die_page[e.die] = e.page;
    planes[e.die] |= 1u << e.plane;
    out.push_back(e.id);
  }
  return out;
}

// Chip-driven commitment: visit chips with pending work in traversal order
// and hand each idle chip its next batch.
class ChipDrivenPolicy final : public Policy {
 public:
  explicit ChipDrivenPolicy(PolicyKind k) : kind_(k) {}
  PolicyKind kind() const override { return kind_; }
  bool uses_readdressing() const override { return true; }

  void step(SchedulingContext& ctx) override {
    const std::size_t limit = ctx.geometry().max_txn_members();
    const std::vector<ChipIndex> chips(ctx.layout().nonempty().begin(), ctx.layout().nonempty().end());
    for (ChipIndex c : chips) {
      if (ctx.chip_has_work(c)) continue;
      std::vector<MemId> batch;
      if (kind_ == PolicyKind::kSpk3) {
        batch = faro_select(bucket_entries(ctx, c), ctx.geometry(), limit);
      } else {
        batch = fifo_prefix(bucket_entries(ctx, c), ctx.geometry(), limit);
      }
      commit_all(ctx, guard(ctx, batch));
    }
  }

 private:
  PolicyKind kind_;
};

// Arrival-order I/O walk; each chip an I/O touches gets a FARO batch when
// the chip is idle. Stops at the first I/O that is left incomplete.
class Spk1Policy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::kSpk1; }
  bool uses_readdressing() const override { return true; }

  void step(SchedulingContext& ctx) override {
    const std::size_t limit = ctx.geometry().max_txn_members();
    const std::vector<TagId> tags = ctx.open_tags();
    for (TagId tid : tags) {
      const std::vector<ChipIndex> chips = ctx.tag_chips(tid);
      for (ChipIndex c : chips) {
        if (ctx.chip_has_work(c) || ctx.layout().bucket(c).empty()) continue;
        commit_all(ctx, guard(ctx, faro_select(bucket_entries(ctx, c), ctx.geometry(), limit)));
      }
      if (!ctx.tag_chips(tid).empty()) return;
    }
  }
};

}  // namespace

void vas_step(SchedulingContext& ctx) { whole_io_step(ctx, false); }

std::unique_ptr<Policy> make_policy(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kVas:
      return std::make_unique<VasPolicy>();
    case PolicyKind::kPas:
      return std::make_unique<PasPolicy>();
    case PolicyKind::kSpk1:
      return std::make_unique<Spk1Policy>();
    case PolicyKind::kSpk2:
    case PolicyKind::kSpk3:
      return std::make_unique<ChipDrivenPolicy>(kind);
  }
  throw ConfigError("unknown policy");
}

}  // namespace sprinkler
