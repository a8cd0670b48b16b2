#pragma once

#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "sprinkler/request.hpp"
#include "sprinkler/types.hpp"

namespace sprinkler {

// Pending (uncommitted) host memory requests bucketed by the chip the
// scheduler believes they target. Memory request ids grow with acceptance
// order, so each bucket iterates in arrival order.
class LayoutIndex {
 public:
  explicit LayoutIndex(std::uint32_t chips = 0) : buckets_(chips) {}

  void insert(ChipIndex chip, MemId id);
  void erase(ChipIndex chip, MemId id);
  void move(MemId id, ChipIndex from, ChipIndex to);

  const std::set<MemId>& bucket(ChipIndex chip) const { return buckets_.at(chip); }
  // Chips with pending work, ascending.
  const std::set<ChipIndex>& nonempty() const { return nonempty_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint32_t chips() const { return static_cast<std::uint32_t>(buckets_.size()); }

 private:
  std::vector<std::set<MemId>> buckets_;
  std::set<ChipIndex> nonempty_;
  std::size_t size_ = 0;
};

// One full resource-driven visit: every channel at chip offset 0, then every
// channel at offset 1, and so on.
std::vector<ChipIndex> rios_traverse(const Geometry& geometry);

struct FaroEntry {
  MemId id = 0;
  OpKind op = OpKind::kRead;
  std::uint64_t tag_order = 0;  // arrival rank of the owning tag
  std::uint32_t die = 0;
  std::uint32_t plane = 0;
  std::uint32_t page = 0;  // page offset within the block
};

struct FaroPriority {
  std::uint32_t overlap_depth = 1;
  std::uint32_t connectivity = 1;

  bool operator==(const FaroPriority&) const = default;
};

// Overlap depth of an entry: size of the largest legal transaction (same
// operation; per die one page offset and distinct planes) that contains it.
// Connectivity: the most members of the entry's own tag any such
// transaction can hold.
std::vector<FaroPriority> faro_priorities(std::span<const FaroEntry> bucket, const Geometry& geometry);

// Ranks the bucket by (overlap depth desc, connectivity desc, tag order asc,
// id asc) and returns the largest legal coalition around the top-ranked
// entry, capped at `limit` and listed in rank order. It can mix I/Os.
std::vector<MemId> faro_select(std::span<const FaroEntry> bucket, const Geometry& geometry,
                               std::size_t limit);

// Write-after-read control. `hazard_reads(w)` lists the earlier reads of the
// page a write replaces; reads that are neither committed nor in the batch
// hold the write back, and a write whose reads are in the batch is moved
// behind them.
std::vector<MemId> hazard_filter(std::span<const MemId> batch,
                                 const std::function<std::span<const MemId>(MemId)>& hazard_reads,
                                 const std::function<bool(MemId)>& committed);

// The engine's view as seen by a policy.
class SchedulingContext {
 public:
  virtual ~SchedulingContext() = default;

  virtual const Geometry& geometry() const = 0;
  // Accepted tags that still have uncommitted memory requests, in arrival order.
  virtual const std::vector<TagId>& open_tags() const = 0;
  virtual const IORequest& tag(TagId id) const = 0;
  virtual const MemoryRequest& mem(MemId id) const = 0;
  virtual const LayoutIndex& layout() const = 0;
  // Distinct chips (scheduler view) of a tag's uncommitted requests, ascending.
  virtual const std::vector<ChipIndex>& tag_chips(TagId id) = 0;
  // The chip is executing, forming a transaction, or has committed work queued.
  virtual bool chip_has_work(ChipIndex chip) const = 0;
  // Committed requests not yet taken into a transaction.
  virtual std::size_t controller_queued(ChipIndex chip) const = 0;
  virtual std::uint64_t tag_order(TagId id) const = 0;
  // Committed at some point (queued, executing, or finished).
  virtual bool committed(MemId id) const = 0;
  virtual void commit(MemId id) = 0;
};

enum class PolicyKind : std::uint8_t { kVas, kPas, kSpk1, kSpk2, kSpk3 };

std::string_view to_string(PolicyKind k);
PolicyKind parse_policy(std::string_view name);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  std::string_view name() const { return to_string(kind()); }
  // Sprinkler variants keep their layout view current through the FTL's
  // readdressing callback; VAS and PAS do not.
  virtual bool uses_readdressing() const = 0;
  virtual void step(SchedulingContext& ctx) = 0;
};

std::unique_ptr<Policy> make_policy(PolicyKind kind);

// In-order, whole-I/O commitment shared by VAS and by every policy while a
// force-unit-access request is outstanding.
void vas_step(SchedulingContext& ctx);

}  // namespace sprinkler
