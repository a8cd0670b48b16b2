#include "sprinkler/ftl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sprinkler {

void GcConfig::validate() const {
  if (!(free_block_threshold > 0.0 && free_block_threshold < 1.0)) {
    throw ConfigError("ftl: gc threshold must be in (0, 1)");
  }
  if (!(precondition_fill >= 0.0 && precondition_fill <= 1.0)) {
    throw ConfigError("ftl: precondition fill must be in [0, 1]");
  }
}

void FtlConfig::validate() const {
  if (!(export_fraction > 0.0 && export_fraction <= 1.0)) {
    throw ConfigError("ftl: export fraction must be in (0, 1]");
  }
  gc.validate();
}

std::vector<Migration> crossing_migrations(std::span<const Migration> migrations) {
  std::vector<Migration> out;
  for (const auto& m : migrations) {
    if (!m.from.same_resource(m.to)) out.push_back(m);
  }
  return out;
}

Ftl::Ftl(const Geometry& geometry, const FtlConfig& config) : geometry_(geometry), config_(config) {
  geometry_.validate();
  config_.validate();
  const std::uint64_t raw = geometry_.raw_pages();
  const auto exported = static_cast<std::uint64_t>(std::floor(static_cast<double>(raw) * config_.export_fraction));
  fwd_.assign(exported, kUnmapped);
  rev_.assign(raw, kFreePage);
  const std::size_t planes = std::size_t{geometry_.total_chips()} * geometry_.dies_per_chip *
                             geometry_.planes_per_die;
  blocks_.assign(planes * geometry_.blocks_per_plane(), Block{});
  planes_.resize(planes);
  for (auto& p : planes_) {
    for (std::uint32_t b = 0; b < geometry_.blocks_per_plane(); ++b) p.free_blocks.push_back(b);
  }
  die_free_blocks_.assign(std::size_t{geometry_.total_chips()} * geometry_.dies_per_chip,
                          geometry_.blocks_per_die);
  gc_free_target_ = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::ceil(config_.gc.free_block_threshold * geometry_.blocks_per_die)));
}

PhysicalAddress Ftl::stripe_target(std::uint64_t vpage) const {
  const Geometry& g = geometry_;
  PhysicalAddress a;
  a.channel = static_cast<std::uint32_t>(vpage % g.num_channels);
  vpage /= g.num_channels;
  a.chip = static_cast<std::uint32_t>(vpage % g.chips_per_channel);
  vpage /= g.chips_per_channel;
  a.die = static_cast<std::uint32_t>(vpage % g.dies_per_chip);
  vpage /= g.dies_per_chip;
  a.plane = static_cast<std::uint32_t>(vpage % g.planes_per_die);
  return a;
}

std::optional<PhysicalAddress> Ftl::lookup(std::uint64_t vpage) const {
  if (vpage >= fwd_.size()) throw std::out_of_range("vpage beyond exported capacity");
  if (fwd_[vpage] == kUnmapped) return std::nullopt;
  return unpack(fwd_[vpage], geometry_);
}

PhysicalAddress Ftl::translate(std::uint64_t vpage) const {
  auto a = lookup(vpage);
  if (!a) throw UnmappedRead("read of never-written page " + std::to_string(vpage));
  return *a;
}

std::uint64_t Ftl::plane_free_pages(std::size_t pid) const {
  const Plane& p = planes_[pid];
  std::uint64_t n = std::uint64_t{p.free_blocks.size()} * geometry_.pages_per_block;
  if (p.active >= 0) {
    const Block& b = blocks_[pid * geometry_.blocks_per_plane() + static_cast<std::size_t>(p.active)];
    n += geometry_.pages_per_block - b.write_ptr;
  }
  return n;
}

std::optional<PhysicalAddress> Ftl::allocate_in_plane(ChipIndex chip, std::uint32_t die,
                                                      std::uint32_t plane) {
  const std::size_t pid = plane_id(chip, die, plane);
  Plane& p = planes_[pid];
  if (p.active < 0) {
    if (p.free_blocks.empty()) return std::nullopt;
    p.active = p.free_blocks.front();
    p.free_blocks.pop_front();
    --die_free_blocks_[die_id(chip, die)];
    blocks_[pid * geometry_.blocks_per_plane() + static_cast<std::size_t>(p.active)].state =
        BlockState::kOpen;
  }
  Block& b = blocks_[pid * geometry_.blocks_per_plane() + static_cast<std::size_t>(p.active)];
  PhysicalAddress a;
  a.channel = geometry_.channel_of(chip);
  a.chip = geometry_.offset_of(chip);
  a.die = die;
  a.plane = plane;
  a.block = static_cast<std::uint32_t>(p.active);
  a.page = b.write_ptr++;
  if (b.write_ptr == geometry_.pages_per_block) {
    b.state = BlockState::kFull;
    p.active = -1;
  }
  return a;
}

PhysicalAddress Ftl::allocate_in_die(ChipIndex chip, std::uint32_t die, std::uint32_t preferred) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    for (std::uint32_t i = 0; i < geometry_.planes_per_die; ++i) {
      const std::uint32_t plane = (preferred + i) % geometry_.planes_per_die;
      if (auto a = allocate_in_plane(chip, die, plane)) return *a;
    }
    if (attempt == 0 && !in_gc_) run_gc(chip, die);
  }
  throw CapacityExhausted("no free page left on chip " + std::to_string(chip) + " die " +
                          std::to_string(die));
}

PhysicalAddress Ftl::allocate_for_migration(ChipIndex chip, std::uint32_t die) {
  std::uint32_t best = 0;
  std::uint64_t best_free = 0;
  for (std::uint32_t p = 0; p < geometry_.planes_per_die; ++p) {
    const std::uint64_t f = plane_free_pages(plane_id(chip, die, p));
    if (f > best_free) {
      best_free = f;
      best = p;
    }
  }
  if (best_free == 0) {
    throw CapacityExhausted("garbage collection ran out of destination pages");
  }
  return *allocate_in_plane(chip, die, best);
}

void Ftl::invalidate(const PhysicalAddress& a) {
  const std::uint64_t pp = pack(a, geometry_);
  if (rev_[pp] >= kInvalidPage) throw std::logic_error("invalidating a page that is not valid");
  rev_[pp] = kInvalidPage;
  --blocks_[block_id(a)].valid;
}

void Ftl::bind(std::uint64_t vpage, const PhysicalAddress& a) {
  if (fwd_[vpage] != kUnmapped) {
    invalidate(unpack(fwd_[vpage], geometry_));
  } else {
    ++mapped_;
  }
  const std::uint64_t pp = pack(a, geometry_);
  if (rev_[pp] != kFreePage) throw std::logic_error("binding to a page that is not free");
  fwd_[vpage] = static_cast<std::uint32_t>(pp);
  rev_[pp] = static_cast<std::uint32_t>(vpage);
  ++blocks_[block_id(a)].valid;
}

bool Ftl::needs_gc(ChipIndex chip, std::uint32_t die) const {
  return die_free_blocks_[die_id(chip, die)] < gc_free_target_;
}

std::uint32_t Ftl::free_blocks(ChipIndex chip, std::uint32_t die) const {
  return die_free_blocks_[die_id(chip, die)];
}

void Ftl::ensure_space(ChipIndex chip, std::uint32_t die) {
  if (in_gc_) return;
  // Bounded so one write cannot stall on an arbitrarily long reclaim chain.
  for (int i = 0; i < 8 && needs_gc(chip, die); ++i) {
    if (!run_gc(chip, die)) break;
  }
}

PreprocessedPage Ftl::write(std::uint64_t vpage) {
  if (vpage >= fwd_.size()) throw std::out_of_range("vpage beyond exported capacity");
  PreprocessedPage out;
  out.vpage = vpage;
  out.replaced = lookup(vpage);
  const PhysicalAddress want = stripe_target(vpage);
  const ChipIndex chip = want.chip_index(geometry_);
  ensure_space(chip, want.die);
  const PhysicalAddress a = allocate_in_die(chip, want.die, want.plane);
  // GC above may have moved the page this write replaces; it is rebound
  // regardless, so report where the stale copy lives now.
  out.replaced = lookup(vpage);
  bind(vpage, a);
  out.target = a;
  return out;
}

PhysicalAddress Ftl::place(std::uint64_t vpage, ChipIndex chip, std::uint32_t die, std::uint32_t plane) {
  if (vpage >= fwd_.size()) throw std::out_of_range("vpage beyond exported capacity");
  if (chip >= geometry_.total_chips() || die >= geometry_.dies_per_chip || plane >= geometry_.planes_per_die) {
    throw std::out_of_range("place: address outside the geometry");
  }
  auto a = allocate_in_plane(chip, die, plane);
  if (!a) throw CapacityExhausted("place: plane is full");
  bind(vpage, *a);
  return *a;
}

std::vector<PreprocessedPage> Ftl::preprocess(IoKind kind, std::uint64_t offset, std::uint64_t length) {
  if (length == 0) throw std::invalid_argument("preprocess: zero-length request");
  const std::uint64_t first = offset / geometry_.page_size;
  const std::uint64_t last = (offset + length - 1) / geometry_.page_size;
  if (last >= fwd_.size()) throw std::out_of_range("preprocess: range exceeds exported capacity");
  std::vector<PreprocessedPage> out;
  out.reserve(last - first + 1);
  for (std::uint64_t v = first; v <= last; ++v) {
    if (kind == IoKind::kRead) {
      PreprocessedPage p;
      p.vpage = v;
      if (auto a = lookup(v)) {
        p.target = *a;
      } else {
        p.unmapped = true;
        p.target = stripe_target(v);
      }
      out.push_back(p);
    } else {
      out.push_back(write(v));
    }
  }
  if (kind == IoKind::kWrite) {
    // A later page's allocation may have garbage-collected an earlier one.
    for (auto& p : out) p.target = translate(p.vpage);
  }
  return out;
}

std::optional<MigrationReport> Ftl::run_gc(ChipIndex chip, std::uint32_t die) {
  const std::uint32_t bpp = geometry_.blocks_per_plane();
  std::int64_t best = -1;
  std::uint32_t best_invalid = 0;
  for (std::uint32_t plane = 0; plane < geometry_.planes_per_die; ++plane) {
    const std::size_t base = plane_id(chip, die, plane) * bpp;
    for (std::uint32_t b = 0; b < bpp; ++b) {
      const Block& blk = blocks_[base + b];
      if (blk.state != BlockState::kFull || blk.pins > 0) continue;
      const std::uint32_t invalid = geometry_.pages_per_block - blk.valid;
      if (invalid > best_invalid) {
        best_invalid = invalid;
        best = static_cast<std::int64_t>(base + b);
      }
    }
  }
  if (best < 0) {
    if (die_free_blocks_[die_id(chip, die)] > 0) return std::nullopt;
    bool any_pinned = false;
    for (std::uint32_t plane = 0; plane < geometry_.planes_per_die; ++plane) {
      const std::size_t base = plane_id(chip, die, plane) * bpp;
      for (std::uint32_t b = 0; b < bpp; ++b) any_pinned |= blocks_[base + b].pins > 0;
    }
    if (any_pinned) return std::nullopt;
    throw CapacityExhausted("garbage collection found no reclaimable block on chip " +
                            std::to_string(chip) + " die " + std::to_string(die));
  }

  const std::size_t victim_id = static_cast<std::size_t>(best);
  // Moving the victim's data must not itself run out of room midway.
  std::uint64_t room = 0;
  for (std::uint32_t plane = 0; plane < geometry_.planes_per_die; ++plane) {
    room += plane_free_pages(plane_id(chip, die, plane));
  }
  if (blocks_[victim_id].valid > room) return std::nullopt;

  MigrationReport rep;
  rep.chip = chip;
  rep.die = die;
  const std::size_t pid = victim_id / bpp;
  rep.victim.channel = geometry_.channel_of(chip);
  rep.victim.chip = geometry_.offset_of(chip);
  rep.victim.die = die;
  rep.victim.plane = static_cast<std::uint32_t>(pid % geometry_.planes_per_die);
  rep.victim.block = static_cast<std::uint32_t>(victim_id % bpp);

  in_gc_ = true;
  for (std::uint32_t pg = 0; pg < geometry_.pages_per_block; ++pg) {
    PhysicalAddress from = rep.victim;
    from.page = pg;
    const std::uint32_t v = rev_[pack(from, geometry_)];
    if (v >= kInvalidPage) continue;
    const PhysicalAddress to = allocate_for_migration(chip, die);
    bind(v, to);
    rep.migrations.push_back(Migration{v, from, to});
  }
  in_gc_ = false;

  Block& victim = blocks_[victim_id];
  if (victim.valid != 0) throw std::logic_error("gc victim still holds valid pages");
  for (std::uint32_t pg = 0; pg < geometry_.pages_per_block; ++pg) {
    PhysicalAddress a = rep.victim;
    a.page = pg;
    rev_[pack(a, geometry_)] = kFreePage;
  }
  victim.write_ptr = 0;
  victim.state = BlockState::kFree;
  planes_[pid].free_blocks.push_back(rep.victim.block);
  ++die_free_blocks_[die_id(chip, die)];

  ++gc_runs_;
  gc_migrations_ += rep.migrations.size();
  if (callback_) {
    auto crossing = crossing_migrations(rep.migrations);
    if (!crossing.empty()) callback_(crossing);
  }
  reports_.push_back(rep);
  return rep;
}

std::vector<MigrationReport> Ftl::take_gc_reports() {
  std::vector<MigrationReport> out;
  out.swap(reports_);
  return out;
}

void Ftl::pin(const PhysicalAddress& a) { ++blocks_[block_id(a)].pins; }

void Ftl::unpin(const PhysicalAddress& a) {
  Block& b = blocks_[block_id(a)];
  if (b.pins == 0) throw std::logic_error("unpin of an unpinned block");
  --b.pins;
}

void Ftl::precondition_sequential(double fraction) {
  const auto n = static_cast<std::uint64_t>(std::floor(fraction * static_cast<double>(fwd_.size())));
  for (std::uint64_t v = 0; v < n; ++v) write(v);
}

void Ftl::precondition_random(double fill, std::uint64_t io_bytes, std::uint64_t seed) {
  const std::uint64_t chunk = std::max<std::uint64_t>(1, io_bytes / geometry_.page_size);
  const std::uint64_t chunks = std::max<std::uint64_t>(1, fwd_.size() / chunk);
  const auto want = static_cast<std::uint64_t>(std::ceil(fill * static_cast<double>(fwd_.size())));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, chunks - 1);
  // Coverage of random chunks converges geometrically; the cap only guards
  // against fill targets that chunk alignment cannot reach.
  const std::uint64_t max_ios = 64 * chunks + 64;
  for (std::uint64_t i = 0; i < max_ios && mapped_ < want; ++i) {
    const std::uint64_t start = pick(rng) * chunk;
    const std::uint64_t end = std::min<std::uint64_t>(start + chunk, fwd_.size());
    for (std::uint64_t v = start; v < end; ++v) write(v);
  }
}

Ftl::PageState Ftl::page_state(const PhysicalAddress& a) const {
  const std::uint32_t r = rev_[pack(a, geometry_)];
  if (r == kFreePage) return PageState::kFree;
  if (r == kInvalidPage) return PageState::kInvalid;
  return PageState::kValid;
}

std::uint32_t Ftl::valid_pages(const PhysicalAddress& block_addr) const {
  return blocks_[block_id(block_addr)].valid;
}

void Ftl::audit() const {
  auto fail = [](const std::string& what) { throw std::logic_error("ftl audit: " + what); };
  std::uint64_t mapped = 0;
  for (std::uint64_t v = 0; v < fwd_.size(); ++v) {
    if (fwd_[v] == kUnmapped) continue;
    ++mapped;
    if (fwd_[v] >= rev_.size() || rev_[fwd_[v]] != v) {
      fail("forward map of vpage " + std::to_string(v) + " not mirrored by reverse map");
    }
  }
  if (mapped != mapped_) fail("mapped page counter mismatch");

  const std::uint32_t bpp = geometry_.blocks_per_plane();
  const std::uint32_t ppb = geometry_.pages_per_block;
  std::vector<std::uint32_t> die_free(die_free_blocks_.size(), 0);
  for (std::size_t pid = 0; pid < planes_.size(); ++pid) {
    const Plane& plane = planes_[pid];
    std::vector<int> in_free_list(bpp, 0);
    for (std::uint32_t b : plane.free_blocks) ++in_free_list[b];
    for (std::uint32_t b = 0; b < bpp; ++b) {
      const Block& blk = blocks_[pid * bpp + b];
      std::uint32_t valid = 0;
      for (std::uint32_t pg = 0; pg < ppb; ++pg) {
        const std::uint64_t pp = (std::uint64_t{pid} * bpp + b) * ppb + pg;
        const std::uint32_t r = rev_[pp];
        if (pg >= blk.write_ptr && r != kFreePage) fail("page above write pointer is not free");
        if (pg < blk.write_ptr && r == kFreePage) fail("page below write pointer is free");
        if (r < kInvalidPage) {
          ++valid;
          if (r >= fwd_.size() || fwd_[r] != pp) fail("reverse map entry not mirrored by forward map");
        }
      }
      if (valid != blk.valid) fail("block valid counter mismatch");
      const bool is_free = blk.state == BlockState::kFree;
      if (is_free != (in_free_list[b] == 1) || in_free_list[b] > 1) fail("free list mismatch");
      if (is_free && (blk.write_ptr != 0 || blk.valid != 0)) fail("free block holds data");
      if (blk.state == BlockState::kOpen && plane.active != static_cast<std::int64_t>(b)) {
        fail("open block is not the plane's active block");
      }
      if (is_free) ++die_free[pid / geometry_.planes_per_die];
    }
  }
  if (die_free != die_free_blocks_) fail("per-die free block counter mismatch");
}

}  // namespace sprinkler
