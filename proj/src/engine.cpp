#include "sprinkler/engine.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <queue>
#include <unordered_map>

namespace sprinkler {

std::string_view to_string(ArrivalMode m) { return m == ArrivalMode::kTrace ? "trace" : "back_to_back"; }

ArrivalMode parse_arrival_mode(std::string_view s) {
  if (s == "trace") return ArrivalMode::kTrace;
  if (s == "back_to_back") return ArrivalMode::kBackToBack;
  throw ConfigError("unknown arrival mode '" + std::string(s) + "' (expected trace|back_to_back)");
}

std::string_view to_string(Precondition::Mode m) {
  switch (m) {
    case Precondition::Mode::kNone:
      return "none";
    case Precondition::Mode::kSequential:
      return "sequential";
    case Precondition::Mode::kRandom:
      return "random";
  }
  return "?";
}

Precondition::Mode parse_precondition_mode(std::string_view s) {
  for (auto m : {Precondition::Mode::kNone, Precondition::Mode::kSequential, Precondition::Mode::kRandom}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown precondition mode '" + std::string(s) + "'");
}

void SimConfig::validate() const {
  geometry.validate();
  timing.validate();
  ftl.validate();
  if (queue_depth == 0) throw ConfigError("queue depth must be at least 1");
  if (!(precondition.fill >= 0.0 && precondition.fill <= 1.0)) {
    throw ConfigError("precondition fill must be in [0, 1]");
  }
  if (precondition.io_bytes == 0) throw ConfigError("precondition io size must be positive");
  for (const Placement& p : precondition.layout) {
    if (p.chip >= geometry.total_chips() || p.die >= geometry.dies_per_chip || p.plane >= geometry.planes_per_die) {
      throw ConfigError("layout: placement of page " + std::to_string(p.vpage) + " is outside the geometry");
    }
  }
}

namespace {

enum class EventKind : std::uint8_t { kArrival, kWindow, kTxnEnd };

struct Event {
  SimTime time;
  std::uint64_t seq;
  EventKind kind;
  ChipIndex chip;

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    return seq > o.seq;
  }
};

struct Controller {
  std::deque<MemId> queue;
  bool forming = false;
  bool executing = false;
  TransactionRecord txn;
};

// Physical replay of one garbage-collection run.
struct GcJob {
  PhysicalAddress victim;
  std::uint32_t reads_left = 0;
};

}  // namespace

class Engine::Impl final : public SchedulingContext {
 public:
  Impl(const SimConfig& config, std::vector<TraceRecord> workload)
      : cfg_(config),
        records_(std::move(workload)),
        ftl_((config.validate(), config.geometry), config.ftl),
        policy_(make_policy(config.policy)),
        bus_(config.geometry.num_channels),
        chips_(config.geometry.total_chips(), ChipState(config.geometry.dies_per_chip)),
        controllers_(config.geometry.total_chips()),
        layout_(config.geometry.total_chips()),
        metrics_(config.geometry.total_chips()) {}

  Ftl& ftl() { return ftl_; }
  void set_observer(EngineObserver* o) { observer_ = o; }

  MetricsReport run(const MetricsReport* baseline) {
    if (ran_) throw std::logic_error("engine: run() called twice");
    ran_ = true;
    prepare();

    settle();
    std::uint64_t dispatched = 0;
    while (!events_.empty()) {
      const SimTime t = events_.top().time;
      if (t < now_) throw std::logic_error("engine: event scheduled in the past");
      metrics_.advance(t, busy_chips_, pending_host_ > 0);
      now_ = t;
      while (!events_.empty() && events_.top().time == t) {
        const Event e = events_.top();
        events_.pop();
        dispatch(e);
        if (++dispatched % 4096 == 0) bus_.prune(now_);
      }
      settle();
    }
    if (next_record_ < records_.size() || !tags_.empty()) {
      throw SimulationError("engine: no further progress possible with " + std::to_string(tags_.size()) +
                            " requests outstanding");
    }
    metrics_.gc(ftl_.gc_runs() - gc_runs_base_, ftl_.gc_migrations() - gc_migrations_base_);
    return finalize(metrics_, std::string(to_string(cfg_.policy)), workload_digest(records_), baseline);
  }

  // SchedulingContext
  const Geometry& geometry() const override { return cfg_.geometry; }
  const std::vector<TagId>& open_tags() const override { return open_tags_; }
  const IORequest& tag(TagId id) const override { return tags_.at(id); }
  const MemoryRequest& mem(MemId id) const override { return mems_.at(id); }
  const LayoutIndex& layout() const override { return layout_; }

  const std::vector<ChipIndex>& tag_chips(TagId id) override {
    auto it = chip_cache_.find(id);
    if (it != chip_cache_.end()) return it->second;
    std::vector<ChipIndex> chips;
    for (MemId m : tags_.at(id).mems) {
      const auto& r = mems_.at(m);
      if (r.state == MemState::kPending && !r.unmapped) chips.push_back(r.sched.chip_index(cfg_.geometry));
    }
    std::sort(chips.begin(), chips.end());
    chips.erase(std::unique(chips.begin(), chips.end()), chips.end());
    return chip_cache_.emplace(id, std::move(chips)).first->second;
  }

  bool chip_has_work(ChipIndex c) const override {
    const auto& k = controllers_[c];
    return k.forming || k.executing || !k.queue.empty();
  }
  std::size_t controller_queued(ChipIndex c) const override { return controllers_[c].queue.size(); }
  std::uint64_t tag_order(TagId id) const override { return id; }

  bool committed(MemId id) const override {
    auto it = mems_.find(id);
    return it == mems_.end() || it->second.state != MemState::kPending;
  }

  void commit(MemId id) override {
    MemoryRequest& m = mems_.at(id);
    if (m.state != MemState::kPending || m.unmapped || m.tag == kNoTag) {
      throw std::logic_error("engine: commit of a request that is not pending");
    }
    m.state = MemState::kCommitted;
    layout_.erase(m.sched.chip_index(cfg_.geometry), id);
    if (m.op == OpKind::kRead) {
      unindex_read(m);
      if (!m.pinned) {
        ftl_.pin(m.target);
        m.pinned = true;
      }
    }
    IORequest& t = tags_.at(m.tag);
    t.bitmap.set(m.index_in_tag);
    chip_cache_.erase(t.id);
    if (--t.uncommitted == 0) open_tags_.erase(std::find(open_tags_.begin(), open_tags_.end(), t.id));
    const ChipIndex chip = m.target.chip_index(cfg_.geometry);
    controllers_[chip].queue.push_back(id);
    touched_.push_back(chip);
    if (observer_) observer_->on_commit(m, now_);
  }

 private:
  void prepare() {
    switch (cfg_.precondition.mode) {
      case Precondition::Mode::kNone:
        break;
      case Precondition::Mode::kSequential:
        ftl_.precondition_sequential(cfg_.precondition.fill);
        break;
      case Precondition::Mode::kRandom:
        ftl_.precondition_random(cfg_.precondition.fill, cfg_.precondition.io_bytes, cfg_.precondition.seed);
        break;
    }
    for (const Placement& p : cfg_.precondition.layout) {
      if (p.vpage >= ftl_.exported_pages()) {
        throw ConfigError("layout: page " + std::to_string(p.vpage) + " is beyond the exported capacity");
      }
      ftl_.place(p.vpage, p.chip, p.die, p.plane);
    }
    ftl_.take_gc_reports();
    gc_runs_base_ = ftl_.gc_runs();
    gc_migrations_base_ = ftl_.gc_migrations();
    if (cfg_.readdressing && policy_->uses_readdressing()) {
      ftl_.set_readdressing_callback([this](std::span<const Migration> moved) { readdress(moved); });
    }
    for (std::size_t i = 1; i < records_.size(); ++i) {
      if (records_[i].time < records_[i - 1].time) throw ConfigError("workload timestamps are not sorted");
    }
  }

  void push(SimTime t, EventKind kind, ChipIndex chip = 0) { events_.push(Event{t, seq_++, kind, chip}); }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::kArrival:
        arrival_pending_ = false;
        break;
      case EventKind::kWindow:
        compose(e.chip);
        break;
      case EventKind::kTxnEnd:
        finish(e.chip);
        break;
    }
    step_needed_ = true;
  }

  // Host admission, one policy step, then controllers that received work.
  void settle() {
    admit();
    if (step_needed_) {
      step_needed_ = false;
      if (fua_outstanding_ > 0) {
        vas_step(*this);
      } else {
        policy_->step(*this);
      }
    }
    for (ChipIndex c : touched_) kick(c);
    touched_.clear();
  }

  void admit() {
    while (next_record_ < records_.size()) {
      const TraceRecord& r = records_[next_record_];
      const SimTime due = cfg_.arrival == ArrivalMode::kBackToBack ? 0 : r.time;
      if (due > now_) {
        if (!arrival_pending_) {
          push(due, EventKind::kArrival);
          arrival_pending_ = true;
        }
        return;
      }
      if (tags_.size() >= cfg_.queue_depth) {
        if (!blocked_since_) blocked_since_ = now_;
        return;
      }
      if (blocked_since_) {
        metrics_.host_blocked(*blocked_since_, now_);
        blocked_since_.reset();
      }
      accept(r);
      ++next_record_;
      step_needed_ = true;
    }
  }

  void accept(const TraceRecord& r) {
    const Geometry& g = cfg_.geometry;
    const std::uint64_t cap = ftl_.exported_pages();
    const std::uint64_t first = r.offset / g.page_size;
    const std::uint64_t npages = (r.offset + r.length - 1) / g.page_size - first + 1;
    if (npages > cap) throw ConfigError("request larger than the exported capacity");
    // Traces come from larger volumes; wrap into the exported space.
    std::uint64_t start = first % cap;
    if (start + npages > cap) start = cap - npages;
    const std::uint64_t offset = start * g.page_size + r.offset % g.page_size;

    const TagId tid = next_tag_++;
    IORequest& t = tags_[tid];
    t.id = tid;
    t.arrival_time = now_;
    t.kind = r.kind;
    t.offset = offset;
    t.length = r.length;
    t.fua = r.fua;
    if (t.fua) ++fua_outstanding_;

    const auto pages = ftl_.preprocess(r.kind, offset, r.length);
    replay_gc();

    t.bitmap = CompletionBitmap(static_cast<std::uint32_t>(pages.size()));
    t.page_done.assign(pages.size(), false);
    t.mems.reserve(pages.size());
    std::uint64_t flash = 0;
    for (std::uint32_t i = 0; i < pages.size(); ++i) {
      const auto& p = pages[i];
      const MemId id = next_mem_++;
      MemoryRequest& m = mems_[id];
      m.id = id;
      m.tag = tid;
      m.index_in_tag = i;
      m.op = op_for(r.kind);
      m.vpage = p.vpage;
      m.target = p.target;
      m.sched = p.target;
      m.unmapped = p.unmapped;
      t.mems.push_back(id);
      if (m.unmapped) {
        // Never-written data reads back as zeroes without touching flash.
        m.state = MemState::kDone;
        t.page_done[i] = true;
        ++t.done;
        continue;
      }
      if (m.op == OpKind::kProgram) {
        // Reads still waiting for the old copy keep it alive and go first.
        auto it = read_index_.find(p.vpage);
        if (it != read_index_.end()) {
          for (MemId rid : it->second) {
            MemoryRequest& rd = mems_.at(rid);
            m.hazard_reads.push_back(rid);
            if (!rd.pinned) {
              ftl_.pin(rd.target);
              rd.pinned = true;
            }
          }
          read_index_.erase(it);
        }
        ftl_.pin(m.target);
        m.pinned = true;
      } else {
        read_index_[p.vpage].push_back(id);
      }
      layout_.insert(m.sched.chip_index(g), id);
      ++t.uncommitted;
      ++flash;
    }
    pending_host_ += flash;
    metrics_.mem_requests(flash, 0);
    if (t.uncommitted > 0) open_tags_.push_back(tid);
    if (observer_) observer_->on_accept(t, now_);
    deliver(t);
    maybe_retire(t);
  }

  void unindex_read(const MemoryRequest& m) {
    auto it = read_index_.find(m.vpage);
    if (it == read_index_.end()) return;
    auto& v = it->second;
    v.erase(std::remove(v.begin(), v.end(), m.id), v.end());
    if (v.empty()) read_index_.erase(it);
  }

  // Readdressing callback: the scheduler's view follows data that moved to
  // another (chip, die, plane).
  void readdress(std::span<const Migration> moved) {
    for (const auto& mv : moved) {
      auto it = read_index_.find(mv.vpage);
      if (it == read_index_.end()) continue;
      for (MemId rid : it->second) {
        MemoryRequest& m = mems_.at(rid);
        layout_.move(rid, m.sched.chip_index(cfg_.geometry), mv.to.chip_index(cfg_.geometry));
        m.sched = mv.to;
        chip_cache_.erase(m.tag);
      }
    }
  }

  void replay_gc() {
    for (auto& rep : ftl_.take_gc_reports()) {
      const std::size_t job = gc_jobs_.size();
      gc_jobs_.push_back(GcJob{rep.victim, static_cast<std::uint32_t>(rep.migrations.size())});
      for (const auto& mv : rep.migrations) {
        // Uncommitted host reads of a moved page now execute at its new home.
        auto it = read_index_.find(mv.vpage);
        if (it != read_index_.end()) {
          for (MemId rid : it->second) mems_.at(rid).target = mv.to;
        }
        const MemId rid = internal(OpKind::kRead, mv.from, job);
        gc_moves_[rid] = mv.to;
      }
      if (rep.migrations.empty()) internal(OpKind::kErase, rep.victim, job);
    }
  }

  MemId internal(OpKind op, const PhysicalAddress& a, std::size_t job) {
    const MemId id = next_mem_++;
    MemoryRequest& m = mems_[id];
    m.id = id;
    m.op = op;
    m.target = a;
    m.sched = a;
    m.state = MemState::kCommitted;
    if (op == OpKind::kProgram) {
      ftl_.pin(a);
      m.pinned = true;
    }
    gc_job_of_[id] = job;
    const ChipIndex chip = a.chip_index(cfg_.geometry);
    controllers_[chip].queue.push_back(id);
    touched_.push_back(chip);
    metrics_.mem_requests(0, 1);
    return id;
  }

  void kick(ChipIndex c) {
    Controller& k = controllers_[c];
    if (k.forming || k.executing || k.queue.empty()) return;
    k.forming = true;
    push(now_ + cfg_.timing.txn_decision_window, EventKind::kWindow, c);
  }

  bool write_waits(const MemoryRequest& m, const std::vector<MemId>& taken) const {
    for (MemId r : m.hazard_reads) {
      auto it = mems_.find(r);
      if (it == mems_.end() || it->second.state != MemState::kCommitted) continue;
      if (std::find(taken.begin(), taken.end(), r) == taken.end()) return true;
    }
    return false;
  }

  // Greedy composition from the head of the controller queue.
  void compose(ChipIndex c) {
    const Geometry& g = cfg_.geometry;
    Controller& k = controllers_[c];
    k.forming = false;
    if (k.queue.empty()) return;

    const MemoryRequest& head = mems_.at(k.queue.front());
    const OpKind kind = head.op;
    std::vector<MemId> taken;
    std::vector<std::optional<std::uint32_t>> die_page(g.dies_per_chip);
    std::vector<std::vector<bool>> plane_used(g.dies_per_chip, std::vector<bool>(g.planes_per_die, false));
    std::vector<std::size_t> taken_pos;
    const std::size_t limit = kind == OpKind::kErase ? 1 : g.max_txn_members();
    for (std::size_t i = 0; i < k.queue.size() && taken.size() < limit; ++i) {
      const MemoryRequest& m = mems_.at(k.queue[i]);
      if (m.op != kind) continue;
      const auto& a = m.target;
      if (die_page[a.die] && (*die_page[a.die] != a.page || plane_used[a.die][a.plane])) continue;
      if (i > 0 && m.op == OpKind::kProgram && write_waits(m, taken)) continue;
      die_page[a.die] = a.page;
      plane_used[a.die][a.plane] = true;
      taken.push_back(m.id);
      taken_pos.push_back(i);
    }
    for (auto it = taken_pos.rbegin(); it != taken_pos.rend(); ++it) {
      k.queue.erase(k.queue.begin() + static_cast<std::ptrdiff_t>(*it));
    }
    std::sort(taken.begin(), taken.end(), [&](MemId a, MemId b) {
      const auto& x = mems_.at(a).target;
      const auto& y = mems_.at(b).target;
      return std::tie(x.die, x.plane, a) < std::tie(y.die, y.plane, b);
    });

    TransactionRecord& txn = k.txn;
    txn = TransactionRecord{};
    txn.id = next_txn_++;
    txn.chip = c;
    txn.kind = kind;
    txn.members = taken;
    bool host = false;
    for (MemId id : taken) {
      MemoryRequest& m = mems_.at(id);
      m.state = MemState::kInTransaction;
      txn.addresses.push_back(m.target);
      txn.tags.push_back(m.tag);
      if (m.tag != kNoTag) {
        host = true;
        --pending_host_;
      }
    }
    txn.flp = kind == OpKind::kErase ? FlpClass::kNonPal : classify_flp(txn.addresses, g);
    txn.schedule = execute_transaction(kind, txn.addresses, chips_[c], bus_, g, cfg_.timing, now_);
    k.executing = true;
    ++busy_chips_;
    metrics_.transaction(c, txn.schedule, txn.flp, g.dies_per_chip, host);
    if (observer_) observer_->on_transaction(txn);
    push(txn.schedule.end, EventKind::kTxnEnd, c);
  }

  void finish(ChipIndex c) {
    Controller& k = controllers_[c];
    chips_[c].release();
    k.executing = false;
    --busy_chips_;
    const std::vector<MemId> members = std::move(k.txn.members);
    for (MemId id : members) complete(id);
    kick(c);
  }

  void complete(MemId id) {
    MemoryRequest& m = mems_.at(id);
    if (m.state != MemState::kInTransaction) throw std::logic_error("engine: request completed twice");
    m.state = MemState::kDone;
    if (m.pinned) {
      ftl_.unpin(m.target);
      m.pinned = false;
    }
    if (observer_) observer_->on_complete(m, now_);
    if (m.tag == kNoTag) {
      complete_internal(m);
      return;
    }
    IORequest& t = tags_.at(m.tag);
    t.bitmap.clear(m.index_in_tag);
    t.page_done[m.index_in_tag] = true;
    ++t.done;
    deliver(t);
    maybe_retire(t);
  }

  void complete_internal(const MemoryRequest& m) {
    const MemId id = m.id;
    const std::size_t job = gc_job_of_.at(id);
    if (m.op == OpKind::kRead) {
      const PhysicalAddress to = gc_moves_.at(id);
      gc_moves_.erase(id);
      internal(OpKind::kProgram, to, job);
      if (--gc_jobs_[job].reads_left == 0) internal(OpKind::kErase, gc_jobs_[job].victim, job);
    }
    gc_job_of_.erase(id);
    mems_.erase(id);
  }

  // In-order DMA: page k leaves only after pages 0..k-1.
  void deliver(IORequest& t) {
    if (t.kind != IoKind::kRead) return;
    while (t.delivered < t.mems.size() && t.page_done[t.delivered]) {
      if (observer_) observer_->on_deliver(t.id, t.delivered, now_);
      ++t.delivered;
    }
  }

  void maybe_retire(IORequest& t) {
    if (t.done < t.mems.size() || !t.bitmap.none()) return;
    if (t.kind == IoKind::kRead && t.delivered < t.mems.size()) return;
    metrics_.retire(now_ - t.arrival_time, t.length);
    if (observer_) observer_->on_retire(t, now_);
    if (t.fua) --fua_outstanding_;
    for (MemId id : t.mems) mems_.erase(id);
    chip_cache_.erase(t.id);
    tags_.erase(t.id);
    step_needed_ = true;
  }

  SimConfig cfg_;
  std::vector<TraceRecord> records_;
  Ftl ftl_;
  std::unique_ptr<Policy> policy_;
  BusArbiter bus_;
  std::vector<ChipState> chips_;
  std::vector<Controller> controllers_;
  LayoutIndex layout_;
  MetricsAccumulator metrics_;
  EngineObserver* observer_ = nullptr;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  SimTime now_ = 0;
  bool ran_ = false;
  bool step_needed_ = true;
  bool arrival_pending_ = false;
  std::optional<SimTime> blocked_since_;

  std::size_t next_record_ = 0;
  TagId next_tag_ = 0;
  MemId next_mem_ = 0;
  TxnId next_txn_ = 0;

  std::unordered_map<TagId, IORequest> tags_;
  std::unordered_map<MemId, MemoryRequest> mems_;
  std::vector<TagId> open_tags_;
  std::unordered_map<TagId, std::vector<ChipIndex>> chip_cache_;
  std::unordered_map<std::uint64_t, std::vector<MemId>> read_index_;  // vpage -> uncommitted reads
  std::vector<ChipIndex> touched_;
  std::uint64_t pending_host_ = 0;
  std::uint32_t busy_chips_ = 0;
  std::uint32_t fua_outstanding_ = 0;

  std::vector<GcJob> gc_jobs_;
  std::unordered_map<MemId, std::size_t> gc_job_of_;
  std::unordered_map<MemId, PhysicalAddress> gc_moves_;
  std::uint64_t gc_runs_base_ = 0;
  std::uint64_t gc_migrations_base_ = 0;
};

Engine::Engine(const SimConfig& config, std::vector<TraceRecord> workload)
    : impl_(std::make_unique<Impl>(config, std::move(workload))) {}

Engine::~Engine() = default;

Ftl& Engine::ftl() { return impl_->ftl(); }
void Engine::set_observer(EngineObserver* observer) { impl_->set_observer(observer); }
MetricsReport Engine::run(const MetricsReport* baseline) { return impl_->run(baseline); }

MetricsReport simulate(const SimConfig& config, std::vector<TraceRecord> workload, const MetricsReport* baseline) {
  Engine e(config, std::move(workload));
  return e.run(baseline);
}

}  // namespace sprinkler
