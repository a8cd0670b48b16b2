#pragma once

#include <memory>
#include <vector>

#include "sprinkler/flash_model.hpp"
#include "sprinkler/ftl.hpp"
#include "sprinkler/metrics.hpp"
#include "sprinkler/request.hpp"
#include "sprinkler/schedulers.hpp"
#include "sprinkler/workload.hpp"

namespace sprinkler {

enum class ArrivalMode : std::uint8_t {
  kTrace,      // records arrive at their timestamps
  kBackToBack  // closed loop: the host submits whenever the queue has room
};

std::string_view to_string(ArrivalMode m);
ArrivalMode parse_arrival_mode(std::string_view s);

// Pins one virtual page to a plane before the run (hand-built scenarios).
struct Placement {
  std::uint64_t vpage = 0;
  ChipIndex chip = 0;
  std::uint32_t die = 0;
  std::uint32_t plane = 0;

  bool operator==(const Placement&) const = default;
};

struct Precondition {
  enum class Mode : std::uint8_t { kNone, kSequential, kRandom };
  Mode mode = Mode::kNone;
  double fill = 0.95;
  std::uint64_t io_bytes = 1u << 20;
  std::uint64_t seed = 7;
  // Applied after `mode`, in order; each lands on the plane's next free page.
  std::vector<Placement> layout;
};

std::string_view to_string(Precondition::Mode m);
Precondition::Mode parse_precondition_mode(std::string_view s);

struct SimConfig {
  Geometry geometry;
  TimingParams timing;
  std::uint32_t queue_depth = 32;
  FtlConfig ftl;
  PolicyKind policy = PolicyKind::kSpk3;
  ArrivalMode arrival = ArrivalMode::kTrace;
  // Sprinkler policies subscribe to the FTL's readdressing callback unless
  // this is cleared.
  bool readdressing = true;
  Precondition precondition;

  void validate() const;
};

struct TransactionRecord {
  TxnId id = 0;
  ChipIndex chip = 0;
  OpKind kind = OpKind::kRead;
  FlpClass flp = FlpClass::kNonPal;
  std::vector<MemId> members;
  std::vector<TagId> tags;  // kNoTag for internal work
  std::vector<PhysicalAddress> addresses;
  TransactionSchedule schedule;
};

// Optional instrumentation; every hook defaults to a no-op.
class EngineObserver {
 public:
  virtual ~EngineObserver() = default;
  virtual void on_accept(const IORequest&, SimTime) {}
  virtual void on_commit(const MemoryRequest&, SimTime) {}
  virtual void on_transaction(const TransactionRecord&) {}
  virtual void on_complete(const MemoryRequest&, SimTime) {}
  virtual void on_deliver(TagId, std::uint32_t, SimTime) {}
  virtual void on_retire(const IORequest&, SimTime) {}
};

class Engine {
 public:
  Engine(const SimConfig& config, std::vector<TraceRecord> workload);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Mapping state before the run; tests use it to lay out data.
  Ftl& ftl();
  void set_observer(EngineObserver* observer);

  // Runs to completion once. Throws SimulationError on capacity exhaustion
  // or a schedule that can make no progress.
  MetricsReport run(const MetricsReport* baseline = nullptr);

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

MetricsReport simulate(const SimConfig& config, std::vector<TraceRecord> workload,
                       const MetricsReport* baseline = nullptr);

}  // namespace sprinkler
