#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sprinkler/flash_model.hpp"
#include "sprinkler/types.hpp"

namespace sprinkler {

struct Breakdown {
  double bus_activate = 0.0;
  double bus_contention = 0.0;
  double cell_activate = 0.0;
  double idle = 0.0;

  double sum() const { return bus_activate + bus_contention + cell_activate + idle; }
};

struct ChipReport {
  ChipIndex chip = 0;
  std::uint64_t transactions = 0;
  double bus_us = 0.0;
  double cell_us = 0.0;
  double contention_us = 0.0;
  double utilization = 0.0;
  Breakdown breakdown;
};

struct MetricsReport {
  std::string policy;
  std::uint64_t workload_digest = 0;

  std::uint64_t ios = 0;
  std::uint64_t bytes = 0;
  std::uint64_t host_mem_requests = 0;
  std::uint64_t gc_mem_requests = 0;

  double makespan_us = 0.0;
  double bandwidth_mbps = 0.0;  // 10^6 bytes per second
  double iops = 0.0;
  double latency_mean_us = 0.0;
  double latency_p50_us = 0.0;
  double latency_p99_us = 0.0;
  double queue_stall_us = 0.0;
  std::optional<double> queue_stall_normalized;

  double inter_chip_idle_us = 0.0;
  double intra_chip_idle_us = 0.0;
  double mean_utilization = 0.0;
  Breakdown breakdown;  // mean over chips
  std::array<double, kFlpClassCount> pal_histogram{};

  std::uint64_t txn_count = 0;
  std::uint64_t host_txn_count = 0;
  std::optional<double> txn_reduction;

  std::uint64_t gc_runs = 0;
  std::uint64_t gc_migrations = 0;

  std::vector<ChipReport> chips;

  bool operator==(const MetricsReport&) const;
};

// Running sums fed by the engine in dispatch order.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::uint32_t chips = 0);

  // Integrates idleness over [last advance, t). `busy_chips` is the number of
  // chips executing a transaction and `pending` whether any accepted host
  // request has not yet entered a transaction.
  void advance(SimTime t, std::uint32_t busy_chips, bool pending);
  void host_blocked(SimTime from, SimTime to) { stall_ += to - from; }

  void transaction(ChipIndex chip, const TransactionSchedule& s, FlpClass cls, std::uint32_t dies,
                   bool host);
  void retire(SimTime latency, std::uint64_t bytes);
  void mem_requests(std::uint64_t host, std::uint64_t gc) {
    host_mems_ += host;
    gc_mems_ += gc;
  }
  void gc(std::uint64_t runs, std::uint64_t migrations) {
    gc_runs_ = runs;
    gc_migrations_ = migrations;
  }

  // Folds another run's sums into this one (sweep aggregation).
  void merge(const MetricsAccumulator& other);

  SimTime now() const { return now_; }
  SimTime inter_idle() const { return inter_idle_; }

 private:
  friend MetricsReport finalize(const MetricsAccumulator&, const std::string&, std::uint64_t,
                                const MetricsReport*);

  struct Chip {
    SimTime bus = 0;
    SimTime cell = 0;
    SimTime busy = 0;
    std::uint64_t txns = 0;
  };

  std::vector<Chip> chips_;
  SimTime now_ = 0;
  SimTime makespan_ = 0;
  SimTime inter_idle_ = 0;
  SimTime intra_idle_ = 0;
  SimTime stall_ = 0;
  std::array<SimTime, kFlpClassCount> pal_time_{};
  std::uint64_t txns_ = 0;
  std::uint64_t host_txns_ = 0;
  std::vector<SimTime> latencies_;
  std::uint64_t bytes_ = 0;
  std::uint64_t host_mems_ = 0;
  std::uint64_t gc_mems_ = 0;
  std::uint64_t gc_runs_ = 0;
  std::uint64_t gc_migrations_ = 0;
};

class BaselineMismatch : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

// Throws BaselineMismatch if the baseline ran a different workload.
MetricsReport finalize(const MetricsAccumulator& acc, const std::string& policy, std::uint64_t digest,
                       const MetricsReport* baseline = nullptr);

// Fills the baseline-relative fields of an existing report.
void apply_baseline(MetricsReport& report, const MetricsReport& baseline);

void to_json(nlohmann::json& j, const Breakdown& b);
void from_json(const nlohmann::json& j, Breakdown& b);
void to_json(nlohmann::json& j, const ChipReport& c);
void from_json(const nlohmann::json& j, ChipReport& c);
void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

// Scalars only, in a fixed column order.
std::vector<std::pair<std::string, double>> report_scalars(const MetricsReport& r);

std::string chips_csv(const MetricsReport& r);

}  // namespace sprinkler
