#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sprinkler/config.hpp"
#include "sprinkler/engine.hpp"
#include "recorder.hpp"

namespace sprinkler::testing {

// Directory holding the sample configurations shipped with the project.
std::string config_dir();

// The hand-laid 3x3 scenario (five reads, 19 pages).
RunConfig nine_chip(PolicyKind policy);

// 100 us per idle chip-slot in the nine-chip scenario.
inline long idle_slots(const MetricsReport& r) { return std::lround(r.inter_chip_idle_us / 100.0); }

struct RecordedRun {
  MetricsReport report;
  Recorder log;
};

RecordedRun run_recorded(const SimConfig& sim, std::vector<TraceRecord> workload);

// Small random device plus workload; everything derives from `seed`.
struct RandomCase {
  SimConfig sim;
  std::vector<TraceRecord> workload;
};

RandomCase random_case(std::uint64_t seed, PolicyKind policy);

}  // namespace sprinkler::testing
