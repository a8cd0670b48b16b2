// One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "properties.hpp"
#include "scenario.hpp"
#include "sprinkler/config.hpp"

using namespace sprinkler;
using namespace sprinkler::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

MetricsReport run_config(RunConfig c, PolicyKind p) {
  c.sim.policy = p;
  return simulate(c.sim, load_workload(c.workload));
}

RunConfig shipped(const std::string& name) { return load_config(config_dir() + "/" + name); }

// Criterion 1: the hand-laid fixture, exact idle slots.
void idle_slots_fixture(Verdict& v) {
  const auto t0 = Clock::now();
  const long vas = idle_slots(run_config(nine_chip(PolicyKind::kVas), PolicyKind::kVas));
  const long pas = idle_slots(run_config(nine_chip(PolicyKind::kPas), PolicyKind::kPas));
  const double secs = seconds_since(t0);
  v.detail << "VAS " << vas << " slots, PAS " << pas << " slots, " << fmt(secs, 3) << " s";
  v.require(vas == 20, "VAS == 20");
  v.require(pas == 15, "PAS == 15");
  v.require(secs < 1.0, "runtime < 1 s");
}

// Criterion 2: traversal rounds and the four-way coalition on chip 3.
void commit_order_fixture(Verdict& v) {
  const auto t0 = Clock::now();
  const RunConfig c = nine_chip(PolicyKind::kSpk3);
  const RecordedRun run = run_recorded(c.sim, load_workload(c.workload));
  const double secs = seconds_since(t0);

  // (tag, page index, chip); tags count from zero in arrival order.
  using Key = std::tuple<TagId, std::uint32_t, ChipIndex>;
  const std::vector<Key> frozen{
      {0, 0, 0}, {1, 0, 0}, {0, 1, 1}, {1, 1, 1}, {0, 2, 2}, {1, 2, 2},                        // offset 0
      {0, 3, 3}, {1, 3, 3}, {3, 0, 3}, {4, 0, 3}, {1, 4, 4}, {3, 1, 4}, {2, 0, 5}, {2, 1, 5},  // offset 1
      {3, 2, 6}, {3, 3, 7}, {3, 4, 7}, {3, 5, 8},                                              // offset 2
      {1, 5, 4}};
  std::vector<Key> got;
  std::vector<std::size_t> rounds(3, 0);
  for (const auto& e : run.log.commits) {
    got.emplace_back(e.tag, e.index, e.chip);
    if (e.time == 0) ++rounds[c.sim.geometry.offset_of(e.chip)];
  }

  bool pal3 = false;
  for (const auto& t : run.log.transactions) {
    if (t.chip != 3) continue;
    std::vector<TagId> tags = t.tags;
    std::sort(tags.begin(), tags.end());
    if (t.flp == FlpClass::kPal3 && tags == std::vector<TagId>{0, 1, 3, 4}) pal3 = true;
  }
  const long idle = idle_slots(run.report);
  v.detail << "rounds " << rounds[0] << "/" << rounds[1] << "/" << rounds[2] << " + "
           << (got.size() - rounds[0] - rounds[1] - rounds[2]) << " later, C3 PAL3 {#1,#2,#4,#5} "
           << (pal3 ? "yes" : "no") << ", idle " << idle << " slots, " << fmt(secs, 3) << " s";
  v.require(got == frozen, "commit order matches the frozen sequence");
  v.require(rounds == std::vector<std::size_t>{6, 8, 4}, "rounds 6/8/4");
  v.require(pal3, "four-member PAL3 on C3");
  v.require(idle < 15, "idle < 15");
  v.require(secs < 1.0, "runtime < 1 s");
}

// Criterion 3: one 16 KB read spread over every plane of a 2x4 chip.
void flp_speedup(Verdict& v) {
  SimConfig s;
  Geometry& g = s.geometry;
  g.num_channels = 1;
  g.chips_per_channel = 1;
  g.dies_per_chip = 2;
  g.planes_per_die = 4;
  g.blocks_per_die = 16;
  g.pages_per_block = 16;
  s.policy = PolicyKind::kSpk3;
  for (std::uint32_t d = 0; d < 2; ++d)
    for (std::uint32_t p = 0; p < 4; ++p) s.precondition.layout.push_back(Placement{d * 4 + p, 0, d, p});
  const RecordedRun run = run_recorded(s, {TraceRecord{0, IoKind::kRead, 0, 8 * 2048, false}});

  const SimTime cell = s.timing.read_cell;
  v.require(run.log.transactions.size() == 1, "one transaction");
  if (run.log.transactions.size() != 1) return;
  const auto& t = run.log.transactions.front();
  const auto& cells = t.schedule.cells;
  bool each_one_cell = cells.size() == 2;
  for (const auto& c : cells) each_one_cell &= c.end - c.start == cell;
  const SimTime first = cells.empty() ? 0 : cells.front().start;
  const SimTime last = cells.empty() ? 0 : cells.back().end;
  const SimTime stagger = 4 * s.timing.command_overhead;
  v.detail << to_string(t.flp) << " with " << t.members.size() << " members, per-die cell "
           << fmt(to_us(cell), 1) << " us, cell span " << fmt(to_us(last - first), 1) << " us vs "
           << fmt(to_us(8 * cell), 1) << " us serial";
  v.require(t.flp == FlpClass::kPal3 && t.members.size() == 8, "8-member PAL3");
  v.require(each_one_cell, "each die busy exactly one read cell");
  v.require(last - first == cell + stagger, "dies overlap apart from the command stagger");
}

// Criteria 4 and 6 share one set of runs.
struct Throughput {
  MetricsReport vas, spk2, spk3;
  double secs = 0.0;
};

Throughput throughput_runs() {
  const auto t0 = Clock::now();
  const RunConfig c = shipped("throughput.ini");
  Throughput r;
  r.vas = run_config(c, PolicyKind::kVas);
  r.spk2 = run_config(c, PolicyKind::kSpk2);
  r.spk3 = run_config(c, PolicyKind::kSpk3);
  r.secs = seconds_since(t0);
  return r;
}

void throughput_order(Verdict& v, const Throughput& r) {
  const double ratio = r.spk3.bandwidth_mbps / r.vas.bandwidth_mbps;
  v.detail << "SPK3 " << fmt(r.spk3.bandwidth_mbps) << ", SPK2 " << fmt(r.spk2.bandwidth_mbps) << ", VAS "
           << fmt(r.vas.bandwidth_mbps) << " MB/s (SPK3/VAS " << fmt(ratio) << "x), " << fmt(r.secs, 1) << " s";
  v.require(r.vas.ios == 100000, "100k I/Os");
  v.require(r.spk3.bandwidth_mbps > r.spk2.bandwidth_mbps, "SPK3 > SPK2");
  v.require(r.spk2.bandwidth_mbps > r.vas.bandwidth_mbps, "SPK2 > VAS");
  v.require(ratio >= 1.5, "SPK3 >= 1.5 x VAS");
  v.require(r.secs < 120.0, "runtime < 2 min");
}

void txn_reduction(Verdict& v, const Throughput& r) {
  const double ratio = static_cast<double>(r.spk3.txn_count) / static_cast<double>(r.vas.txn_count);
  v.detail << "SPK3 " << r.spk3.txn_count << " vs VAS " << r.vas.txn_count << " transactions (ratio "
           << fmt(ratio, 3) << ")";
  v.require(ratio <= 0.7, "ratio <= 0.7");
}

// Criterion 5: utilization against array size at 16 KB.
void utilization_trend(Verdict& v) {
  const auto t0 = Clock::now();
  const RunConfig base = shipped("utilization.ini");
  std::vector<double> vas, spk3;
  for (std::uint32_t side : {8u, 16u, 32u}) {
    RunConfig c = base;
    c.sim.geometry.num_channels = side;
    c.sim.geometry.chips_per_channel = side;
    vas.push_back(run_config(c, PolicyKind::kVas).mean_utilization);
    spk3.push_back(run_config(c, PolicyKind::kSpk3).mean_utilization);
  }
  const double secs = seconds_since(t0);
  v.detail << "VAS " << fmt(vas[0], 3) << ", " << fmt(vas[1], 3) << ", " << fmt(vas[2], 3) << "; SPK3 "
           << fmt(spk3[0], 3) << ", " << fmt(spk3[1], 3) << ", " << fmt(spk3[2], 3) << " at 64/256/1024 chips, "
           << fmt(secs, 1) << " s";
  v.require(vas[0] > vas[1] && vas[1] > vas[2], "VAS strictly decreasing");
  for (std::size_t i = 0; i < 3; ++i) v.require(spk3[i] > vas[i], "SPK3 > VAS at each size");
  v.require(secs < 300.0, "runtime < 5 min");
}

// Criterion 7: pristine versus 95% random-filled flash.
void gc_degradation(Verdict& v) {
  const auto t0 = Clock::now();
  const RunConfig pristine = shipped("gc.ini");
  RunConfig aged = pristine;
  aged.sim.precondition.mode = Precondition::Mode::kRandom;
  std::map<PolicyKind, std::pair<double, double>> bw;
  for (PolicyKind p : {PolicyKind::kVas, PolicyKind::kPas, PolicyKind::kSpk1, PolicyKind::kSpk2,
                       PolicyKind::kSpk3}) {
    bw[p] = {run_config(pristine, p).bandwidth_mbps, run_config(aged, p).bandwidth_mbps};
  }
  const double secs = seconds_since(t0);
  for (const auto& [p, b] : bw) {
    v.detail << to_string(p) << " " << fmt(b.first) << "->" << fmt(b.second) << " ";
    v.require(b.second < b.first, std::string(to_string(p)) + " drops");
  }
  v.detail << "MB/s, " << fmt(secs, 1) << " s";
  v.require(aged.sim.readdressing, "readdressing on");
  v.require(bw[PolicyKind::kSpk3].second > bw[PolicyKind::kPas].second, "aged SPK3 > PAS");
  v.require(bw[PolicyKind::kSpk3].second > bw[PolicyKind::kVas].second, "aged SPK3 > VAS");
  v.require(secs < 300.0, "runtime < 5 min");
}

// Criterion 8: every property suite at 1000 cases.
void property_suites(Verdict& v) {
  const char* env = std::getenv("SPRINKLER_PROPERTY_SEED");
  const std::uint64_t seed = env ? std::strtoull(env, nullptr, 10) : 1;
  const auto t0 = Clock::now();
  std::size_t passed = 0;
  for (const auto& p : all_properties()) {
    const PropertyResult r = p.run(seed, 1000);
    if (r.passed && r.cases >= 1000) {
      ++passed;
    } else {
      v.require(false, describe(r));
    }
  }
  v.detail << passed << "/" << all_properties().size() << " suites x 1000 cases from seed " << seed << ", "
           << fmt(seconds_since(t0), 1) << " s";
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::function<void(Verdict&)>& body) {
    Verdict v;
    try {
      body(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail.str() << std::endl;
    if (!v.pass) ++failures;
  };

  report(1, idle_slots_fixture);
  report(2, commit_order_fixture);
  report(3, flp_speedup);
  Throughput tp;
  bool have_tp = false;
  report(4, [&](Verdict& v) {
    tp = throughput_runs();
    have_tp = true;
    throughput_order(v, tp);
  });
  report(5, utilization_trend);
  report(6, [&](Verdict& v) {
    if (!have_tp) throw std::runtime_error("criterion 4 runs did not complete");
    txn_reduction(v, tp);
  });
  report(7, gc_degradation);
  report(8, property_suites);
  return failures == 0 ? 0 : 1;
}
