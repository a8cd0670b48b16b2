#include "sprinkler/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sprinkler {

namespace {

using Span = std::pair<SimTime, SimTime>;

std::vector<Span> merged(std::vector<Span> v) {
  std::sort(v.begin(), v.end());
  std::vector<Span> out;
  for (const auto& s : v) {
    if (s.second <= s.first) continue;
    if (!out.empty() && s.first <= out.back().second) {
      out.back().second = std::max(out.back().second, s.second);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

SimTime length(const std::vector<Span>& v) {
  SimTime t = 0;
  for (const auto& s : v) t += s.second - s.first;
  return t;
}

SimTime overlap(const std::vector<Span>& a, const std::vector<Span>& b) {
  SimTime t = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const SimTime lo = std::max(a[i].first, b[j].first);
    const SimTime hi = std::min(a[i].second, b[j].second);
    if (hi > lo) t += hi - lo;
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return t;
}

double percentile(std::vector<SimTime> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  // Nearest rank.
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return to_us(v[rank - 1]);
}

}  // namespace

MetricsAccumulator::MetricsAccumulator(std::uint32_t chips) : chips_(chips) {}

void MetricsAccumulator::advance(SimTime t, std::uint32_t busy_chips, bool pending) {
  if (t < now_) throw std::logic_error("metrics: time moved backwards");
  if (pending) {
    const auto idle = static_cast<SimTime>(chips_.size()) - busy_chips;
    inter_idle_ += idle * (t - now_);
  }
  now_ = t;
}

void MetricsAccumulator::transaction(ChipIndex chip, const TransactionSchedule& s, FlpClass cls,
                                     std::uint32_t dies, bool host) {
  std::vector<Span> bus;
  for (const auto& g : s.command_slots) bus.emplace_back(g.start, g.end);
  for (const auto& g : s.data_slots) bus.emplace_back(g.start, g.end);
  std::vector<Span> cell;
  for (const auto& c : s.cells) cell.emplace_back(c.start, c.end);
  const auto bus_u = merged(std::move(bus));
  const auto cell_u = merged(std::move(cell));

  Chip& c = chips_.at(chip);
  const SimTime bus_t = length(bus_u);
  c.bus += bus_t;
  c.cell += length(cell_u) - overlap(bus_u, cell_u);
  c.busy += s.busy_time();
  ++c.txns;

  SimTime die_cell_sum = 0;
  for (const auto& iv : s.cells) die_cell_sum += iv.end - iv.start;
  intra_idle_ += static_cast<SimTime>(dies) * s.busy_time() - die_cell_sum;

  pal_time_[static_cast<std::size_t>(cls)] += s.busy_time();
  ++txns_;
  if (host) ++host_txns_;
  makespan_ = std::max(makespan_, s.end);
}

void MetricsAccumulator::retire(SimTime latency, std::uint64_t bytes) {
  latencies_.push_back(latency);
  bytes_ += bytes;
  makespan_ = std::max(makespan_, now_);
}

void MetricsAccumulator::merge(const MetricsAccumulator& o) {
  if (chips_.size() < o.chips_.size()) chips_.resize(o.chips_.size());
  for (std::size_t i = 0; i < o.chips_.size(); ++i) {
    chips_[i].bus += o.chips_[i].bus;
    chips_[i].cell += o.chips_[i].cell;
    chips_[i].busy += o.chips_[i].busy;
    chips_[i].txns += o.chips_[i].txns;
  }
  makespan_ += o.makespan_;
  inter_idle_ += o.inter_idle_;
  intra_idle_ += o.intra_idle_;
  stall_ += o.stall_;
  for (std::size_t k = 0; k < pal_time_.size(); ++k) pal_time_[k] += o.pal_time_[k];
  txns_ += o.txns_;
  host_txns_ += o.host_txns_;
  latencies_.insert(latencies_.end(), o.latencies_.begin(), o.latencies_.end());
  bytes_ += o.bytes_;
  host_mems_ += o.host_mems_;
  gc_mems_ += o.gc_mems_;
  gc_runs_ += o.gc_runs_;
  gc_migrations_ += o.gc_migrations_;
}

MetricsReport finalize(const MetricsAccumulator& acc, const std::string& policy, std::uint64_t digest,
                       const MetricsReport* baseline) {
  MetricsReport r;
  r.policy = policy;
  r.workload_digest = digest;
  r.ios = acc.latencies_.size();
  r.bytes = acc.bytes_;
  r.host_mem_requests = acc.host_mems_;
  r.gc_mem_requests = acc.gc_mems_;
  r.makespan_us = to_us(acc.makespan_);
  const double secs = static_cast<double>(acc.makespan_) / 1e9;
  if (secs > 0.0) {
    r.bandwidth_mbps = static_cast<double>(acc.bytes_) / 1e6 / secs;
    r.iops = static_cast<double>(r.ios) / secs;
  }
  if (!acc.latencies_.empty()) {
    long double sum = 0;
    for (auto l : acc.latencies_) sum += l;
    r.latency_mean_us = static_cast<double>(sum / acc.latencies_.size()) / kNsPerUs;
    r.latency_p50_us = percentile(acc.latencies_, 0.50);
    r.latency_p99_us = percentile(acc.latencies_, 0.99);
  }
  r.queue_stall_us = to_us(acc.stall_);
  r.inter_chip_idle_us = to_us(acc.inter_idle_);
  r.intra_chip_idle_us = to_us(acc.intra_idle_);

  SimTime total_pal = 0;
  for (auto t : acc.pal_time_) total_pal += t;
  for (std::size_t k = 0; k < r.pal_histogram.size(); ++k) {
    r.pal_histogram[k] = total_pal > 0 ? static_cast<double>(acc.pal_time_[k]) / static_cast<double>(total_pal) : 0.0;
  }
  r.txn_count = acc.txns_;
  r.host_txn_count = acc.host_txns_;
  r.gc_runs = acc.gc_runs_;
  r.gc_migrations = acc.gc_migrations_;

  const double span = static_cast<double>(acc.makespan_);
  r.chips.reserve(acc.chips_.size());
  for (std::size_t i = 0; i < acc.chips_.size(); ++i) {
    const auto& c = acc.chips_[i];
    ChipReport cr;
    cr.chip = static_cast<ChipIndex>(i);
    cr.transactions = c.txns;
    cr.bus_us = to_us(c.bus);
    cr.cell_us = to_us(c.cell);
    cr.contention_us = to_us(c.busy - c.bus - c.cell);
    if (span > 0.0) {
      cr.breakdown.bus_activate = static_cast<double>(c.bus) / span;
      cr.breakdown.cell_activate = static_cast<double>(c.cell) / span;
      cr.breakdown.bus_contention = static_cast<double>(c.busy - c.bus - c.cell) / span;
      cr.breakdown.idle = static_cast<double>(acc.makespan_ - c.busy) / span;
      cr.utilization = static_cast<double>(c.bus + c.cell) / span;
    } else {
      cr.breakdown.idle = 1.0;
    }
    r.breakdown.bus_activate += cr.breakdown.bus_activate;
    r.breakdown.cell_activate += cr.breakdown.cell_activate;
    r.breakdown.bus_contention += cr.breakdown.bus_contention;
    r.breakdown.idle += cr.breakdown.idle;
    r.mean_utilization += cr.utilization;
    r.chips.push_back(cr);
  }
  if (!r.chips.empty()) {
    const auto n = static_cast<double>(r.chips.size());
    r.breakdown.bus_activate /= n;
    r.breakdown.cell_activate /= n;
    r.breakdown.bus_contention /= n;
    r.breakdown.idle /= n;
    r.mean_utilization /= n;
  }
  if (baseline) apply_baseline(r, *baseline);
  return r;
}

void apply_baseline(MetricsReport& r, const MetricsReport& b) {
  if (r.workload_digest != b.workload_digest) {
    throw BaselineMismatch("baseline report was produced from a different workload");
  }
  r.txn_reduction = b.txn_count > 0 ? 1.0 - static_cast<double>(r.txn_count) / static_cast<double>(b.txn_count)
                                    : 0.0;
  r.queue_stall_normalized = b.queue_stall_us > 0.0 ? r.queue_stall_us / b.queue_stall_us : 0.0;
}

bool MetricsReport::operator==(const MetricsReport& o) const {
  return nlohmann::json(*this) == nlohmann::json(o);
}

void to_json(nlohmann::json& j, const Breakdown& b) {
  j = {{"bus_activate", b.bus_activate},
       {"bus_contention", b.bus_contention},
       {"cell_activate", b.cell_activate},
       {"idle", b.idle}};
}

void from_json(const nlohmann::json& j, Breakdown& b) {
  j.at("bus_activate").get_to(b.bus_activate);
  j.at("bus_contention").get_to(b.bus_contention);
  j.at("cell_activate").get_to(b.cell_activate);
  j.at("idle").get_to(b.idle);
}

void to_json(nlohmann::json& j, const ChipReport& c) {
  j = {{"chip", c.chip},       {"transactions", c.transactions}, {"bus_us", c.bus_us},
       {"cell_us", c.cell_us}, {"contention_us", c.contention_us}, {"utilization", c.utilization},
       {"breakdown", c.breakdown}};
}

void from_json(const nlohmann::json& j, ChipReport& c) {
  j.at("chip").get_to(c.chip);
  j.at("transactions").get_to(c.transactions);
  j.at("bus_us").get_to(c.bus_us);
  j.at("cell_us").get_to(c.cell_us);
  j.at("contention_us").get_to(c.contention_us);
  j.at("utilization").get_to(c.utilization);
  j.at("breakdown").get_to(c.breakdown);
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json::object();
  j["policy"] = r.policy;
  j["workload_digest"] = r.workload_digest;
  j["ios"] = r.ios;
  j["bytes"] = r.bytes;
  j["host_mem_requests"] = r.host_mem_requests;
  j["gc_mem_requests"] = r.gc_mem_requests;
  j["makespan_us"] = r.makespan_us;
  j["bandwidth_mbps"] = r.bandwidth_mbps;
  j["iops"] = r.iops;
  j["latency_mean_us"] = r.latency_mean_us;
  j["latency_p50_us"] = r.latency_p50_us;
  j["latency_p99_us"] = r.latency_p99_us;
  j["queue_stall_us"] = r.queue_stall_us;
  if (r.queue_stall_normalized) j["queue_stall_normalized"] = *r.queue_stall_normalized;
  j["inter_chip_idle_us"] = r.inter_chip_idle_us;
  j["intra_chip_idle_us"] = r.intra_chip_idle_us;
  j["mean_utilization"] = r.mean_utilization;
  j["breakdown"] = r.breakdown;
  j["pal_histogram"] = {{"NON_PAL", r.pal_histogram[0]},
                        {"PAL1", r.pal_histogram[1]},
                        {"PAL2", r.pal_histogram[2]},
                        {"PAL3", r.pal_histogram[3]}};
  j["txn_count"] = r.txn_count;
  j["host_txn_count"] = r.host_txn_count;
  if (r.txn_reduction) j["txn_reduction"] = *r.txn_reduction;
  j["gc_runs"] = r.gc_runs;
  j["gc_migrations"] = r.gc_migrations;
  j["chips"] = r.chips;
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  j.at("policy").get_to(r.policy);
  j.at("workload_digest").get_to(r.workload_digest);
  j.at("ios").get_to(r.ios);
  j.at("bytes").get_to(r.bytes);
  j.at("host_mem_requests").get_to(r.host_mem_requests);
  j.at("gc_mem_requests").get_to(r.gc_mem_requests);
  j.at("makespan_us").get_to(r.makespan_us);
  j.at("bandwidth_mbps").get_to(r.bandwidth_mbps);
  j.at("iops").get_to(r.iops);
  j.at("latency_mean_us").get_to(r.latency_mean_us);
  j.at("latency_p50_us").get_to(r.latency_p50_us);
  j.at("latency_p99_us").get_to(r.latency_p99_us);
  j.at("queue_stall_us").get_to(r.queue_stall_us);
  if (j.contains("queue_stall_normalized")) r.queue_stall_normalized = j["queue_stall_normalized"].get<double>();
  j.at("inter_chip_idle_us").get_to(r.inter_chip_idle_us);
  j.at("intra_chip_idle_us").get_to(r.intra_chip_idle_us);
  j.at("mean_utilization").get_to(r.mean_utilization);
  j.at("breakdown").get_to(r.breakdown);
  const auto& h = j.at("pal_histogram");
  r.pal_histogram = {h.at("NON_PAL").get<double>(), h.at("PAL1").get<double>(), h.at("PAL2").get<double>(),
                     h.at("PAL3").get<double>()};
  j.at("txn_count").get_to(r.txn_count);
  j.at("host_txn_count").get_to(r.host_txn_count);
  if (j.contains("txn_reduction")) r.txn_reduction = j["txn_reduction"].get<double>();
  j.at("gc_runs").get_to(r.gc_runs);
  j.at("gc_migrations").get_to(r.gc_migrations);
  if (j.contains("chips")) j["chips"].get_to(r.chips);
}

std::vector<std::pair<std::string, double>> report_scalars(const MetricsReport& r) {
  auto d = [](auto v) { return static_cast<double>(v); };
  return {
      {"ios", d(r.ios)},
      {"bytes", d(r.bytes)},
      {"host_mem_requests", d(r.host_mem_requests)},
      {"gc_mem_requests", d(r.gc_mem_requests)},
      {"makespan_us", r.makespan_us},
      {"bandwidth_mbps", r.bandwidth_mbps},
      {"iops", r.iops},
      {"latency_mean_us", r.latency_mean_us},
      {"latency_p50_us", r.latency_p50_us},
      {"latency_p99_us", r.latency_p99_us},
      {"queue_stall_us", r.queue_stall_us},
      {"queue_stall_normalized", r.queue_stall_normalized.value_or(std::nan(""))},
      {"inter_chip_idle_us", r.inter_chip_idle_us},
      {"intra_chip_idle_us", r.intra_chip_idle_us},
      {"mean_utilization", r.mean_utilization},
      {"bus_activate", r.breakdown.bus_activate},
      {"bus_contention", r.breakdown.bus_contention},
      {"cell_activate", r.breakdown.cell_activate},
      {"idle", r.breakdown.idle},
      {"pal_non_pal", r.pal_histogram[0]},
      {"pal1", r.pal_histogram[1]},
      {"pal2", r.pal_histogram[2]},
      {"pal3", r.pal_histogram[3]},
      {"txn_count", d(r.txn_count)},
      {"host_txn_count", d(r.host_txn_count)},
      {"txn_reduction", r.txn_reduction.value_or(std::nan(""))},
      {"gc_runs", d(r.gc_runs)},
      {"gc_migrations", d(r.gc_migrations)},
  };
}

std::string chips_csv(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(12);
  os << "chip,transactions,bus_us,cell_us,contention_us,utilization,bus_activate,bus_contention,"
        "cell_activate,idle\n";
  for (const auto& c : r.chips) {
    os << c.chip << ',' << c.transactions << ',' << c.bus_us << ',' << c.cell_us << ',' << c.contention_us
       << ',' << c.utilization << ',' << c.breakdown.bus_activate << ',' << c.breakdown.bus_contention << ','
       << c.breakdown.cell_activate << ',' << c.breakdown.idle << '\n';
  }
  return os.str();
}

}  // namespace sprinkler
