// Command-line front end: single runs, sweeps, trace checks, config echo.
//
// Exit status: 0 ok, 1 configuration or input error, 2 runtime failure.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sprinkler/config.hpp"
#include "sprinkler/engine.hpp"
#include "sprinkler/metrics.hpp"

namespace fs = std::filesystem;
using namespace sprinkler;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

fs::path out_dir() {
  const char* env = std::getenv("SPRINKLER_OUT_DIR");
  return fs::path(env && *env ? env : "out");
}

// Write-then-rename so a reader never sees a half-written file.
void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

RunConfig resolve(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) return apply_overrides(RunConfig{}, overrides);
  return load_config(path, overrides);
}

MetricsReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open baseline report: " + path);
  try {
    auto j = nlohmann::json::parse(in);
    return (j.contains("metrics") ? j["metrics"] : j).get<MetricsReport>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string report_document(const RunConfig& cfg, const MetricsReport& r) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["metrics"] = r;
  return j.dump(2) + "\n";
}

std::string summary(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << "policy=" << r.policy << " bandwidth=" << r.bandwidth_mbps
     << "MB/s mean_latency=" << r.latency_mean_us << "us utilization=" << std::setprecision(4)
     << r.mean_utilization << " txns=" << r.txn_count;
  if (r.txn_reduction) os << " txn_reduction=" << *r.txn_reduction;
  return os.str();
}

struct RunArgs {
  std::string config;
  std::string policy;
  std::string trace;
  std::string baseline;
  std::string name;
  std::vector<std::string> overrides;
};

int cmd_run(const RunArgs& a) {
  std::vector<std::string> ov = a.overrides;
  if (!a.policy.empty()) ov.push_back("policy.name=" + a.policy);
  if (!a.trace.empty()) {
    ov.push_back("workload.source=trace");
    ov.push_back("workload.trace=" + a.trace);
  }
  const RunConfig cfg = resolve(a.config, ov);
  std::optional<MetricsReport> base;
  if (!a.baseline.empty()) base = read_report(a.baseline);

  auto workload = load_workload(cfg.workload);
  MetricsReport r = simulate(cfg.sim, std::move(workload));
  if (base) {
    try {
      apply_baseline(r, *base);
    } catch (const BaselineMismatch& e) {
      std::cerr << "error: " << e.what() << " (" << a.baseline << ")\n";
      return kConfigError;
    }
  }
  const std::string name = a.name.empty() ? std::string(to_string(cfg.sim.policy)) : a.name;
  const fs::path dir = out_dir();
  write_atomic(dir / (name + ".json"), report_document(cfg, r));
  write_atomic(dir / (name + ".chips.csv"), chips_csv(r));
  std::cout << summary(r) << "\n";
  return kOk;
}

struct SweepArgs {
  std::string config;
  std::string chips = "64,256,1024";
  std::string sizes = "16K";
  std::string policies = "vas,spk3";
  unsigned jobs = 0;
  std::vector<std::string> overrides;
};

struct Cell {
  std::uint32_t chips = 0;
  std::uint64_t size = 0;
  PolicyKind policy = PolicyKind::kVas;
  std::optional<MetricsReport> report;
  std::string error;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint32_t square_side(std::uint32_t chips) {
  const auto side = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(chips))));
  if (side * side != chips) throw ConfigError("sweep: chip count " + std::to_string(chips) + " is not a square");
  return side;
}

int cmd_sweep(const SweepArgs& a) {
  const RunConfig base = resolve(a.config, a.overrides);
  std::vector<Cell> cells;
  for (const auto& c : split(a.chips)) {
    const auto chips = static_cast<std::uint32_t>(parse_bytes(c));
    square_side(chips);
    for (auto size : parse_byte_list(a.sizes)) {
      for (const auto& p : split(a.policies)) cells.push_back(Cell{chips, size, parse_policy(p), {}, {}});
    }
  }
  if (cells.empty()) throw ConfigError("sweep: empty axis");

  const fs::path dir = out_dir() / "sweep";
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& cell = cells[i];
      try {
        RunConfig cfg = base;
        const std::uint32_t side = square_side(cell.chips);
        cfg.sim.geometry.num_channels = side;
        cfg.sim.geometry.chips_per_channel = side;
        cfg.sim.policy = cell.policy;
        cfg.workload.synth.sizes = {cell.size};
        // Policy is left out so every policy in a cell sees the same stream.
        cfg.workload.synth.seed = base.workload.synth.seed + 1000003ull * cell.chips + cell.size;
        cfg.validate();
        cell.report = simulate(cfg.sim, load_workload(cfg.workload));
        const std::string stem = "cell_" + std::to_string(cell.chips) + "_" + std::to_string(cell.size) + "_" +
                                 std::string(to_string(cell.policy));
        write_atomic(dir / (stem + ".json"), report_document(cfg, *cell.report));
        std::lock_guard<std::mutex> g(log);
        std::cerr << stem << ": " << summary(*cell.report) << "\n";
      } catch (const std::exception& e) {
        cell.error = e.what();
        std::lock_guard<std::mutex> g(log);
        std::cerr << "cell " << cell.chips << "/" << cell.size << "/" << to_string(cell.policy)
                  << " failed: " << e.what() << "\n";
      }
    }
  };
  const unsigned jobs = a.jobs ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::min<std::size_t>(jobs, cells.size()); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // VAS in the same (chips, size) cell is the baseline when present.
  for (auto& c : cells) {
    if (!c.report) continue;
    for (const auto& b : cells) {
      if (b.report && b.policy == PolicyKind::kVas && b.chips == c.chips && b.size == c.size) {
        apply_baseline(*c.report, *b.report);
      }
    }
  }

  std::ostringstream csv;
  csv.precision(12);
  csv << "chips,transfer_size,policy,status";
  for (const auto& [k, v] : report_scalars(MetricsReport{})) csv << ',' << k;
  csv << '\n';
  bool failed = false;
  for (const auto& c : cells) {
    csv << c.chips << ',' << c.size << ',' << to_string(c.policy) << ',' << (c.report ? "ok" : "error");
    if (c.report) {
      for (const auto& [k, v] : report_scalars(*c.report)) {
        csv << ',';
        if (!std::isnan(v)) csv << v;
      }
    } else {
      failed = true;
      for (std::size_t k = 0; k < report_scalars(MetricsReport{}).size(); ++k) csv << ',';
    }
    csv << '\n';
  }
  write_atomic(out_dir() / "sweep.csv", csv.str());
  std::cout << "wrote " << (out_dir() / "sweep.csv").string() << " (" << cells.size() << " cells)\n";
  return failed ? kRuntimeError : kOk;
}

int cmd_validate(const std::string& path, std::size_t budget) {
  ParseOptions opt;
  opt.error_budget = budget;
  const auto res = parse_trace_file(path, opt);
  std::uint64_t reads = 0, bytes = 0;
  for (const auto& r : res.records) {
    reads += r.kind == IoKind::kRead;
    bytes += r.length;
  }
  std::cout << "records=" << res.records.size() << " reads=" << reads << " writes=" << res.records.size() - reads
            << " bytes=" << bytes << " span_us=" << to_us(res.records.back().time)
            << " malformed=" << res.malformed << " reordered=" << res.reordered << " digest=0x" << std::hex
            << workload_digest(res.records) << std::dec << "\n";
  return kOk;
}

int cmd_print(const std::string& config, const std::vector<std::string>& overrides, const std::string& format) {
  const RunConfig cfg = resolve(config, overrides);
  if (format == "json") {
    std::cout << config_to_json(cfg).dump(2) << "\n";
  } else {
    std::cout << config_to_ini(cfg);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Many-chip SSD scheduling simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one simulation and write its report");
  run_cmd->add_option("-c,--config", run.config, "INI config, or a JSON report to re-drive");
  run_cmd->add_option("-p,--policy", run.policy, "vas | pas | spk1 | spk2 | spk3");
  run_cmd->add_option("-t,--trace", run.trace, "MSR-format trace file");
  run_cmd->add_option("-b,--baseline", run.baseline, "Report of a baseline run on the same workload");
  run_cmd->add_option("-n,--name", run.name, "Output file stem (default: policy name)");
  run_cmd->add_option("-s,--set", run.overrides, "section.key=value override")->take_all();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Cross product over chips, transfer size and policy");
  sweep_cmd->add_option("-c,--config", sweep.config, "Base INI config");
  sweep_cmd->add_option("--chips", sweep.chips, "Comma list of square chip counts");
  sweep_cmd->add_option("--sizes", sweep.sizes, "Comma list of transfer sizes (K/M suffixes)");
  sweep_cmd->add_option("--policies", sweep.policies, "Comma list of policies");
  sweep_cmd->add_option("-j,--jobs", sweep.jobs, "Parallel cells (default: hardware threads)");
  sweep_cmd->add_option("-s,--set", sweep.overrides, "section.key=value override")->take_all();

  std::string trace_path;
  std::size_t budget = ParseOptions{}.error_budget;
  auto* val_cmd = app.add_subcommand("validate-trace", "Parse a trace and print its statistics");
  val_cmd->add_option("trace", trace_path, "Trace file")->required();
  val_cmd->add_option("--error-budget", budget, "Malformed lines tolerated");

  std::string pc_config, pc_format = "ini";
  std::vector<std::string> pc_overrides;
  auto* pc_cmd = app.add_subcommand("print-config", "Print the effective configuration");
  pc_cmd->add_option("-c,--config", pc_config, "Config file");
  pc_cmd->add_option("-s,--set", pc_overrides, "section.key=value override")->take_all();
  pc_cmd->add_option("-f,--format", pc_format, "ini | json")->check(CLI::IsMember({"ini", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*val_cmd) return cmd_validate(trace_path, budget);
    if (*pc_cmd) return cmd_print(pc_config, pc_overrides, pc_format);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
