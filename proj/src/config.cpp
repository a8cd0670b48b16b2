#include "sprinkler/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

namespace sprinkler {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"geometry",
       {"channels", "chips_per_channel", "dies_per_chip", "planes_per_die", "blocks_per_die", "pages_per_block",
        "page_size"}},
      {"timing",
       {"read_us", "program_fast_us", "program_slow_us", "erase_us", "bus_transfer_us", "bus_mts", "command_us",
        "decision_window_us"}},
      {"queue", {"depth", "arrival"}},
      {"ftl",
       {"export_fraction", "gc_threshold", "victim_policy", "precondition", "precondition_fill",
        "precondition_io_bytes", "precondition_seed", "readdressing", "layout"}},
      {"workload",
       {"source", "trace", "error_budget", "count", "read_fraction", "sizes", "pattern", "hot_fraction",
        "hot_ratio", "arrival", "rate_iops", "address_space", "alignment", "fua_fraction", "seed"}},
      {"policy", {"name"}},
  };
  return keys;
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
T get(const pt::ptree& t, const std::string& path, T fallback) {
  auto v = t.get_optional<std::string>(path);
  if (!v) return fallback;
  try {
    return t.get<T>(path);
  } catch (const pt::ptree_error&) {
    throw ConfigError("config: bad value '" + *v + "' for " + path);
  }
}

bool get_bool(const pt::ptree& t, const std::string& path, bool fallback) {
  auto v = t.get_optional<std::string>(path);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config: bad boolean '" + *v + "' for " + path);
}

std::uint64_t get_bytes(const pt::ptree& t, const std::string& path, std::uint64_t fallback) {
  auto v = t.get_optional<std::string>(path);
  return v ? parse_bytes(*v) : fallback;
}

}  // namespace

std::uint64_t parse_bytes(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\t') s += c;
  }
  if (s.empty()) throw ConfigError("empty byte count");
  std::uint64_t mult = 1;
  switch (s.back()) {
    case 'K':
    case 'k':
      mult = 1ull << 10;
      break;
    case 'M':
    case 'm':
      mult = 1ull << 20;
      break;
    case 'G':
    case 'g':
      mult = 1ull << 30;
      break;
    default:
      break;
  }
  if (mult != 1) s.pop_back();
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("bad byte count '" + text + "'");
  return v * mult;
}

std::vector<std::uint64_t> parse_byte_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_bytes(item));
  if (out.empty()) throw ConfigError("empty size list");
  return out;
}

void RunConfig::validate() const {
  sim.validate();
  if (workload.source == WorkloadSource::kSynthetic) {
    workload.synth.validate();
  } else if (workload.trace_path.empty()) {
    throw ConfigError("workload: trace source needs a trace path");
  }
}

RunConfig config_from_ptree(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }

  RunConfig c;
  Geometry& g = c.sim.geometry;
  g.num_channels = get(tree, "geometry.channels", g.num_channels);
  g.chips_per_channel = get(tree, "geometry.chips_per_channel", g.chips_per_channel);
  g.dies_per_chip = get(tree, "geometry.dies_per_chip", g.dies_per_chip);
  g.planes_per_die = get(tree, "geometry.planes_per_die", g.planes_per_die);
  g.blocks_per_die = get(tree, "geometry.blocks_per_die", g.blocks_per_die);
  g.pages_per_block = get(tree, "geometry.pages_per_block", g.pages_per_block);
  g.page_size = static_cast<std::uint32_t>(get_bytes(tree, "geometry.page_size", g.page_size));

  TimingParams& t = c.sim.timing;
  auto us = [&](const char* key, SimTime& field) {
    field = from_us(get(tree, std::string("timing.") + key, to_us(field)));
  };
  us("read_us", t.read_cell);
  us("program_fast_us", t.program_cell_fast);
  us("program_slow_us", t.program_cell_slow);
  us("erase_us", t.erase_cell);
  us("bus_transfer_us", t.bus_transfer_per_page);
  us("command_us", t.command_overhead);
  us("decision_window_us", t.txn_decision_window);
  if (auto mts = tree.get_optional<double>("timing.bus_mts")) {
    if (tree.get_optional<std::string>("timing.bus_transfer_us")) {
      throw ConfigError("config: set either timing.bus_mts or timing.bus_transfer_us, not both");
    }
    t.bus_transfer_per_page = TimingParams::transfer_time(g.page_size, *mts);
  }

  c.sim.queue_depth = get(tree, "queue.depth", c.sim.queue_depth);
  c.sim.arrival = parse_arrival_mode(get<std::string>(tree, "queue.arrival", std::string(to_string(c.sim.arrival))));

  FtlConfig& f = c.sim.ftl;
  f.export_fraction = get(tree, "ftl.export_fraction", f.export_fraction);
  f.gc.free_block_threshold = get(tree, "ftl.gc_threshold", f.gc.free_block_threshold);
  const auto victim = get<std::string>(tree, "ftl.victim_policy", "greedy_max_invalid");
  if (victim != "greedy_max_invalid") throw ConfigError("config: unknown victim policy '" + victim + "'");
  Precondition& pre = c.sim.precondition;
  pre.mode = parse_precondition_mode(get<std::string>(tree, "ftl.precondition", std::string(to_string(pre.mode))));
  pre.fill = get(tree, "ftl.precondition_fill", pre.fill);
  f.gc.precondition_fill = pre.fill;
  pre.io_bytes = get_bytes(tree, "ftl.precondition_io_bytes", pre.io_bytes);
  pre.seed = get(tree, "ftl.precondition_seed", pre.seed);
  c.sim.readdressing = get_bool(tree, "ftl.readdressing", c.sim.readdressing);
  c.layout_path = get<std::string>(tree, "ftl.layout", "");
  if (!c.layout_path.empty()) pre.layout = load_layout(c.layout_path);

  WorkloadConfig& w = c.workload;
  const auto source = get<std::string>(tree, "workload.source", "synthetic");
  if (source == "synthetic") {
    w.source = WorkloadSource::kSynthetic;
  } else if (source == "trace") {
    w.source = WorkloadSource::kTrace;
  } else {
    throw ConfigError("config: unknown workload source '" + source + "'");
  }
  w.trace_path = get<std::string>(tree, "workload.trace", "");
  w.parse.error_budget = get(tree, "workload.error_budget", w.parse.error_budget);
  SynthSpec& s = w.synth;
  s.count = get(tree, "workload.count", s.count);
  s.read_fraction = get(tree, "workload.read_fraction", s.read_fraction);
  if (auto sizes = tree.get_optional<std::string>("workload.sizes")) s.sizes = parse_byte_list(*sizes);
  s.pattern = parse_address_pattern(get<std::string>(tree, "workload.pattern", std::string(to_string(s.pattern))));
  s.hot_fraction = get(tree, "workload.hot_fraction", s.hot_fraction);
  s.hot_ratio = get(tree, "workload.hot_ratio", s.hot_ratio);
  s.arrival = parse_arrival_pattern(get<std::string>(tree, "workload.arrival", std::string(to_string(s.arrival))));
  s.rate_iops = get(tree, "workload.rate_iops", s.rate_iops);
  s.address_space = get_bytes(tree, "workload.address_space", s.address_space);
  s.alignment = get_bytes(tree, "workload.alignment", s.alignment);
  s.fua_fraction = get(tree, "workload.fua_fraction", s.fua_fraction);
  s.seed = get(tree, "workload.seed", s.seed);

  c.sim.policy = parse_policy(get<std::string>(tree, "policy.name", std::string(to_string(c.sim.policy))));
  c.validate();
  return c;
}

pt::ptree config_to_ptree(const RunConfig& c) {
  pt::ptree t;
  const Geometry& g = c.sim.geometry;
  t.put("geometry.channels", g.num_channels);
  t.put("geometry.chips_per_channel", g.chips_per_channel);
  t.put("geometry.dies_per_chip", g.dies_per_chip);
  t.put("geometry.planes_per_die", g.planes_per_die);
  t.put("geometry.blocks_per_die", g.blocks_per_die);
  t.put("geometry.pages_per_block", g.pages_per_block);
  t.put("geometry.page_size", g.page_size);

  const TimingParams& tm = c.sim.timing;
  t.put("timing.read_us", fmt(to_us(tm.read_cell)));
  t.put("timing.program_fast_us", fmt(to_us(tm.program_cell_fast)));
  t.put("timing.program_slow_us", fmt(to_us(tm.program_cell_slow)));
  t.put("timing.erase_us", fmt(to_us(tm.erase_cell)));
  t.put("timing.bus_transfer_us", fmt(to_us(tm.bus_transfer_per_page)));
  t.put("timing.command_us", fmt(to_us(tm.command_overhead)));
  t.put("timing.decision_window_us", fmt(to_us(tm.txn_decision_window)));

  t.put("queue.depth", c.sim.queue_depth);
  t.put("queue.arrival", std::string(to_string(c.sim.arrival)));

  t.put("ftl.export_fraction", fmt(c.sim.ftl.export_fraction));
  t.put("ftl.gc_threshold", fmt(c.sim.ftl.gc.free_block_threshold));
  t.put("ftl.victim_policy", "greedy_max_invalid");
  t.put("ftl.precondition", std::string(to_string(c.sim.precondition.mode)));
  t.put("ftl.precondition_fill", fmt(c.sim.precondition.fill));
  t.put("ftl.precondition_io_bytes", c.sim.precondition.io_bytes);
  t.put("ftl.precondition_seed", c.sim.precondition.seed);
  t.put("ftl.readdressing", c.sim.readdressing ? "true" : "false");
  if (!c.layout_path.empty()) t.put("ftl.layout", c.layout_path);

  const WorkloadConfig& w = c.workload;
  t.put("workload.source", w.source == WorkloadSource::kSynthetic ? "synthetic" : "trace");
  if (!w.trace_path.empty()) t.put("workload.trace", w.trace_path);
  t.put("workload.error_budget", w.parse.error_budget);
  const SynthSpec& s = w.synth;
  t.put("workload.count", s.count);
  t.put("workload.read_fraction", fmt(s.read_fraction));
  std::string sizes;
  for (auto v : s.sizes) sizes += (sizes.empty() ? "" : ",") + std::to_string(v);
  t.put("workload.sizes", sizes);
  t.put("workload.pattern", std::string(to_string(s.pattern)));
  t.put("workload.hot_fraction", fmt(s.hot_fraction));
  t.put("workload.hot_ratio", fmt(s.hot_ratio));
  t.put("workload.arrival", std::string(to_string(s.arrival)));
  t.put("workload.rate_iops", fmt(s.rate_iops));
  t.put("workload.address_space", s.address_space);
  t.put("workload.alignment", s.alignment);
  t.put("workload.fua_fraction", fmt(s.fua_fraction));
  t.put("workload.seed", s.seed);

  t.put("policy.name", std::string(to_string(c.sim.policy)));
  return t;
}

namespace {

void apply(pt::ptree& t, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("override '" + o + "' is not section.key=value");
    }
    t.put(o.substr(0, eq), o.substr(eq + 1));
  }
}

pt::ptree json_to_ptree(const nlohmann::json& j) {
  pt::ptree t;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config: section " + section + " is not an object");
    for (const auto& [key, value] : body.items()) {
      std::string text;
      if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_number_float()) {
        text = fmt(value.get<double>());
      } else {
        text = value.dump();
      }
      t.put(pt::ptree::path_type(section + "." + key, '.'), text);
    }
  }
  return t;
}

}  // namespace

RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& overrides) {
  pt::ptree t = config_to_ptree(base);
  apply(t, overrides);
  return config_from_ptree(t);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  pt::ptree t;
  // A report (or config echo) in JSON drives the same run as its INI form.
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    t = json_to_ptree(j.contains("config") ? j["config"] : j);
  } else {
    try {
      pt::read_ini(in, t);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  apply(t, overrides);
  // Data files named by a config are found next to it.
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  for (const char* key : {"workload.trace", "ftl.layout"}) {
    if (auto v = t.get_optional<std::string>(key); v && !v->empty() && std::filesystem::path(*v).is_relative()) {
      t.put(key, (base / *v).lexically_normal().string());
    }
  }
  return config_from_ptree(t);
}

std::string config_to_ini(const RunConfig& config) {
  std::ostringstream os;
  pt::write_ini(os, config_to_ptree(config));
  return os.str();
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, body] : config_to_ptree(config)) {
    for (const auto& [key, value] : body) {
      const std::string& v = value.data();
      nlohmann::json parsed = nlohmann::json::parse(v, nullptr, false);
      // Keep numbers and booleans typed; anything else stays a string.
      if (!parsed.is_discarded() && (parsed.is_number() || parsed.is_boolean()) && key != "sizes") {
        j[section][key] = parsed;
      } else {
        j[section][key] = v;
      }
    }
  }
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) { return config_from_ptree(json_to_ptree(j)); }

std::vector<Placement> load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file: " + path);
  std::vector<Placement> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string f[4];
    std::uint64_t v[4] = {};
    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) {
      ok = static_cast<bool>(std::getline(ss, f[i], ','));
      if (ok) {
        auto b = f[i].find_first_not_of(" \t");
        auto e = f[i].find_last_not_of(" \t\r");
        ok = b != std::string::npos;
        if (ok) {
          auto [p, ec] = std::from_chars(f[i].data() + b, f[i].data() + e + 1, v[i]);
          ok = ec == std::errc{} && p == f[i].data() + e + 1;
        }
      }
    }
    if (!ok) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected vpage,chip,die,plane");
    out.push_back(Placement{v[0], static_cast<ChipIndex>(v[1]), static_cast<std::uint32_t>(v[2]),
                            static_cast<std::uint32_t>(v[3])});
  }
  return out;
}

std::vector<TraceRecord> load_workload(const WorkloadConfig& config) {
  if (config.source == WorkloadSource::kTrace) return parse_trace_file(config.trace_path, config.parse).records;
  return generate(config.synth);
}

}  // namespace sprinkler
