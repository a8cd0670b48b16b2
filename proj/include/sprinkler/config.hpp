#pragma once

#include <string>
#include <vector>

#include <boost/property_tree/ptree_fwd.hpp>
#include <nlohmann/json_fwd.hpp>

#include "sprinkler/engine.hpp"
#include "sprinkler/workload.hpp"

namespace sprinkler {

enum class WorkloadSource : std::uint8_t { kSynthetic, kTrace };

struct WorkloadConfig {
  WorkloadSource source = WorkloadSource::kSynthetic;
  std::string trace_path;
  ParseOptions parse;
  SynthSpec synth;
};

struct RunConfig {
  SimConfig sim;
  WorkloadConfig workload;
  std::string layout_path;  // source of sim.precondition.layout, if any

  void validate() const;
};

// Sections [geometry] [timing] [queue] [ftl] [workload] [policy]. Unknown
// keys are rejected so typos do not silently fall back to defaults.
RunConfig config_from_ptree(const boost::property_tree::ptree& tree);
boost::property_tree::ptree config_to_ptree(const RunConfig& config);

// `overrides` are "section.key=value" strings applied on top of the file.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& overrides);

std::string config_to_ini(const RunConfig& config);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);

// Byte counts accept K/M/G suffixes (powers of 1024).
std::uint64_t parse_bytes(const std::string& text);
std::vector<std::uint64_t> parse_byte_list(const std::string& text);

std::vector<TraceRecord> load_workload(const WorkloadConfig& config);

// CSV lines "vpage,chip,die,plane"; '#' starts a comment line.
std::vector<Placement> load_layout(const std::string& path);

}  // namespace sprinkler
