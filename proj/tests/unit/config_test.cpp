#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "scenario.hpp"
#include "sprinkler/config.hpp"

using namespace sprinkler;
namespace fs = std::filesystem;

namespace {

// A scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("sprinkler-config-" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p;
  }
};

const char* kSample = R"([geometry]
channels = 4
chips_per_channel = 2
dies_per_chip = 2
planes_per_die = 2
blocks_per_die = 64
pages_per_block = 32

[timing]
read_us = 25
bus_mts = 400

[queue]
depth = 16
arrival = back_to_back

[ftl]
precondition = random
precondition_fill = 0.8
precondition_io_bytes = 256K

[workload]
count = 250
read_fraction = 0.25
sizes = 4K,16K,64K
pattern = sequential
address_space = 32M

[policy]
name = spk2
)";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("ini values land in the run") {
    TempDir dir;
    const RunConfig c = load_config(dir.write("a.ini", kSample).string());
    CHECK(c.sim.geometry.num_channels == 4);
    CHECK(c.sim.geometry.total_chips() == 8);
    CHECK(c.sim.timing.read_cell == from_us(25));
    CHECK(c.sim.timing.bus_transfer_per_page == TimingParams::transfer_time(2048, 400));
    CHECK(c.sim.queue_depth == 16);
    CHECK(c.sim.arrival == ArrivalMode::kBackToBack);
    CHECK(c.sim.precondition.mode == Precondition::Mode::kRandom);
    CHECK(c.sim.precondition.io_bytes == 256 * 1024);
    CHECK(c.workload.synth.sizes == std::vector<std::uint64_t>{4096, 16384, 65536});
    CHECK(c.workload.synth.address_space == 32ull << 20);
    CHECK(c.workload.synth.pattern == AddressPattern::kSequential);
    CHECK(c.sim.policy == PolicyKind::kSpk2);
  }

  TEST_CASE("ini and json round trips") {
    TempDir dir;
    const RunConfig c = load_config(dir.write("a.ini", kSample).string());

    const RunConfig from_ini = load_config(dir.write("b.ini", config_to_ini(c)).string());
    CHECK(config_to_json(from_ini) == config_to_json(c));

    const nlohmann::json j = config_to_json(c);
    CHECK(j.at("geometry").at("channels").get<int>() == 4);
    const RunConfig from_json = config_from_json(j);
    CHECK(config_to_json(from_json) == j);

    // A report carrying the config under "config" re-drives the run.
    const nlohmann::json report{{"config", j}, {"report", {{"ios", 1}}}};
    const RunConfig from_report = load_config(dir.write("r.json", report.dump()).string());
    CHECK(config_to_json(from_report) == j);
  }

  TEST_CASE("rejects mistakes") {
    TempDir dir;
    CHECK_THROWS_AS(load_config(dir.write("k.ini", "[geometry]\nchanels = 2\n").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("s.ini", "[geomtry]\nchannels = 2\n").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("v.ini", "[queue]\ndepth = many\n").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("p.ini", "[policy]\nname = sjf\n").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("t.ini", "[workload]\nsource = trace\n").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("z.ini", "[geometry]\nchannels = 0\n").string()), ConfigError);
    CHECK_THROWS_AS(
        load_config(dir.write("b.ini", "[timing]\nbus_mts = 100\nbus_transfer_us = 3\n").string()),
        ConfigError);
    CHECK_THROWS_AS(load_config((dir.path / "missing.ini").string()), ConfigError);
    CHECK_THROWS_AS(load_config(dir.write("j.json", "{not json").string()), ConfigError);
  }

  TEST_CASE("overrides") {
    TempDir dir;
    const auto path = dir.write("a.ini", kSample).string();
    const RunConfig c = load_config(path, {"policy.name=vas", "geometry.channels=8"});
    CHECK(c.sim.policy == PolicyKind::kVas);
    CHECK(c.sim.geometry.num_channels == 8);
    const RunConfig d = apply_overrides(c, {"workload.count=7"});
    CHECK(d.workload.synth.count == 7);
    CHECK(d.sim.geometry.num_channels == 8);
    CHECK_THROWS_AS(load_config(path, {"policy.name"}), ConfigError);
    CHECK_THROWS_AS(load_config(path, {"policy.colour=red"}), ConfigError);
  }

  TEST_CASE("data files resolve next to the config") {
    TempDir dir;
    dir.write("sub/pages.csv", "# vpage,chip,die,plane\n0,1,0,1\n\n3,0,1,0\n");
    dir.write("sub/t.csv", "0,h,0,Read,0,2048,0\n");
    const auto ini = dir.write("sub/run.ini",
                               "[ftl]\nlayout = pages.csv\n[workload]\nsource = trace\ntrace = t.csv\n");
    const RunConfig c = load_config(ini.string());
    CHECK(fs::path(c.workload.trace_path) == dir.path / "sub" / "t.csv");
    CHECK(c.sim.precondition.layout == std::vector<Placement>{{0, 1, 0, 1}, {3, 0, 1, 0}});
    CHECK(load_workload(c.workload).size() == 1);

    dir.write("sub/bad.csv", "0,1,0\n");
    try {
      load_layout((dir.path / "sub" / "bad.csv").string());
      FAIL("expected a layout error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("bad.csv:1") != std::string::npos);
    }
  }

  TEST_CASE("shipped configs load") {
    for (const auto& entry : fs::directory_iterator(testing::config_dir())) {
      if (entry.path().extension() != ".ini") continue;
      INFO(entry.path().string());
      CHECK_NOTHROW(load_config(entry.path().string()));
    }
  }

  TEST_CASE("byte counts") {
    CHECK(parse_bytes("4096") == 4096);
    CHECK(parse_bytes("16K") == 16384);
    CHECK(parse_bytes("2m") == 2u << 20);
    CHECK(parse_bytes("1G") == 1ull << 30);
    CHECK(parse_byte_list("4K, 8K") == std::vector<std::uint64_t>{4096, 8192});
    CHECK_THROWS_AS(parse_bytes("K"), ConfigError);
    CHECK_THROWS_AS(parse_bytes("12Q"), ConfigError);
    CHECK_THROWS_AS(parse_byte_list(""), ConfigError);
  }
}
