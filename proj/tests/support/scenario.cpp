#include "scenario.hpp"

namespace sprinkler::testing {

std::string config_dir() { return SPRINKLER_CONFIG_DIR; }

RunConfig nine_chip(PolicyKind policy) {
  RunConfig c = load_config(config_dir() + "/nine_chip.ini");
  c.sim.policy = policy;
  return c;
}

RecordedRun run_recorded(const SimConfig& sim, std::vector<TraceRecord> workload) {
  RecordedRun out{MetricsReport{}, Recorder(sim.geometry)};
  Engine engine(sim, std::move(workload));
  engine.set_observer(&out.log);
  out.report = engine.run();
  return out;
}

RandomCase random_case(std::uint64_t seed, PolicyKind policy) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  RandomCase c;
  Geometry& g = c.sim.geometry;
  g.num_channels = pick(1, 3);
  g.chips_per_channel = pick(1, 3);
  g.dies_per_chip = pick(1, 2);
  g.planes_per_die = pick(1, 4);
  g.blocks_per_die = g.planes_per_die * pick(4, 6);
  g.pages_per_block = pick(4, 8);
  g.page_size = 2048;

  TimingParams& t = c.sim.timing;
  t.read_cell = from_us(pick(5, 40));
  t.program_cell_fast = from_us(pick(20, 60));
  t.program_cell_slow = from_us(pick(60, 200));
  t.erase_cell = from_us(pick(100, 300));
  t.bus_transfer_per_page = from_us(pick(1, 15));
  t.command_overhead = from_us(0.2 * pick(1, 3));
  t.txn_decision_window = from_us(0.5 * pick(1, 4));

  c.sim.queue_depth = pick(1, 8);
  c.sim.policy = policy;
  c.sim.ftl.export_fraction = 0.6;
  c.sim.ftl.gc.free_block_threshold = 0.2;
  c.sim.arrival = coin(0.5) ? ArrivalMode::kBackToBack : ArrivalMode::kTrace;
  c.sim.readdressing = coin(0.8);
  if (coin(0.5)) {
    c.sim.precondition.mode = Precondition::Mode::kSequential;
    c.sim.precondition.fill = 0.5;
  }

  const std::uint64_t exported =
      static_cast<std::uint64_t>(static_cast<double>(g.raw_pages()) * c.sim.ftl.export_fraction);
  const std::uint32_t ios = pick(1, 24);
  const double reads = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  SimTime now = 0;
  for (std::uint32_t i = 0; i < ios; ++i) {
    TraceRecord r;
    r.kind = coin(reads) ? IoKind::kRead : IoKind::kWrite;
    const std::uint32_t max_pages = static_cast<std::uint32_t>(std::min<std::uint64_t>(exported, 6));
    r.length = std::uint64_t{pick(1, max_pages)} * g.page_size - (coin(0.2) ? pick(1, 2047) : 0);
    r.offset = std::uint64_t{pick(0, static_cast<std::uint32_t>(exported - 1))} * g.page_size +
               (coin(0.1) ? 512 : 0);
    r.fua = coin(0.05);
    now += from_us(pick(0, 60));
    r.time = now;
    c.workload.push_back(r);
  }
  return c;
}

}  // namespace sprinkler::testing
