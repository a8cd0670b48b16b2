#include "sprinkler/workload.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace sprinkler {

namespace {

constexpr SimTime kNsPerTick = 100;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool to_u64(std::string_view s, std::uint64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

struct RawRecord {
  std::uint64_t ticks;
  TraceRecord rec;
};

}  // namespace

ParseResult parse_trace(std::istream& in, const ParseOptions& options) {
  ParseResult result;
  std::vector<RawRecord> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;

    std::vector<std::string_view> f;
    while (true) {
      auto comma = sv.find(',');
      f.push_back(trim(sv.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      sv.remove_prefix(comma + 1);
    }

    RawRecord r{};
    bool ok = f.size() >= 6 && to_u64(f[0], r.ticks) && to_u64(f[4], r.rec.offset) &&
              to_u64(f[5], r.rec.length) && r.rec.length > 0;
    if (ok) {
      if (iequals(f[3], "read")) {
        r.rec.kind = IoKind::kRead;
      } else if (iequals(f[3], "write")) {
        r.rec.kind = IoKind::kWrite;
      } else {
        ok = false;
      }
    }
    if (ok && f.size() >= 8) r.rec.fua = iequals(f[7], "fua") || f[7] == "1";
    if (!ok) {
      if (++result.malformed > options.error_budget) {
        throw TraceError("trace: too many malformed lines (line " + std::to_string(lineno) + ")");
      }
      continue;
    }
    raw.push_back(r);
  }
  if (raw.empty()) throw TraceError("trace: no records");

  std::uint64_t high = 0;
  for (const auto& r : raw) {
    if (r.ticks < high) ++result.reordered;
    high = std::max(high, r.ticks);
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.ticks < b.ticks; });
  const std::uint64_t first = raw.front().ticks;
  result.records.reserve(raw.size());
  for (auto& r : raw) {
    r.rec.time = static_cast<SimTime>(r.ticks - first) * kNsPerTick;
    result.records.push_back(r.rec);
  }
  return result;
}

ParseResult parse_trace_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path);
  try {
    return parse_trace(in, options);
  } catch (const TraceError& e) {
    throw TraceError(path + ": " + e.what());
  }
}

void serialize_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) {
    out << r.time / kNsPerTick << ",host,0," << (r.kind == IoKind::kRead ? "Read" : "Write") << ','
        << r.offset << ',' << r.length << ",0";
    if (r.fua) out << ",FUA";
    out << '\n';
  }
}

std::string_view to_string(AddressPattern p) {
  switch (p) {
    case AddressPattern::kSequential:
      return "sequential";
    case AddressPattern::kUniformRandom:
      return "uniform_random";
    case AddressPattern::kLocality:
      return "locality";
  }
  return "?";
}

std::string_view to_string(ArrivalPattern p) {
  return p == ArrivalPattern::kClosedLoop ? "closed_loop" : "poisson";
}

AddressPattern parse_address_pattern(std::string_view s) {
  for (auto p : {AddressPattern::kSequential, AddressPattern::kUniformRandom, AddressPattern::kLocality}) {
    if (to_string(p) == s) return p;
  }
  throw ConfigError("unknown address pattern '" + std::string(s) + "'");
}

ArrivalPattern parse_arrival_pattern(std::string_view s) {
  for (auto p : {ArrivalPattern::kClosedLoop, ArrivalPattern::kPoisson}) {
    if (to_string(p) == s) return p;
  }
  throw ConfigError("unknown arrival pattern '" + std::string(s) + "'");
}

void SynthSpec::validate() const {
  auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!frac(read_fraction) || !frac(hot_fraction) || !frac(hot_ratio) || !frac(fua_fraction)) {
    throw ConfigError("workload: fractions must lie in [0, 1]");
  }
  if (sizes.empty()) throw ConfigError("workload: no request sizes");
  if (alignment == 0) throw ConfigError("workload: alignment must be positive");
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("workload: request size must be positive");
    if (s > address_space) throw ConfigError("workload: request larger than the address space");
  }
  if (arrival == ArrivalPattern::kPoisson && !(rate_iops > 0.0)) {
    throw ConfigError("workload: poisson rate must be positive");
  }
  if (pattern == AddressPattern::kLocality && (hot_fraction <= 0.0 || hot_fraction >= 1.0)) {
    throw ConfigError("workload: locality hot_fraction must be in (0, 1)");
  }
}

std::vector<TraceRecord> generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_size(0, spec.sizes.size() - 1);
  std::exponential_distribution<double> gap(spec.arrival == ArrivalPattern::kPoisson ? spec.rate_iops : 1.0);

  auto aligned_in = [&](std::uint64_t lo, std::uint64_t hi, std::uint64_t size) {
    // Aligned start in [lo, hi - size].
    const std::uint64_t top = hi > lo + size ? (hi - size - lo) / spec.alignment : 0;
    std::uniform_int_distribution<std::uint64_t> d(0, top);
    return lo + d(rng) * spec.alignment;
  };

  std::vector<TraceRecord> out;
  out.reserve(spec.count);
  std::uint64_t cursor = 0;
  double t_sec = 0.0;
  const auto hot_end = static_cast<std::uint64_t>(spec.hot_fraction * static_cast<double>(spec.address_space));
  for (std::uint64_t i = 0; i < spec.count; ++i) {
    TraceRecord r;
    r.kind = unit(rng) < spec.read_fraction ? IoKind::kRead : IoKind::kWrite;
    r.length = spec.sizes[pick_size(rng)];
    switch (spec.pattern) {
      case AddressPattern::kSequential:
        if (cursor + r.length > spec.address_space) cursor = 0;
        r.offset = cursor;
        cursor += r.length;
        break;
      case AddressPattern::kUniformRandom:
        r.offset = aligned_in(0, spec.address_space, r.length);
        break;
      case AddressPattern::kLocality: {
        const bool hot = unit(rng) < spec.hot_ratio;
        if (hot && hot_end >= r.length) {
          r.offset = aligned_in(0, hot_end, r.length);
        } else {
          r.offset = aligned_in(std::min(hot_end, spec.address_space - r.length), spec.address_space, r.length);
        }
        break;
      }
    }
    r.fua = spec.fua_fraction > 0.0 && unit(rng) < spec.fua_fraction;
    if (spec.arrival == ArrivalPattern::kPoisson && i > 0) t_sec += gap(rng);
    r.time = static_cast<SimTime>(t_sec * 1e9);
    out.push_back(r);
  }
  return out;
}

std::uint64_t workload_digest(const std::vector<TraceRecord>& records) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(records.size());
  for (const auto& r : records) {
    mix(static_cast<std::uint64_t>(r.time));
    mix(static_cast<std::uint64_t>(r.kind));
    mix(r.offset);
    mix(r.length);
    mix(r.fua ? 1 : 0);
  }
  return h;
}

}  // namespace sprinkler
