#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sprinkler/types.hpp"

namespace sprinkler {

class TraceError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct TraceRecord {
  SimTime time = 0;  // since the first record
  IoKind kind = IoKind::kRead;
  std::uint64_t offset = 0;  // bytes
  std::uint64_t length = 0;  // bytes
  bool fua = false;

  bool operator==(const TraceRecord&) const = default;
};

struct ParseOptions {
  std::size_t error_budget = 16;  // malformed lines tolerated before failing
};

struct ParseResult {
  std::vector<TraceRecord> records;
  std::size_t malformed = 0;
  std::size_t reordered = 0;  // records that arrived earlier than a predecessor
};

// MSR Cambridge block trace CSV:
//   Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime
// Timestamps are Windows filetime ticks (100 ns). An optional eighth field
// "FUA" marks force-unit-access requests.
ParseResult parse_trace(std::istream& in, const ParseOptions& options = {});
ParseResult parse_trace_file(const std::string& path, const ParseOptions& options = {});

// Writes records back in the same CSV layout; ticks start at zero.
void serialize_trace(std::ostream& out, const std::vector<TraceRecord>& records);

enum class AddressPattern : std::uint8_t { kSequential, kUniformRandom, kLocality };
enum class ArrivalPattern : std::uint8_t { kClosedLoop, kPoisson };

std::string_view to_string(AddressPattern p);
std::string_view to_string(ArrivalPattern p);
AddressPattern parse_address_pattern(std::string_view s);
ArrivalPattern parse_arrival_pattern(std::string_view s);

struct SynthSpec {
  std::uint64_t count = 1000;
  double read_fraction = 1.0;
  // One entry means a fixed size; several are drawn uniformly.
  std::vector<std::uint64_t> sizes{4096};
  AddressPattern pattern = AddressPattern::kUniformRandom;
  double hot_fraction = 0.1;  // locality: share of the space that is hot
  double hot_ratio = 0.9;     // locality: share of accesses that go there
  ArrivalPattern arrival = ArrivalPattern::kClosedLoop;
  double rate_iops = 10000.0;  // poisson
  std::uint64_t address_space = 64ull << 20;  // bytes
  std::uint64_t alignment = 4096;
  double fua_fraction = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<TraceRecord> generate(const SynthSpec& spec);

// FNV-1a over every record field; pairs a run with its baseline.
std::uint64_t workload_digest(const std::vector<TraceRecord>& records);

}  // namespace sprinkler
