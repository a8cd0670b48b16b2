#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sprinkler::testing {

struct PropertyResult {
  std::string name;
  std::uint64_t cases = 0;  // cases run
  bool passed = true;
  std::uint64_t seed = 0;   // first failing seed
  std::string message;
};

using Property = std::function<PropertyResult(std::uint64_t first_seed, std::uint64_t cases)>;

PropertyResult conservation(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult retirement_and_dma(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult transaction_legality(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult ftl_audit_storm(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult determinism(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult faro_optimality(std::uint64_t first_seed, std::uint64_t cases);
PropertyResult fua_order(std::uint64_t first_seed, std::uint64_t cases);

struct NamedProperty {
  const char* name;
  Property run;
};

const std::vector<NamedProperty>& all_properties();

std::string describe(const PropertyResult& r);

}  // namespace sprinkler::testing
