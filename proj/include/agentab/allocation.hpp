#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agentab/common.hpp"
#include "agentab/persona.hpp"

namespace agentab {

struct Arm {
  std::string name;
  std::string variant_id;

  bool operator==(const Arm&) const = default;
};

struct Allocation {
  std::map<std::string, std::string> assignment;  // persona id -> arm name
  std::uint64_t seed = 0;
  int attempt = 1;  // 1-based index of the rerandomization attempt

  std::vector<std::string> Members(std::string_view arm) const;  // sorted ids
  std::map<std::string, int> ArmSizes() const;

  bool operator==(const Allocation&) const = default;
};

// Seeded shuffle, then arms dealt round-robin: sizes differ by at most one.
Allocation Allocate(const std::vector<Persona>& personas, const std::vector<Arm>& arms, std::uint64_t seed);

enum class MetricKind { kSmd, kTvd };
std::string_view ToString(MetricKind k);

struct BalanceMetric {
  std::string attribute;
  MetricKind kind = MetricKind::kSmd;
  double value = 0.0;
};

struct BalanceReport {
  std::vector<BalanceMetric> per_attribute;  // spec attribute order
  bool passed = true;
  double threshold = 0.1;

  double MaxValue() const;
};

// |mean_a - mean_b| / sqrt((var_a + var_b) / 2) with sample variances; a
// single-member arm contributes variance 0. Zero pooled sd: 0 when the means
// agree, +inf otherwise.
double StandardizedMeanDifference(const std::vector<double>& a, const std::vector<double>& b);
// Half the L1 distance between the label frequency vectors.
double TotalVariationDistance(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Requires exactly two non-empty arms in the allocation.
BalanceReport BalanceMetrics(const Allocation& alloc, const std::vector<Persona>& personas,
                             const std::vector<AttributeSpec>& attributes, double threshold = 0.1);

struct RerandomizeResult {
  Allocation allocation;
  BalanceReport report;
  bool passed = false;
  int attempts = 0;  // attempts evaluated
};

inline constexpr double kDefaultBalanceThreshold = 0.1;
inline constexpr int kDefaultMaxAttempts = 100;

// Tries seeds seed, seed+1, ...; returns the first passing allocation, or
// the attempt with the smallest worst-case metric once max_attempts are spent.
RerandomizeResult Rerandomize(const std::vector<Persona>& personas, const std::vector<Arm>& arms,
                              const std::vector<AttributeSpec>& attributes, double threshold, int max_attempts,
                              std::uint64_t seed);

Json ToJson(const BalanceReport& r);
BalanceReport BalanceReportFromJson(const Json& j);
Json AllocationToJson(const Allocation& a, const BalanceReport& r);
Allocation AllocationFromJson(const Json& j);

}  // namespace agentab
