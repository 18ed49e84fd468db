#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentab/agent.hpp"
#include "agentab/persona.hpp"

namespace agentab {

// ---- distribution functions ----
// Regularized incomplete beta by Lentz's continued fraction (with the
// symmetry swap for x > (a+1)/(a+b+2)); regularized gamma by series below
// x = a+1 and continued fraction above. Target accuracy 1e-12.

double RegularizedIncompleteBeta(double a, double b, double x);
double RegularizedGammaP(double a, double x);
double RegularizedGammaQ(double a, double x);

// P(|T| >= |t|) for Student's t with df degrees of freedom.
double StudentTTwoSidedP(double t, double df);
// P(X >= x) for chi-square with df degrees of freedom.
double ChiSquareSurvival(double x, double df);

// ---- tests ----

enum class TestKind { kPooledT, kWelchT, kChiSquare2x2 };
std::string_view ToString(TestKind k);

struct Effect {
  double absolute_diff = 0.0;              // a - b
  std::optional<double> relative_diff;     // (a - b) / b, absent when b == 0
  double standardized = 0.0;               // Cohen's d (means) or h (proportions)
};

struct TestResult {
  TestKind kind = TestKind::kPooledT;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
  Effect effect;
};

enum class TMode { kPooled, kWelch };

// Requires |a|, |b| >= 2. Both variances zero: t = 0 and p = 1 when the
// means agree, ValidationError("degenerate variance") otherwise.
TestResult TwoSampleT(const std::vector<double>& a, const std::vector<double>& b, TMode mode = TMode::kPooled);

// Rows are arms (a, b), columns success/fail. No continuity correction.
TestResult ChiSquare2x2(long long a_success, long long a_fail, long long b_success, long long b_fail);

// ---- summaries ----

struct ArmSummary {
  std::string arm;
  int n_sessions = 0;
  std::map<ActionKind, double> mean_per_kind;
  double mean_total_actions = 0.0;  // mean of per-trace totals
  double sum_of_kind_means = 0.0;
  int total_purchases = 0;
  int converted_sessions = 0;
  double conversion_rate = 0.0;
  double mean_spend_all = 0.0;
  std::optional<double> mean_spend_converting;
  std::map<OutcomeKind, int> outcome_counts;

  double FailureRate(OutcomeKind k) const;
};

// Throws ValidationError when no trace belongs to `arm`.
ArmSummary Summarize(const std::vector<SessionTrace>& traces, std::string_view arm);

struct MetricTest {
  std::string metric;  // row name in the report
  std::optional<TestResult> result;
  std::string note;    // why the test is absent
};

// Treatment (`a`) against control (`b`): pooled t on each per-kind count,
// total actions, and spend; chi-square on converted vs not converted.
std::vector<MetricTest> CompareArms(const std::vector<SessionTrace>& traces, std::string_view a, std::string_view b);

struct Stratum {
  std::string label;
  std::vector<ArmSummary> summaries;  // arm order as given
  std::vector<MetricTest> tests;      // empty when any arm has < 2 sessions
  bool tests_suppressed = false;
  int n_sessions = 0;
};

// Strata by a persona attribute. Numeric attributes need ascending cut
// points; a value v lands in the bucket [c_i, c_{i+1}). Arms: arms[1] is
// compared against arms[0].
std::vector<Stratum> Stratify(const std::vector<SessionTrace>& traces, const std::map<std::string, Persona>& personas,
                              std::string_view attribute, const std::vector<std::string>& arms,
                              const std::vector<double>& cut_points = {});

struct BaselineSummary {
  std::string label;
  std::string provenance;
  std::map<std::string, std::optional<double>> metrics;  // keyed by report row name

  static BaselineSummary FromJson(const Json& j);
  static BaselineSummary Load(const std::filesystem::path& path);
  Json ToJson() const;
};

// Report rows, in order.
inline constexpr std::array<std::string_view, 8> kReportRows = {
    "search", "click_product", "click_filter_option", "purchase", "stop", "average actions", "# purchases",
    "average spend"};

enum class ReportFormat { kText, kJson };

// summaries[0] is control, summaries[1] the treatment the tests compare.
std::string RenderReport(const std::vector<ArmSummary>& summaries, const std::vector<MetricTest>& tests,
                         const std::optional<BaselineSummary>& baseline, ReportFormat format);
Json ReportJson(const std::vector<ArmSummary>& summaries, const std::vector<MetricTest>& tests,
                const std::optional<BaselineSummary>& baseline);

}  // namespace agentab
