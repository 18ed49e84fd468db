#include "agentab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace agentab {

// ---- distribution functions ----

namespace {

constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

double LogBeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Continued fraction for I_x(a,b), modified Lentz.
double BetaContinuedFraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

double GammaSeries(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw Error("incomplete gamma: series did not converge");
}

double GammaContinuedFraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw Error("incomplete gamma: continued fraction did not converge");
}

}  // namespace

double RegularizedIncompleteBeta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("incomplete beta: x must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - LogBeta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * BetaContinuedFraction(a, b, x) / a;
  return 1.0 - front * BetaContinuedFraction(b, a, 1.0 - x) / b;
}

double RegularizedGammaP(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("incomplete gamma: a must be > 0");
  if (!(x >= 0.0)) throw ValidationError("incomplete gamma: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? GammaSeries(a, x) : 1.0 - GammaContinuedFraction(a, x);
}

double RegularizedGammaQ(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("incomplete gamma: a must be > 0");
  if (!(x >= 0.0)) throw ValidationError("incomplete gamma: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - GammaSeries(a, x) : GammaContinuedFraction(a, x);
}

double StudentTTwoSidedP(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t distribution: df must be > 0");
  if (std::isnan(t)) throw ValidationError("t distribution: statistic is NaN");
  if (std::isinf(t)) return 0.0;
  return std::clamp(RegularizedIncompleteBeta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

double ChiSquareSurvival(double x, double df) {
  if (!(df > 0.0)) throw ValidationError("chi-square distribution: df must be > 0");
  if (x <= 0.0) return 1.0;
  return std::clamp(RegularizedGammaQ(df / 2.0, x / 2.0), 0.0, 1.0);
}

// ---- tests ----

std::string_view ToString(TestKind k) {
  switch (k) {
    case TestKind::kPooledT: return "pooled_t";
    case TestKind::kWelchT: return "welch_t";
    case TestKind::kChiSquare2x2: return "chi_square_2x2";
  }
  return "pooled_t";
}

namespace {

struct Moments {
  double n, mean, var;
};

Moments MomentsOf(const std::vector<double>& x) {
  Moments m{static_cast<double>(x.size()), 0.0, 0.0};
  m.mean = std::accumulate(x.begin(), x.end(), 0.0) / m.n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= m.n - 1.0;
  return m;
}

std::optional<double> Relative(double diff, double base) {
  if (base == 0.0) return std::nullopt;
  return diff / base;
}

}  // namespace

TestResult TwoSampleT(const std::vector<double>& a, const std::vector<double>& b, TMode mode) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("t test needs at least two observations per sample");
  const Moments ma = MomentsOf(a), mb = MomentsOf(b);
  const double diff = ma.mean - mb.mean;
  TestResult r;
  r.kind = mode == TMode::kPooled ? TestKind::kPooledT : TestKind::kWelchT;
  r.effect.absolute_diff = diff;
  r.effect.relative_diff = Relative(diff, mb.mean);

  if (ma.var == 0.0 && mb.var == 0.0) {
    if (diff != 0.0) throw ValidationError("degenerate variance");
    r.statistic = 0.0;
    r.df = ma.n + mb.n - 2.0;
    r.p_value = 1.0;
    return r;
  }
  double se;
  double sd_for_effect;
  if (mode == TMode::kPooled) {
    r.df = ma.n + mb.n - 2.0;
    const double sp2 = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / r.df;
    se = std::sqrt(sp2 * (1.0 / ma.n + 1.0 / mb.n));
    sd_for_effect = std::sqrt(sp2);
  } else {
    const double va = ma.var / ma.n, vb = mb.var / mb.n;
    se = std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    sd_for_effect = std::sqrt((ma.var + mb.var) / 2.0);
  }
  r.statistic = diff / se;
  r.p_value = StudentTTwoSidedP(r.statistic, r.df);
  r.effect.standardized = diff / sd_for_effect;
  return r;
}

TestResult ChiSquare2x2(long long a_success, long long a_fail, long long b_success, long long b_fail) {
  if (a_success < 0 || a_fail < 0 || b_success < 0 || b_fail < 0) {
    throw ValidationError("chi-square: counts must be >= 0");
  }
  const double a = static_cast<double>(a_success), b = static_cast<double>(a_fail);
  const double c = static_cast<double>(b_success), d = static_cast<double>(b_fail);
  const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 == 0.0 || r2 == 0.0) throw ValidationError("chi-square: zero row total");
  if (c1 == 0.0 || c2 == 0.0) throw ValidationError("chi-square: zero column total");
  const double n = r1 + r2;
  const double cross = a * d - b * c;
  TestResult r;
  r.kind = TestKind::kChiSquare2x2;
  r.statistic = n * cross * cross / (r1 * r2 * c1 * c2);
  r.df = 1.0;
  r.p_value = ChiSquareSurvival(r.statistic, 1.0);
  const double pa = a / r1, pb = c / r2;
  r.effect.absolute_diff = pa - pb;
  r.effect.relative_diff = Relative(pa - pb, pb);
  r.effect.standardized = 2.0 * std::asin(std::sqrt(pa)) - 2.0 * std::asin(std::sqrt(pb));
  return r;
}

// ---- summaries ----

double ArmSummary::FailureRate(OutcomeKind k) const {
  auto it = outcome_counts.find(k);
  if (n_sessions == 0 || it == outcome_counts.end()) return 0.0;
  return static_cast<double>(it->second) / n_sessions;
}

namespace {

ArmSummary SummarizeAllowEmpty(const std::vector<const SessionTrace*>& traces, std::string_view arm) {
  ArmSummary s;
  s.arm = std::string(arm);
  for (auto k : kAllActionKinds) s.mean_per_kind[k] = 0.0;
  for (auto k : kAllOutcomeKinds) s.outcome_counts[k] = 0;
  double spend = 0.0, total_actions = 0.0;
  for (const SessionTrace* t : traces) {
    ++s.n_sessions;
    for (const auto& [k, c] : t->totals) s.mean_per_kind[k] += c;
    total_actions += t->TotalActions();
    s.total_purchases += t->outcome.purchases;
    if (t->outcome.converted) ++s.converted_sessions;
    spend += t->spend;
    ++s.outcome_counts[t->outcome.kind];
  }
  if (s.n_sessions == 0) return s;
  const double n = s.n_sessions;
  for (auto& [k, v] : s.mean_per_kind) {
    v /= n;
    s.sum_of_kind_means += v;
  }
  s.mean_total_actions = total_actions / n;
  s.conversion_rate = s.converted_sessions / n;
  s.mean_spend_all = spend / n;
  if (s.converted_sessions > 0) s.mean_spend_converting = spend / s.converted_sessions;
  return s;
}

std::vector<const SessionTrace*> InArm(const std::vector<SessionTrace>& traces, std::string_view arm) {
  std::vector<const SessionTrace*> out;
  for (const auto& t : traces) {
    if (t.arm == arm) out.push_back(&t);
  }
  return out;
}

std::string FormatNumberLabel(double v) {
  return std::abs(v - std::round(v)) < 1e-9 ? FormatFixed(v, 0) : FormatFixed(v, 2);
}

std::vector<MetricTest> CompareTraceSets(const std::vector<const SessionTrace*>& a,
                                         const std::vector<const SessionTrace*>& b) {
  std::vector<MetricTest> tests;
  auto t_test = [&](std::string metric, auto value) {
    std::vector<double> xa, xb;
    for (const auto* t : a) xa.push_back(value(*t));
    for (const auto* t : b) xb.push_back(value(*t));
    MetricTest m{std::move(metric), std::nullopt, {}};
    try {
      m.result = TwoSampleT(xa, xb, TMode::kPooled);
    } catch (const ValidationError& e) {
      m.note = e.what();
    }
    tests.push_back(std::move(m));
  };
  for (auto k : kAllActionKinds) {
    t_test(std::string(ToString(k)), [k](const SessionTrace& t) {
      auto it = t.totals.find(k);
      return it == t.totals.end() ? 0.0 : static_cast<double>(it->second);
    });
  }
  t_test("average actions", [](const SessionTrace& t) { return static_cast<double>(t.TotalActions()); });
  t_test("average spend", [](const SessionTrace& t) { return t.spend; });

  long long as = 0, bs = 0;
  for (const auto* t : a) as += t->outcome.converted ? 1 : 0;
  for (const auto* t : b) bs += t->outcome.converted ? 1 : 0;
  MetricTest conv{"conversion", std::nullopt, {}};
  try {
    conv.result = ChiSquare2x2(as, static_cast<long long>(a.size()) - as, bs, static_cast<long long>(b.size()) - bs);
  } catch (const ValidationError& e) {
    conv.note = e.what();
  }
  tests.push_back(std::move(conv));
  return tests;
}

}  // namespace

ArmSummary Summarize(const std::vector<SessionTrace>& traces, std::string_view arm) {
  auto members = InArm(traces, arm);
  if (members.empty()) throw ValidationError("no sessions in arm '" + std::string(arm) + "'");
  return SummarizeAllowEmpty(members, arm);
}

std::vector<MetricTest> CompareArms(const std::vector<SessionTrace>& traces, std::string_view a, std::string_view b) {
  return CompareTraceSets(InArm(traces, a), InArm(traces, b));
}

std::vector<Stratum> Stratify(const std::vector<SessionTrace>& traces, const std::map<std::string, Persona>& personas,
                              std::string_view attribute, const std::vector<std::string>& arms,
                              const std::vector<double>& cut_points) {
  if (arms.size() != 2) throw ValidationError("stratify compares exactly two arms");
  if (!std::is_sorted(cut_points.begin(), cut_points.end()) ||
      std::adjacent_find(cut_points.begin(), cut_points.end()) != cut_points.end()) {
    throw ValidationError("cut points must be strictly ascending");
  }
  bool seen = false;
  for (const auto& [id, p] : personas) seen = seen || p.demographics.contains(std::string(attribute));
  if (!seen) throw ValidationError("unknown attribute: " + std::string(attribute));

  auto bucket = [&](double v) {
    if (cut_points.empty()) throw ValidationError("numeric attribute '" + std::string(attribute) + "' needs cut points");
    auto it = std::upper_bound(cut_points.begin(), cut_points.end(), v);
    if (it == cut_points.begin()) return "< " + FormatNumberLabel(cut_points.front());
    if (it == cut_points.end()) return ">= " + FormatNumberLabel(cut_points.back());
    return "[" + FormatNumberLabel(*(it - 1)) + ", " + FormatNumberLabel(*it) + ")";
  };

  std::map<std::string, std::vector<const SessionTrace*>> groups;
  std::map<std::string, double> order_key;
  for (const auto& t : traces) {
    auto p = personas.find(t.persona_id);
    if (p == personas.end()) throw ValidationError("trace " + t.session_id + " names unknown persona " + t.persona_id);
    auto v = p->second.demographics.find(std::string(attribute));
    std::string label;
    double key = 0.0;
    if (v == p->second.demographics.end()) {
      label = "(missing)";
      key = std::numeric_limits<double>::infinity();
    } else if (const double* d = std::get_if<double>(&v->second)) {
      label = bucket(*d);
      auto it = std::upper_bound(cut_points.begin(), cut_points.end(), *d);
      key = static_cast<double>(it - cut_points.begin());
    } else {
      label = std::get<std::string>(v->second);
    }
    groups[label].push_back(&t);
    order_key[label] = key;
  }
  std::vector<std::string> labels;
  for (const auto& [l, g] : groups) labels.push_back(l);
  std::stable_sort(labels.begin(), labels.end(),
                   [&](const std::string& x, const std::string& y) { return order_key[x] < order_key[y]; });

  std::vector<Stratum> out;
  for (const auto& label : labels) {
    const auto& members = groups[label];
    Stratum s;
    s.label = label;
    s.n_sessions = static_cast<int>(members.size());
    std::vector<std::vector<const SessionTrace*>> per_arm(arms.size());
    for (const auto* t : members) {
      for (std::size_t i = 0; i < arms.size(); ++i) {
        if (t->arm == arms[i]) per_arm[i].push_back(t);
      }
    }
    bool enough = true;
    for (std::size_t i = 0; i < arms.size(); ++i) {
      s.summaries.push_back(SummarizeAllowEmpty(per_arm[i], arms[i]));
      enough = enough && per_arm[i].size() >= 2;
    }
    if (enough) {
      s.tests = CompareTraceSets(per_arm[1], per_arm[0]);
    } else {
      s.tests_suppressed = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

BaselineSummary BaselineSummary::FromJson(const Json& j) {
  BaselineSummary b;
  try {
    b.label = j.at("label").get<std::string>();
    b.provenance = j.value("provenance", std::string());
    for (const auto& [k, v] : j.at("metrics").items()) {
      if (std::find(kReportRows.begin(), kReportRows.end(), k) == kReportRows.end()) {
        throw SchemaError("baseline metric '" + k + "' is not a report row");
      }
      b.metrics[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("baseline: ") + e.what());
  }
  return b;
}

BaselineSummary BaselineSummary::Load(const std::filesystem::path& path) { return FromJson(ReadJsonFile(path)); }

Json BaselineSummary::ToJson() const {
  Json m = Json::object();
  for (auto row : kReportRows) {
    auto it = metrics.find(std::string(row));
    m[std::string(row)] = (it == metrics.end() || !it->second) ? Json(nullptr) : Json(*it->second);
  }
  return {{"label", label}, {"provenance", provenance}, {"metrics", m}};
}

// ---- rendering ----

namespace {

std::optional<double> RowValue(const ArmSummary& s, std::string_view row) {
  for (auto k : kAllActionKinds) {
    if (row == ToString(k)) return s.mean_per_kind.at(k);
  }
  if (row == "average actions") return s.mean_total_actions;
  if (row == "# purchases") return static_cast<double>(s.total_purchases);
  if (row == "average spend") return s.mean_spend_all;
  return std::nullopt;
}

std::string RenderCell(std::string_view row, std::optional<double> v) {
  if (!v) return "-";
  if (row == "# purchases") return FormatFixed(*v, 0);
  if (row == "average spend") return "$" + FormatFixed(*v, 2);
  return FormatFixed(*v, 2);
}

std::string Pad(std::string s, std::size_t width) {
  // Width counts code points so the table stays aligned with UTF-8 labels.
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  if (cps < width) s.append(width - cps, ' ');
  return s;
}

std::string Signed(double v, int decimals) {
  std::string s = FormatFixed(v, decimals);
  return (s.starts_with("-") ? "" : "+") + s;
}

std::string RenderP(double p) { return p < 0.0001 ? "< 0.0001" : FormatFixed(p, 4); }

Json OptionalNumber(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json SummaryJson(const ArmSummary& s) {
  Json kinds = Json::object();
  for (const auto& [k, v] : s.mean_per_kind) kinds[std::string(ToString(k))] = v;
  Json outcomes = Json::object();
  for (const auto& [k, c] : s.outcome_counts) outcomes[std::string(ToString(k))] = c;
  return {{"arm", s.arm},
          {"n_sessions", s.n_sessions},
          {"mean_per_kind", kinds},
          {"mean_total_actions", s.mean_total_actions},
          {"sum_of_kind_means", s.sum_of_kind_means},
          {"total_purchases", s.total_purchases},
          {"converted_sessions", s.converted_sessions},
          {"conversion_rate", s.conversion_rate},
          {"mean_spend_all", s.mean_spend_all},
          {"mean_spend_converting", OptionalNumber(s.mean_spend_converting)},
          {"outcome_counts", outcomes}};
}

Json TestJson(const MetricTest& m) {
  Json j = {{"metric", m.metric}};
  if (!m.result) {
    j["result"] = nullptr;
    j["note"] = m.note;
    return j;
  }
  const TestResult& r = *m.result;
  j["result"] = {{"test_kind", ToString(r.kind)},
                 {"statistic", r.statistic},
                 {"df", r.df},
                 {"p_value", r.p_value},
                 {"effect",
                  {{"absolute_diff", r.effect.absolute_diff},
                   {"relative_diff", OptionalNumber(r.effect.relative_diff)},
                   {"standardized", r.effect.standardized},
                   {"standardized_kind", r.kind == TestKind::kChiSquare2x2 ? "cohens_h" : "cohens_d"}}}};
  return j;
}

}  // namespace

Json ReportJson(const std::vector<ArmSummary>& summaries, const std::vector<MetricTest>& tests,
                const std::optional<BaselineSummary>& baseline) {
  if (summaries.size() < 2) throw ValidationError("report needs at least two arm summaries");
  Json arms = Json::array();
  for (const auto& s : summaries) arms.push_back(s.arm);
  Json rows = Json::array();
  for (auto row : kReportRows) {
    Json values = Json::object();
    for (const auto& s : summaries) values[s.arm] = OptionalNumber(RowValue(s, row));
    Json r = {{"metric", row}, {"values", values}};
    if (baseline) {
      auto it = baseline->metrics.find(std::string(row));
      r["baseline"] = it == baseline->metrics.end() ? Json(nullptr) : OptionalNumber(it->second);
    }
    rows.push_back(std::move(r));
  }
  Json spend = Json::object();
  Json failure = Json::object();
  Json sums = Json::array();
  for (const auto& s : summaries) {
    spend[s.arm] = {{"all_sessions", s.mean_spend_all}, {"converting_sessions", OptionalNumber(s.mean_spend_converting)}};
    Json rates = Json::object();
    for (auto k : kAllOutcomeKinds) rates[std::string(ToString(k))] = s.FailureRate(k);
    failure[s.arm] = rates;
    sums.push_back(SummaryJson(s));
  }
  Json ts = Json::array();
  for (const auto& t : tests) ts.push_back(TestJson(t));
  Json doc = {{"arms", arms},
              {"comparison", {{"treatment", summaries[1].arm}, {"control", summaries[0].arm}}},
              {"table", rows},
              {"tests", ts},
              {"mean_spend", spend},
              {"failure_rates", failure},
              {"summaries", sums}};
  doc["baseline"] = baseline ? baseline->ToJson() : Json(nullptr);
  return doc;
}

std::string RenderReport(const std::vector<ArmSummary>& summaries, const std::vector<MetricTest>& tests,
                         const std::optional<BaselineSummary>& baseline, ReportFormat format) {
  if (summaries.size() < 2) throw ValidationError("report needs at least two arm summaries");
  if (format == ReportFormat::kJson) return ReportJson(summaries, tests, baseline).dump(2) + "\n";

  constexpr std::size_t kLabel = 22, kCol = 16;
  std::string out = "A/B test report\n";
  out += "arms:";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    out += (i == 0 ? " " : ", ") + summaries[i].arm + " (n=" + std::to_string(summaries[i].n_sessions) + ")";
  }
  out += "\n\n";

  out += Pad("metric", kLabel);
  for (const auto& s : summaries) out += Pad(s.arm, kCol);
  if (baseline) out += baseline->label;
  while (out.ends_with(' ')) out.pop_back();
  out += "\n";
  for (auto row : kReportRows) {
    std::string line = Pad(std::string(row), kLabel);
    for (const auto& s : summaries) line += Pad(RenderCell(row, RowValue(s, row)), kCol);
    if (baseline) {
      auto it = baseline->metrics.find(std::string(row));
      line += RenderCell(row, it == baseline->metrics.end() ? std::nullopt : it->second);
    }
    while (line.ends_with(' ')) line.pop_back();
    out += line + "\n";
  }

  out += "\ntests: " + summaries[1].arm + " vs " + summaries[0].arm + "\n";
  for (const auto& m : tests) {
    std::string line = Pad(m.metric, kLabel);
    if (!m.result) {
      out += line + "n/a (" + m.note + ")\n";
      continue;
    }
    const TestResult& r = *m.result;
    const bool chi = r.kind == TestKind::kChiSquare2x2;
    line += Pad(std::string(ToString(r.kind)), 16);
    line += Pad((chi ? "chi2 = " : "t = ") + FormatFixed(r.statistic, 4), 18);
    line += Pad("df = " + (chi ? FormatFixed(r.df, 0) : FormatFixed(r.df, 2)), 14);
    line += Pad("p = " + RenderP(r.p_value), 16);
    line += "diff = " + Signed(r.effect.absolute_diff, chi ? 4 : 3);
    line += r.effect.relative_diff ? " (" + Signed(*r.effect.relative_diff * 100.0, 1) + "%)" : " (n/a)";
    line += std::string(chi ? ", h = " : ", d = ") + Signed(r.effect.standardized, 3);
    out += line + "\n";
  }

  out += "\nmean spend\n";
  for (const auto& s : summaries) {
    out += Pad(s.arm, kLabel) + "all sessions $" + FormatFixed(s.mean_spend_all, 2) + ", converting sessions " +
           (s.mean_spend_converting ? "$" + FormatFixed(*s.mean_spend_converting, 2) : std::string("-")) + "\n";
  }

  out += "\nfailure rates (share of sessions by outcome)\n";
  out += Pad("outcome", kLabel);
  for (const auto& s : summaries) out += Pad(s.arm, kCol);
  while (out.ends_with(' ')) out.pop_back();
  out += "\n";
  for (auto k : kAllOutcomeKinds) {
    std::string line = Pad(std::string(ToString(k)), kLabel);
    for (const auto& s : summaries) line += Pad(FormatFixed(s.FailureRate(k), 4), kCol);
    while (line.ends_with(' ')) line.pop_back();
    out += line + "\n";
  }
  if (baseline && !baseline->provenance.empty()) out += "\nbaseline: " + baseline->label + " (" + baseline->provenance + ")\n";
  return out;
}

}  // namespace agentab
