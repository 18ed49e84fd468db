#include "agentab/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace agentab {

std::vector<std::string> Allocation::Members(std::string_view arm) const {
  std::vector<std::string> ids;
  for (const auto& [id, a] : assignment) {
    if (a == arm) ids.push_back(id);
  }
  return ids;
}

std::map<std::string, int> Allocation::ArmSizes() const {
  std::map<std::string, int> sizes;
  for (const auto& [id, a] : assignment) ++sizes[a];
  return sizes;
}

Allocation Allocate(const std::vector<Persona>& personas, const std::vector<Arm>& arms, std::uint64_t seed) {
  if (arms.size() < 2) throw ValidationError("allocation needs at least two arms");
  std::set<std::string> names;
  for (const auto& a : arms) {
    if (!names.insert(a.name).second) throw ValidationError("duplicate arm name: " + a.name);
  }
  if (personas.size() < arms.size()) {
    throw ValidationError("too few personas: " + std::to_string(personas.size()) + " for " +
                          std::to_string(arms.size()) + " arms");
  }
  std::vector<std::string> ids;
  ids.reserve(personas.size());
  for (const auto& p : personas) ids.push_back(p.id);
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw ValidationError("duplicate persona ids in allocation input");
  }
  // Shuffle a canonical order so the input order does not matter.
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  Shuffle(ids, rng);
  Allocation alloc;
  alloc.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) alloc.assignment[ids[i]] = arms[i % arms.size()].name;
  return alloc;
}

std::string_view ToString(MetricKind k) { return k == MetricKind::kSmd ? "SMD" : "TVD"; }

double BalanceReport::MaxValue() const {
  double m = 0.0;
  for (const auto& x : per_attribute) m = std::max(m, x.value);
  return m;
}

namespace {

void MeanVar(const std::vector<double>& x, double& mean, double& var) {
  mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  var = 0.0;
  if (x.size() < 2) return;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size() - 1);
}

}  // namespace

double StandardizedMeanDifference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ValidationError("empty arm");
  double ma, va, mb, vb;
  MeanVar(a, ma, va);
  MeanVar(b, mb, vb);
  const double sp = std::sqrt((va + vb) / 2.0);
  const double diff = std::abs(ma - mb);
  if (sp == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / sp;
}

double TotalVariationDistance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) throw ValidationError("empty arm");
  std::map<std::string, std::pair<double, double>> freq;
  for (const auto& v : a) freq[v].first += 1.0;
  for (const auto& v : b) freq[v].second += 1.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double sum = 0.0;
  for (const auto& [label, c] : freq) sum += std::abs(c.first / na - c.second / nb);
  return sum / 2.0;
}

BalanceReport BalanceMetrics(const Allocation& alloc, const std::vector<Persona>& personas,
                             const std::vector<AttributeSpec>& attributes, double threshold) {
  auto sizes = alloc.ArmSizes();
  if (sizes.size() != 2) throw ValidationError("balance scoring needs exactly two arms");
  const std::string arm_a = sizes.begin()->first;
  std::map<std::string, const Persona*> by_id;
  for (const auto& p : personas) by_id[p.id] = &p;

  BalanceReport report;
  report.threshold = threshold;
  for (const auto& attr : attributes) {
    std::vector<double> na, nb;
    std::vector<std::string> ca, cb;
    for (const auto& [id, arm] : alloc.assignment) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ValidationError("allocation references unknown persona " + id);
      auto v = it->second->demographics.find(attr.name);
      if (v == it->second->demographics.end()) {
        throw ValidationError("persona " + id + " lacks attribute " + attr.name);
      }
      const bool in_a = arm == arm_a;
      if (attr.kind == AttributeSpec::Kind::kNumeric) {
        const double* d = std::get_if<double>(&v->second);
        if (d == nullptr) throw ValidationError("persona " + id + ": " + attr.name + " is not numeric");
        (in_a ? na : nb).push_back(*d);
      } else {
        (in_a ? ca : cb).push_back(ToString(v->second));
      }
    }
    BalanceMetric m{attr.name, MetricKind::kSmd, 0.0};
    if (attr.kind == AttributeSpec::Kind::kNumeric) {
      m.value = StandardizedMeanDifference(na, nb);
    } else {
      m.kind = MetricKind::kTvd;
      m.value = TotalVariationDistance(ca, cb);
    }
    report.per_attribute.push_back(m);
  }
  report.passed = report.MaxValue() <= threshold;
  return report;
}

RerandomizeResult Rerandomize(const std::vector<Persona>& personas, const std::vector<Arm>& arms,
                              const std::vector<AttributeSpec>& attributes, double threshold, int max_attempts,
                              std::uint64_t seed) {
  if (!(threshold >= 0.0)) throw ValidationError("threshold must be >= 0");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  RerandomizeResult best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_attempts; ++k) {
    Allocation alloc = Allocate(personas, arms, seed + static_cast<std::uint64_t>(k));
    alloc.attempt = k + 1;
    BalanceReport report = BalanceMetrics(alloc, personas, attributes, threshold);
    const double score = report.MaxValue();
    if (report.passed) return {std::move(alloc), std::move(report), true, k + 1};
    if (k == 0 || score < best_score) {
      best_score = score;
      best.allocation = std::move(alloc);
      best.report = std::move(report);
    }
    best.attempts = k + 1;
  }
  best.passed = false;
  return best;
}

namespace {

Json MetricValueToJson(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

double MetricValueFromJson(const Json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

Json ToJson(const BalanceReport& r) {
  Json per = Json::object();
  for (const auto& m : r.per_attribute) {
    per[m.attribute] = {{"metric_kind", ToString(m.kind)}, {"value", MetricValueToJson(m.value)}};
  }
  return {{"per_attribute", per}, {"passed", r.passed}, {"threshold", r.threshold}};
}

BalanceReport BalanceReportFromJson(const Json& j) {
  BalanceReport r;
  for (const auto& [name, m] : j.at("per_attribute").items()) {
    const std::string kind = m.at("metric_kind").get<std::string>();
    if (kind != "SMD" && kind != "TVD") throw SchemaError("unknown metric kind " + kind);
    r.per_attribute.push_back(
        {name, kind == "SMD" ? MetricKind::kSmd : MetricKind::kTvd, MetricValueFromJson(m.at("value"))});
  }
  r.passed = j.at("passed").get<bool>();
  r.threshold = j.at("threshold").get<double>();
  return r;
}

Json AllocationToJson(const Allocation& a, const BalanceReport& r) {
  Json assign = Json::object();
  for (const auto& [id, arm] : a.assignment) assign[id] = arm;
  return {{"seed", a.seed}, {"attempt", a.attempt}, {"assignment", assign}, {"balance_report", ToJson(r)}};
}

Allocation AllocationFromJson(const Json& j) {
  Allocation a;
  try {
    a.seed = j.at("seed").get<std::uint64_t>();
    a.attempt = j.at("attempt").get<int>();
    for (const auto& [id, arm] : j.at("assignment").items()) a.assignment[id] = arm.get<std::string>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("allocation: ") + e.what());
  }
  return a;
}

}  // namespace agentab
