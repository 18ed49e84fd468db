// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "agentab/agent.hpp"
#include "agentab/analysis.hpp"
#include "agentab/trace_store.hpp"
#include "balance_oracle.hpp"
#include "experiment.hpp"
#include "fake_webdriver.hpp"
#include "fixture_site.hpp"
#include "stats_oracle.hpp"

using namespace agentab;
using namespace agentab::testing;

namespace {

// Tolerances and limits.
constexpr double kStatTol = 1e-9;
constexpr double kPTol = 1e-6;
constexpr double kFixedTol = 1e-3;
constexpr double kCalibrationTol = 0.05;
constexpr double kChiRecomputeTol = 1e-9;
constexpr double kBalanceTol = 1e-9;
constexpr double kStatsBudget = 5.0;
constexpr double kCalibrationBudget = 120.0;
constexpr double kSmokeBudget = 60.0;

// Collects failed checks with a short description each.
struct Checker {
  std::vector<std::string> failures;
  int checks = 0;

  void operator()(bool ok, const std::string& what) {
    ++checks;
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
  bool ok() const { return failures.empty(); }
};

struct Outcome {
  bool pass;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

bool Near(double got, double want, double tol) { return std::abs(got - want) <= tol * std::max(1.0, std::abs(want)); }

std::string Fmt(double x, int digits = 4) { return FormatFixed(x, digits); }

Outcome Summarize(const Checker& c, const std::string& detail) {
  std::string d = detail;
  for (const auto& f : c.failures) d += "; " + f;
  return {c.ok(), d};
}

// ---- 1 ----

Outcome StatsOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker check;
  Rng rng(20240501);
  for (int i = 0; i < 50; ++i) {
    const int na = 2 + static_cast<int>(UniformBelow(rng, 19)), nb = 2 + static_cast<int>(UniformBelow(rng, 19));
    std::vector<double> a, b;
    for (int k = 0; k < na; ++k) a.push_back(Normal(rng, 3, 1 + 2 * Uniform01(rng)));
    for (int k = 0; k < nb; ++k) b.push_back(Normal(rng, 3.4, 1 + 2 * Uniform01(rng)));
    const std::string tag = "instance " + std::to_string(i);

    const auto pooled = TwoSampleT(a, b, TMode::kPooled);
    const auto rp = RefPooledT(a, b);
    check(Near(pooled.statistic, rp.t, kStatTol) && pooled.df == rp.df, tag + " pooled t");
    check(std::abs(pooled.p_value - rp.p) <= kPTol, tag + " pooled p");
    check(std::abs(StudentTTwoSidedP(rp.t, rp.df) - rp.p) <= kPTol, tag + " t tail");

    const auto welch = TwoSampleT(a, b, TMode::kWelch);
    const auto rw = RefWelchT(a, b);
    check(Near(welch.statistic, rw.t, kStatTol) && Near(welch.df, rw.df, kStatTol), tag + " welch t");
    check(std::abs(welch.p_value - rw.p) <= kPTol, tag + " welch p");

    long long cells[4];
    for (auto& c : cells) c = 1 + static_cast<long long>(UniformBelow(rng, 200));
    const auto chi = ChiSquare2x2(cells[0], cells[1], cells[2], cells[3]);
    const auto rc = RefChiSquare(cells[0], cells[1], cells[2], cells[3]);
    check(Near(chi.statistic, rc.t, kStatTol), tag + " chi-square");
    check(std::abs(chi.p_value - rc.p) <= kPTol, tag + " chi-square p");
    check(std::abs(ChiSquareSurvival(rc.t, 1) - rc.p) <= kPTol, tag + " chi-square tail");
  }
  const auto fixed_t = TwoSampleT({1, 2, 3}, {2, 3, 4});
  check(std::abs(fixed_t.statistic - -1.2247) <= kFixedTol && fixed_t.df == 4, "fixed t");
  const auto fixed_c = ChiSquare2x2(404, 96, 414, 86);
  check(std::abs(fixed_c.statistic - 0.6717) <= kFixedTol, "fixed chi-square");
  const double secs = Seconds(t0);
  check(secs < kStatsBudget, "runtime " + Fmt(secs, 2) + " s");
  return Summarize(check, std::to_string(check.checks) + " checks, t=" + Fmt(fixed_t.statistic) + " df " +
                              Fmt(fixed_t.df, 0) + ", chi2=" + Fmt(fixed_c.statistic) + ", " + Fmt(secs, 3) + " s");
}

// ---- 2 ----

Outcome TableShape() {
  Checker check;
  const auto cfg = Parse(SmallDoc("accept_table", 60, 40, 4));
  StagePersonas(cfg);
  StageAllocate(cfg);
  StageRun(cfg, nullptr);
  const auto r = StageAnalyze(cfg, nullptr);
  const std::string text = ReadFile(r.report_text);
  const Json j = ReadJsonFile(r.report_json);

  // Text: the main table lists exactly the report rows, in order.
  std::istringstream in(text);
  std::vector<std::string> rows;
  bool in_table = false;
  for (std::string line; std::getline(in, line);) {
    if (line.starts_with("metric ")) {
      in_table = rows.empty();
      continue;
    }
    if (!in_table) continue;
    if (line.empty()) break;
    rows.push_back(line);
  }
  check(rows.size() == kReportRows.size(), "text rows " + std::to_string(rows.size()));
  for (std::size_t i = 0; i < std::min(rows.size(), kReportRows.size()); ++i) {
    check(rows[i].starts_with(std::string(kReportRows[i]) + " "), "text row " + std::string(kReportRows[i]));
  }
  check(text.find("failure rates") != std::string::npos, "text failure rates");
  for (auto k : kAllOutcomeKinds) {
    check(text.find("\n" + std::string(ToString(k)) + " ") != std::string::npos, "text rate " + std::string(ToString(k)));
  }

  std::vector<std::string> metrics;
  for (const auto& row : j.at("table")) metrics.push_back(row.at("metric").get<std::string>());
  check(metrics == std::vector<std::string>(kReportRows.begin(), kReportRows.end()), "json rows");
  for (const auto& arm : {"control", "treatment"}) {
    check(j.at("failure_rates").contains(arm), std::string("json failure rates ") + arm);
    for (auto k : kAllOutcomeKinds) {
      check(j["failure_rates"][arm].contains(std::string(ToString(k))), "json rate " + std::string(ToString(k)));
    }
  }
  return Summarize(check, std::to_string(rows.size()) + " text rows, " + std::to_string(metrics.size()) +
                              " json rows, " + std::to_string(kAllOutcomeKinds.size()) + " failure kinds");
}

// ---- 3 ----

Outcome Calibration() {
  Checker check;
  Json doc = ReadJsonFile(ConfigDir() / "calibration.json");
  doc["output_dir"] = ScratchDir("accept_calibration").string();
  doc["parallelism"] = 8;
  const auto cfg = Parse(doc);
  const auto t0 = std::chrono::steady_clock::now();
  StagePersonas(cfg);
  StageAllocate(cfg);
  const auto manifest = StageRun(cfg, nullptr);
  const auto r = StageAnalyze(cfg, nullptr);
  const double secs = Seconds(t0);

  const auto loaded = LoadTraces(cfg.output_dir / "traces");
  std::map<std::string, int> n, purchases, converted;
  for (const auto& t : loaded.traces) {
    ++n[t.arm];
    purchases[t.arm] += t.totals.at(ActionKind::kPurchase);
    converted[t.arm] += t.outcome.converted;
  }
  check(n["control"] == 500 && n["treatment"] == 500, "arm sizes");
  check(manifest.Abandoned() == 0 && loaded.rejected.empty(), "complete run");
  const double mc = static_cast<double>(purchases["control"]) / n["control"];
  const double mt = static_cast<double>(purchases["treatment"]) / n["treatment"];
  check(std::abs(mc - 0.81) <= kCalibrationTol, "control mean purchases " + Fmt(mc));
  check(std::abs(mt - 0.83) <= kCalibrationTol, "treatment mean purchases " + Fmt(mt));

  // Conversion chi-square in the report against the counts in the traces.
  const Json j = ReadJsonFile(r.report_json);
  double reported = std::nan("");
  for (const auto& t : j.at("tests")) {
    if (t.at("metric") == "conversion" && !t.at("result").is_null()) reported = t["result"]["statistic"].get<double>();
  }
  const auto ref = RefChiSquare(converted["treatment"], n["treatment"] - converted["treatment"], converted["control"],
                                n["control"] - converted["control"]);
  check(std::abs(reported - ref.t) <= kChiRecomputeTol, "chi-square " + Fmt(reported, 9) + " vs " + Fmt(ref.t, 9));
  check(secs < kCalibrationBudget, "runtime " + Fmt(secs, 1) + " s");
  return Summarize(check, "mean purchases " + Fmt(mc, 3) + " / " + Fmt(mt, 3) + ", chi2=" + Fmt(reported, 6) +
                              " p=" + Fmt(ref.p, 4) + ", " + Fmt(secs, 2) + " s");
}

// ---- 4 ----

// Random rule-driven stub: each page type gets a random mix of actions,
// some of which repeat by construction.
ScriptedPolicy RandomPolicy(Rng& rng) {
  static const std::vector<std::string> kResults = {
      "search(\"{query}\")",           "click_product({top_rated_product})", "click_product({random_product})",
      "click_product({cheapest_product})", "click_filter_option(\"{relevant_filter}\")",
      "click_filter_option(\"{first_filter}\")", "click_product(1)", "stop"};
  static const std::vector<std::string> kDetail = {"purchase", "search(\"{query}\")", "search(\"{goal}\")", "stop"};
  auto choices = [&](const std::vector<std::string>& menu) {
    std::vector<RuleChoice> out;
    double total = 0;
    for (const auto& a : menu) {
      if (Uniform01(rng) < 0.5) continue;
      out.push_back({a, 0.05 + Uniform01(rng)});
      total += out.back().weight;
    }
    if (out.empty()) {
      out.push_back({menu[UniformBelow(rng, menu.size())], 1.0});
      total = 1.0;
    }
    for (auto& c : out) c.weight /= total;
    // Exact sum despite rounding.
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < out.size(); ++i) rest -= out[i].weight;
    out.back().weight = rest;
    return out;
  };
  ScriptedPolicy p;
  p.seed = rng();
  p.rules.push_back({{.page_type = PageType::kHome}, {{"search(\"{query}\")", 1.0}}});
  p.rules.push_back({{.page_type = PageType::kPurchaseConfirmation},
                     {{"search(\"{query}\")", 0.3}, {"stop", 0.7}}});
  p.rules.push_back({{.page_type = PageType::kProductDetail}, choices(kDetail)});
  p.rules.push_back({{.page_type = PageType::kSearchResults, .has_filters = true}, choices(kResults)});
  p.rules.push_back({{.page_type = PageType::kSearchResults, .has_products = true},
                     choices({"search(\"{query}\")", "click_product({random_product})", "click_product(1)"})});
  p.rules.push_back({{}, {{"search(\"{query}\")", 0.5}, {"stop", 0.5}}});
  return p;
}

Outcome CapAndLoop() {
  Checker check;
  auto catalog = std::make_shared<const Catalog>(Catalog::Load(DataDir() / "catalog.json"));
  const Persona persona = [] {
    Persona p = ParsePersonaDocument(ReadFile(DataDir() / "fixtures" / "personas" / "marcus.txt"));
    p.id = "p0001";
    return p;
  }();
  std::vector<std::string> queries;
  for (const auto& prod : catalog->products()) {
    const auto tokens = Tokenize(prod.title);
    queries.push_back(tokens.size() >= 2 ? tokens[0] + " " + tokens[1] : prod.title);
  }
  Rng rng(4242);
  std::map<OutcomeKind, int> kinds;
  int max_actions = 0;
  const SessionLimits limits;  // 20 actions, loop window 3
  for (int i = 0; i < 1000; ++i) {
    ScriptedModel model(RandomPolicy(rng));
    const bool reduced = UniformBelow(rng, 2) == 1;
    MockShopSession env(catalog, reduced ? VariantConfig::Reduced(0.8) : VariantConfig::Full());
    SessionInput in;
    in.session_id = (reduced ? "treatment-" : "control-") + std::to_string(i);
    in.persona = persona;
    const std::string q = queries[UniformBelow(rng, queries.size())];
    in.intention = {"Buy " + q, std::nullopt, q};
    in.arm = reduced ? "treatment" : "control";
    in.seed = rng();
    const SessionTrace t = RunSession(in, env, model, limits, FrozenClock());
    ++kinds[t.outcome.kind];
    max_actions = std::max(max_actions, t.TotalActions());
    const std::string tag = "session " + std::to_string(i);
    check(t.TotalActions() <= 20, tag + " has " + std::to_string(t.TotalActions()) + " actions");

    // First step completing a run of 3 identical actions.
    std::optional<std::size_t> triple;
    for (std::size_t s = 2; s < t.steps.size() && !triple; ++s) {
      const auto& a = t.steps[s].action;
      if (a && a == t.steps[s - 1].action && a == t.steps[s - 2].action) triple = s;
    }
    if (triple) {
      check(t.outcome.kind == OutcomeKind::kLooping && t.steps.size() == *triple + 1,
            tag + " repeats at step " + std::to_string(*triple) + " but ends " + std::string(ToString(t.outcome.kind)) +
                " after " + std::to_string(t.steps.size()));
    } else {
      check(t.outcome.kind != OutcomeKind::kLooping, tag + " looping without a repeat");
    }
  }
  check(kinds[OutcomeKind::kLooping] > 0 && kinds[OutcomeKind::kStopped] > 0, "outcome mix too narrow");
  std::string mix;
  for (const auto& [k, c] : kinds) mix += (mix.empty() ? "" : ", ") + std::string(ToString(k)) + " " + std::to_string(c);
  return Summarize(check, "1000 sessions, max " + std::to_string(max_actions) + " actions; " + mix);
}

// ---- 5 ----

std::set<std::pair<std::string, std::string>> Options(const std::vector<FilterGroup>& groups) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& g : groups) {
    for (const auto& o : g.options) out.emplace(g.name, o.value);
  }
  return out;
}

Outcome Containment() {
  Checker check;
  const Catalog catalog = Catalog::Load(DataDir() / "catalog.json");
  std::vector<std::string> vocab;
  for (const auto& p : catalog.products()) {
    for (const auto& tok : Tokenize(p.title + " " + p.department)) vocab.push_back(tok);
  }
  vocab.push_back("zzzunknown");
  Rng rng(55);
  int strict = 0, nonempty = 0;
  for (int i = 0; i < 100; ++i) {
    std::string q;
    const auto len = 1 + UniformBelow(rng, 4);
    for (std::uint64_t k = 0; k < len; ++k) q += (k ? " " : "") + vocab[UniformBelow(rng, vocab.size())];
    const auto results = SearchRank(catalog, q);
    const auto full = BuildFilterGroups(results, VariantConfig::Full(), q);
    const auto reduced = BuildFilterGroups(results, VariantConfig::Reduced(0.8), q);
    const auto zero = BuildFilterGroups(results, VariantConfig::Reduced(0.0), q);
    const auto f = Options(full), r = Options(reduced);
    check(std::includes(f.begin(), f.end(), r.begin(), r.end()), "query '" + q + "' reduced not a subset");
    check(zero == full, "query '" + q + "' threshold 0 differs from full");
    strict += r.size() < f.size();
    nonempty += !f.empty();
  }
  return Summarize(check, "100 queries, " + std::to_string(nonempty) + " with filters, " + std::to_string(strict) +
                              " strictly pruned");
}

// ---- 6 ----

Outcome Balance() {
  Checker check;
  const AgentSpec spec = AgentSpec::Load(DataDir() / "agent_spec.json");
  const std::vector<Arm> arms = {{"control", "full"}, {"treatment", "reduced"}};
  int passed = 0, metrics = 0;
  double worst_attempts = 0;
  for (std::uint64_t pool_seed = 1; pool_seed <= 100; ++pool_seed) {
    Rng rng(pool_seed * 7919);
    std::vector<Persona> pool;
    for (int i = 0; i < 200; ++i) {
      Persona p;
      p.id = "p" + std::to_string(10000 + i);
      p.demographics = SampleDemographics(spec, rng);
      pool.push_back(std::move(p));
    }
    const auto r = Rerandomize(pool, arms, spec.attributes, 0.1, 100, pool_seed);
    passed += r.passed;
    worst_attempts = std::max(worst_attempts, static_cast<double>(r.attempts));
    for (std::size_t i = 0; i < spec.attributes.size(); ++i) {
      const auto& attr = spec.attributes[i];
      std::vector<double> na, nb;
      std::vector<std::string> ca, cb;
      for (const auto& p : pool) {
        const auto& v = p.demographics.at(attr.name);
        const bool ctl = r.allocation.assignment.at(p.id) == "control";
        if (attr.kind == AttributeSpec::Kind::kNumeric) {
          (ctl ? na : nb).push_back(std::get<double>(v));
        } else {
          (ctl ? ca : cb).push_back(std::get<std::string>(v));
        }
      }
      const double ref = attr.kind == AttributeSpec::Kind::kNumeric ? RefSmd(na, nb) : RefTvd(ca, cb);
      check(r.report.per_attribute[i].attribute == attr.name &&
                std::abs(r.report.per_attribute[i].value - ref) <= kBalanceTol,
            "pool " + std::to_string(pool_seed) + " " + attr.name);
      ++metrics;
    }
  }
  check(passed >= 99, "passed " + std::to_string(passed) + " of 100");
  return Summarize(check, std::to_string(passed) + "/100 pools balanced, " + std::to_string(metrics) +
                              " metrics recomputed, max attempts " + Fmt(worst_attempts, 0));
}

// ---- 7 ----

Outcome Grammar() {
  Checker check;
  Rng rng(77);
  static constexpr std::string_view kChars =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -_&$.,!?()'\"\\/{}:";
  auto text = [&](std::size_t max_len) {
    std::string s;
    const auto n = 1 + UniformBelow(rng, max_len);
    for (std::uint64_t i = 0; i < n; ++i) s.push_back(kChars[UniformBelow(rng, kChars.size())]);
    return s;
  };
  std::map<ActionKind, int> per_kind;
  for (int i = 0; i < 5000; ++i) {
    Action a;
    switch (UniformBelow(rng, 5)) {
      case 0: a = action::Search{text(40)}; break;
      case 1: a = action::ClickProduct{1 + static_cast<int>(UniformBelow(rng, 1000))}; break;
      case 2: {
        std::string g = Trim(text(12));
        std::erase(g, ':');
        const std::string v = Trim(text(24));
        a = action::ClickFilter{g.empty() ? "Brand" : g, v.empty() ? "x" : v};
        break;
      }
      case 3: a = action::Purchase{}; break;
      default: a = action::Stop{}; break;
    }
    try {
      ValidateAction(a);
    } catch (const ValidationError&) {
      continue;
    }
    const std::string s = Serialize(a);
    const auto p = FindAction(s);
    check(p && p->action == a && p->start == 0 && p->end == s.size(), "round-trip of " + s);
    ++per_kind[KindOf(a)];
  }
  check(per_kind.size() == 5, "all kinds covered");
  auto parses_to = [&](std::string_view t, const Action& want) {
    const auto p = FindAction(t);
    check(p && p->action == want, "literal " + std::string(t));
  };
  parses_to("Click_product(3)", action::ClickProduct{3});
  parses_to("Click_filter_option(Brand: Sony)", action::ClickFilter{"Brand", "Sony"});
  parses_to("Search(\"Wireless earbuds\")", action::Search{"Wireless earbuds"});
  parses_to("{click_product: 3}", action::ClickProduct{3});
  parses_to("{search \"Wireless earbuds\"}", action::Search{"Wireless earbuds"});
  parses_to("{filter: Brand: Sony}", action::ClickFilter{"Brand", "Sony"});
  parses_to("{purchase}", action::Purchase{});
  parses_to("{stop}", action::Stop{});
  int total = 0;
  for (const auto& [k, c] : per_kind) total += c;
  return Summarize(check, std::to_string(total) + " random actions over " + std::to_string(per_kind.size()) +
                              " kinds, 8 literal forms");
}

// ---- 8 ----

struct DemoRun {
  std::string report;
  std::vector<std::string> digests;
};

DemoRun RunDemo(const std::string& scratch, int parallelism) {
  Json doc = DemoDoc();
  doc["output_dir"] = ScratchDir(scratch).string();
  doc["parallelism"] = parallelism;
  const auto cfg = Parse(doc);
  StagePersonas(cfg);
  StageAllocate(cfg);
  StageRun(cfg, nullptr);
  const auto r = StageAnalyze(cfg, nullptr);
  DemoRun out{ReadFile(r.report_json), {}};
  for (const auto& t : LoadTraces(cfg.output_dir / "traces").traces) out.digests.push_back(TraceDigest(t));
  std::sort(out.digests.begin(), out.digests.end());
  return out;
}

Outcome Determinism() {
  Checker check;
  const DemoRun a = RunDemo("accept_det_a", 4);
  const DemoRun b = RunDemo("accept_det_b", 4);
  const DemoRun serial = RunDemo("accept_det_p1", 1);
  const DemoRun wide = RunDemo("accept_det_p8", 8);
  check(a.report == b.report, "report.json differs between identical runs");
  check(serial.report == wide.report, "report.json differs at parallelism 1 vs 8");
  check(serial.report == a.report, "report.json differs at parallelism 1 vs 4");
  check(serial.digests == wide.digests, "trace digests differ at parallelism 1 vs 8");
  check(a.digests.size() == 100, "trace count " + std::to_string(a.digests.size()));
  return Summarize(check, std::to_string(a.report.size()) + "-byte report, " + std::to_string(a.digests.size()) +
                              " trace digests, 4 runs");
}

// ---- 9 ----

Outcome Extraction() {
  Checker check;
  int pages = 0;
  for (const auto& name : kGoldenFixtures) {
    const Observation got = Extract(Fixture(name), *FixtureRules());
    check(ToJson(got).dump() == ToJson(Golden(name)).dump(), "fixture " + name);
    ++pages;
  }

  auto trail = [](const FakeWebDriver& fake) {
    std::vector<std::string> out;
    for (const auto& e : fake.Log()) {
      if (e == "click" || e == "scroll" || e.starts_with("click_fail")) out.push_back(e);
    }
    return out;
  };
  struct Case {
    std::string code;
    int failures;
    bool cleared_by_scroll;
    std::optional<RecoveryStrategy> want;
    std::vector<std::string> trail;  // driver click/scroll commands, in order
  };
  const std::string ic = "click_fail element click intercepted", st = "click_fail stale element reference";
  const std::vector<Case> cases = {
      {"element click intercepted", 1, false, RecoveryStrategy::kRetry, {ic, "click"}},
      {"element click intercepted", -1, true, RecoveryStrategy::kScroll, {ic, ic, "scroll", "click"}},
      {"stale element reference", 3, false, RecoveryStrategy::kReparse, {st, st, "scroll", st, "scroll", "click"}},
      {"element click intercepted", -1, false, std::nullopt, {ic, ic, "scroll", ic, "scroll", ic}}};
  std::vector<std::string> fired;
  for (const auto& c : cases) {
    FakeWebDriver fake(FixtureSite);
    WebDriverEnvConfig cfg;
    cfg.driver.endpoint = fake.endpoint();
    cfg.driver.timeout = std::chrono::milliseconds(2000);
    cfg.start_url = "http://shop.test/s?k=telescope+eyepiece";
    cfg.retry_delay = std::chrono::milliseconds(1);
    cfg.settle_timeout = std::chrono::milliseconds(200);
    cfg.settle_poll = std::chrono::milliseconds(5);
    WebDriverSession s(FixtureRules(), cfg);
    s.Open();
    s.Observe();
    fake.AddFault({"a[href=\"/dp/B0EYE12\"]", c.code, c.failures, c.cleared_by_scroll});
    fake.ClearLog();
    const ExecResult r = s.Execute(action::ClickProduct{12});
    const auto t = trail(fake);
    if (c.want) {
      check(r.status == ExecStatus::kRecovered && r.strategy == c.want,
            "expected recovery by " + std::string(ToString(*c.want)));
      check(fake.current_path() == "/dp/B0EYE12", "recovered click did not land");
      fired.push_back(std::string(ToString(*c.want)));
    } else {
      check(r.status == ExecStatus::kFailed, "exhausted ladder did not fail");
    }
    std::string got;
    for (const auto& e : t) got += (got.empty() ? "" : ", ") + e;
    check(t == c.trail, "command trail " + got);
  }
  std::string order;
  for (const auto& f : fired) order += (order.empty() ? "" : "->") + f;
  check(order == "retry->scroll->reparse", "ladder order " + order);
  return Summarize(check, std::to_string(pages) + " golden pages, ladder " + order + " then fail");
}

// ---- 10 ----

Outcome Smoke() {
  Checker check;
  const auto out = ScratchDir("accept_smoke");
  const std::string cmd = std::string("\"") + AGENTAB_CLI_PATH + "\" pipeline \"" +
                          (ConfigDir() / "demo.json").string() + "\" --output-dir \"" + out.string() +
                          "\" -q >/dev/null 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = std::system(cmd.c_str());
  const double secs = Seconds(t0);
  const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  check(code == 0, "exit " + std::to_string(code));
  check(secs < kSmokeBudget, "runtime " + Fmt(secs, 1) + " s");
  int abandoned = -1, sessions = 0;
  if (std::filesystem::exists(out / "manifest.json")) {
    const auto m = RunManifest::FromJson(ReadJsonFile(out / "manifest.json"));
    abandoned = m.Abandoned();
    sessions = static_cast<int>(m.sessions.size());
  }
  check(abandoned == 0, "abandoned " + std::to_string(abandoned));
  check(std::filesystem::exists(out / "report.json"), "no report.json");
  return Summarize(check, "exit " + std::to_string(code) + ", " + std::to_string(sessions) + " sessions, " +
                              std::to_string(abandoned) + " abandoned, " + Fmt(secs, 2) + " s");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"statistics oracle", StatsOracle},
      {"report table shape", TableShape},
      {"scripted-stub calibration", Calibration},
      {"session cap and loop invariants", CapAndLoop},
      {"variant containment", Containment},
      {"allocation balance", Balance},
      {"grammar round-trip", Grammar},
      {"determinism", Determinism},
      {"extraction fidelity", Extraction},
      {"end-to-end smoke", Smoke},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << (i + 1) << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
