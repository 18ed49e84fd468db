#include <doctest.h>

#include <atomic>
#include <sstream>

#include "agentab/orchestrator.hpp"
#include "agentab/trace_store.hpp"
#include "experiment.hpp"

using namespace agentab;
using namespace agentab::testing;

namespace {

std::map<std::string, std::string> Digests(const std::filesystem::path& out) {
  std::map<std::string, std::string> d;
  const auto loaded = LoadTraces(out / "traces");
  CHECK(loaded.rejected.empty());
  for (const auto& t : loaded.traces) d[t.session_id] = TraceDigest(t);
  return d;
}

}  // namespace

TEST_CASE("six sessions over two arms") {
  const auto cfg = Parse(SmallDoc("orch_six", 20, 6));
  const auto plan = PreparedPlan(cfg);
  const auto m = RunExperiment(plan);
  REQUIRE(m.sessions.size() == 6);
  const auto counts = m.CountsPerArm();
  CHECK(counts.at("control").at("done") == 3);
  CHECK(counts.at("treatment").at("done") == 3);
  CHECK(m.Abandoned() == 0);
  for (const auto& [pid, rec] : m.sessions) {
    CHECK(rec.session_id == rec.arm + "-" + pid);
    CHECK(rec.attempts == 1);
    CHECK(rec.outcome);
    CHECK(std::filesystem::exists(cfg.output_dir / "traces" / (rec.session_id + ".json")));
  }
  CHECK(m.plan_fingerprint == plan.Fingerprint());
  const auto back = RunManifest::FromJson(ReadJsonFile(cfg.output_dir / "manifest.json"));
  CHECK(back.ToJson() == m.ToJson());

  // Same plan, same behaviour; the frozen clock makes the files identical too.
  const std::string first = ReadFile(cfg.output_dir / "traces" / (m.sessions.begin()->second.session_id + ".json"));
  const auto d1 = Digests(cfg.output_dir);
  RunExperiment(plan);
  CHECK(Digests(cfg.output_dir) == d1);
  CHECK(ReadFile(cfg.output_dir / "traces" / (m.sessions.begin()->second.session_id + ".json")) == first);
}

TEST_CASE("parallelism does not change traces") {
  auto cfg = Parse(SmallDoc("orch_par", 60, 40));
  auto plan = PreparedPlan(cfg);
  plan.parallelism = 1;
  RunExperiment(plan);
  const auto serial = Digests(cfg.output_dir);
  plan.parallelism = 8;
  RunExperiment(plan);
  CHECK(Digests(cfg.output_dir) == serial);
  CHECK(serial.size() == 40);
}

TEST_CASE("fingerprint tracks behaviour, not scheduling") {
  const auto cfg = Parse(SmallDoc("orch_fp", 20, 6));
  auto plan = PreparedPlan(cfg);
  const auto fp = plan.Fingerprint();
  auto p2 = plan;
  p2.parallelism = 7;
  p2.output_dir = "/elsewhere";
  CHECK(p2.Fingerprint() == fp);
  p2.seed += 1;
  CHECK(p2.Fingerprint() != fp);
  auto p3 = plan;
  p3.limits.max_actions = 5;
  CHECK(p3.Fingerprint() != fp);
}

TEST_CASE("a crashed attempt is retried once, then abandoned") {
  const auto cfg = Parse(SmallDoc("orch_crash", 20, 6, 3));
  const auto plan = PreparedPlan(cfg);
  const auto members = plan.allocation.Members("control");
  REQUIRE(members.size() == 3);
  const std::string retried = "control-" + members[0];
  const std::string doomed = "control-" + members[1];
  RunOptions opts;
  std::atomic<int> calls{0};
  opts.crash_hook = [&](const std::string& sid, int attempt) {
    ++calls;
    if (sid == retried && attempt == 1) throw TransportError("browser went away");
    if (sid == doomed) throw TransportError("browser never starts");
  };
  std::ostringstream progress;
  opts.progress = &progress;
  const auto m = RunExperiment(plan, opts);
  CHECK(calls == 6 + 1 + 1);
  const auto& r = m.sessions.at(members[0]);
  CHECK(r.status == SessionStatus::kRetried);
  CHECK(r.attempts == 2);
  CHECK(r.error.find("browser went away") != std::string::npos);
  const auto& a = m.sessions.at(members[1]);
  CHECK(a.status == SessionStatus::kAbandoned);
  CHECK_FALSE(a.outcome);
  CHECK(a.attempts == 2);
  CHECK(m.Abandoned() == 1);
  CHECK_FALSE(std::filesystem::exists(cfg.output_dir / "traces" / (doomed + ".json")));
  CHECK(std::filesystem::exists(cfg.output_dir / "traces" / (retried + ".json")));
  CHECK(m.CountsPerArm().at("control").at("abandoned") == 1);

  // One progress record per session, the last one fully settled.
  std::vector<Json> lines;
  std::istringstream in(progress.str());
  for (std::string line; std::getline(in, line);) lines.push_back(Json::parse(line));
  REQUIRE(lines.size() == 6);
  const Json& last = lines.back()["progress"];
  CHECK(last["control"]["done"] == 2);
  CHECK(last["control"]["abandoned"] == 1);
  CHECK(last["treatment"]["done"] == 3);
  CHECK(last["control"]["running"] == 0);
}

TEST_CASE("progress is conserved while sessions run") {
  const auto cfg = Parse(SmallDoc("orch_progress", 60, 40, 4));
  const auto plan = PreparedPlan(cfg);
  const auto sizes = plan.allocation.ArmSizes();
  const ProgressTracker* live = nullptr;
  std::vector<ProgressSnapshot> snaps;
  RunOptions opts;
  opts.on_start = [&](const ProgressTracker& t) {
    live = &t;
    snaps.push_back(Progress(t));
  };
  opts.crash_hook = [&](const std::string&, int) {
    // Workers sample the shared tracker mid-run.
    static std::mutex mu;
    std::lock_guard lock(mu);
    snaps.push_back(Progress(*live));
  };
  RunExperiment(plan, opts);
  REQUIRE(snaps.size() == 41);
  for (const auto& arm : {"control", "treatment"}) CHECK(snaps.front().at(arm).pending == sizes.at(arm));
  for (const auto& s : snaps) {
    for (const auto& [arm, p] : s) {
      CHECK(p.Total() == sizes.at(arm));
      CHECK(p.running >= 0);
      CHECK(p.running <= 4);
    }
  }
}

TEST_CASE("plan validation") {
  const auto cfg = Parse(SmallDoc("orch_valid", 20, 6));
  const auto plan = PreparedPlan(cfg);
  auto bad = plan;
  bad.allocation.assignment.begin()->second = "nowhere";
  CHECK_THROWS_AS(RunExperiment(bad), ValidationError);
  bad = plan;
  bad.parallelism = 0;
  CHECK_THROWS_AS(RunExperiment(bad), ValidationError);
  bad = plan;
  bad.arms[1].variant_id = "unknown";
  CHECK_THROWS_AS(RunExperiment(bad), ValidationError);
}

TEST_CASE("status names and manifest parsing") {
  CHECK(ToString(SessionStatus::kRetried) == "retried");
  CHECK(ToString(SessionStatus::kAbandoned) == "abandoned");
  CHECK_THROWS(RunManifest::FromJson(Json{{"sessions", 3}}));
}
