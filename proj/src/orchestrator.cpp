#include "agentab/orchestrator.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <set>
#include <thread>

#include "agentab/clock.hpp"
#include "agentab/trace_store.hpp"

namespace agentab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string SessionIdFor(const std::string& arm, const std::string& persona_id) { return arm + "-" + persona_id; }

}  // namespace

void ExperimentPlan::Validate() const {
  if (arms.size() < 2) throw ValidationError("plan needs at least two arms");
  std::set<std::string> names;
  for (const auto& a : arms) {
    if (a.name.empty()) throw ValidationError("arm with empty name");
    if (a.name.find_first_of("/\\") != std::string::npos) throw ValidationError("arm name may not contain '/'");
    if (!names.insert(a.name).second) throw ValidationError("duplicate arm name " + a.name);
  }
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
  limits.Validate();
  if (allocation.assignment.empty()) throw ValidationError("allocation is empty");
  for (const auto& [id, arm] : allocation.assignment) {
    if (!names.contains(arm)) throw ValidationError("allocation arm '" + arm + "' is not a plan arm");
    if (pool.Find(id) == nullptr) throw ValidationError("allocated persona " + id + " is not in the persona pool");
    if (!pool.intentions.contains(id)) throw ValidationError("persona " + id + " has no intention");
  }
  std::visit(Overloaded{
                 [&](const MockShopBackend& m) {
                   for (const auto& a : arms) {
                     if (!m.variants.contains(a.variant_id)) {
                       throw ValidationError("mock shop has no variant '" + a.variant_id + "' for arm " + a.name);
                     }
                   }
                 },
                 [&](const WebDriverBackend& w) {
                   if (w.driver.endpoint.empty()) throw ValidationError("webdriver endpoint must be set");
                   for (const auto& a : arms) {
                     if (!w.start_urls.contains(a.variant_id)) {
                       throw ValidationError("no start URL for variant '" + a.variant_id + "'");
                     }
                   }
                 },
             },
             env_backend);
  if (const auto* p = std::get_if<ScriptedPolicy>(&model)) p->Validate();
  if (const auto* m = std::get_if<ModelConfig>(&model)) m->Validate();
}

std::string ExperimentPlan::Fingerprint() const {
  Json arms_j = Json::array();
  for (const auto& a : arms) arms_j.push_back({{"name", a.name}, {"variant_id", a.variant_id}});
  Json env;
  std::visit(Overloaded{
                 [&](const MockShopBackend& m) {
                   Json variants = Json::object();
                   for (const auto& [id, v] : m.variants) variants[id] = v.ToJson();
                   // The catalog's content, not its path, shapes behaviour.
                   env = {{"kind", "mockshop"}, {"catalog_sha256", Sha256Hex(ReadFile(m.catalog_path))},
                          {"variants", variants}};
                 },
                 [&](const WebDriverBackend& w) {
                   Json urls = Json::object();
                   for (const auto& [id, u] : w.start_urls) urls[id] = u;
                   env = {{"kind", "webdriver"}, {"endpoint", w.driver.endpoint},
                          {"ruleset_sha256", Sha256Hex(ReadFile(w.ruleset_path))}, {"start_urls", urls}};
                 },
             },
             env_backend);
  Json model_j;
  if (const auto* p = std::get_if<ScriptedPolicy>(&model)) {
    model_j = {{"kind", "scripted"}, {"policy", p->ToJson()}};
  } else {
    Json m = std::get<ModelConfig>(model).ToJson();
    model_j = {{"kind", "http"}, {"config", m}};
  }
  Json doc = {{"arms", arms_j},
              {"allocation", AllocationToJson(allocation, BalanceReport{})},
              {"pool", Sha256Hex(pool.ToJson().dump())},
              {"env", env},
              {"model", model_j},
              {"limits", limits.ToJson()},
              {"seed", seed},
              {"prompt", prompt_template ? Sha256Hex(ReadFile(*prompt_template)) : std::string("default")}};
  return Sha256Hex(doc.dump());
}

std::string_view ToString(SessionStatus s) {
  switch (s) {
    case SessionStatus::kPending: return "pending";
    case SessionStatus::kRunning: return "running";
    case SessionStatus::kDone: return "done";
    case SessionStatus::kRetried: return "retried";
    case SessionStatus::kAbandoned: return "abandoned";
  }
  return "pending";
}

namespace {

SessionStatus SessionStatusFromString(std::string_view s) {
  for (auto st : {SessionStatus::kPending, SessionStatus::kRunning, SessionStatus::kDone, SessionStatus::kRetried,
                  SessionStatus::kAbandoned}) {
    if (ToString(st) == s) return st;
  }
  throw SchemaError("unknown session status " + std::string(s));
}

}  // namespace

std::map<std::string, std::map<std::string, int>> RunManifest::CountsPerArm() const {
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& [id, r] : sessions) {
    auto& c = counts[r.arm];
    for (auto k : {"sessions", "done", "retried", "abandoned"}) c.try_emplace(k, 0);
    ++c["sessions"];
    ++c[std::string(ToString(r.status))];
  }
  return counts;
}

int RunManifest::Abandoned() const {
  int n = 0;
  for (const auto& [id, r] : sessions) n += r.status == SessionStatus::kAbandoned;
  return n;
}

Json RunManifest::ToJson() const {
  Json s = Json::object();
  for (const auto& [id, r] : sessions) {
    s[id] = {{"session_id", r.session_id},
             {"arm", r.arm},
             {"status", ToString(r.status)},
             {"outcome", r.outcome ? Json(ToString(*r.outcome)) : Json(nullptr)},
             {"attempts", r.attempts},
             {"error", r.error}};
  }
  Json counts = Json::object();
  for (const auto& [arm, c] : CountsPerArm()) {
    Json cj = Json::object();
    for (const auto& [k, v] : c) cj[k] = v;
    counts[arm] = cj;
  }
  return {{"tool_version", tool_version}, {"plan_fingerprint", plan_fingerprint},
          {"started", started},           {"finished", finished},
          {"counts", counts},             {"sessions", s}};
}

RunManifest RunManifest::FromJson(const Json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.plan_fingerprint = j.at("plan_fingerprint").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    for (const auto& [id, r] : j.at("sessions").items()) {
      SessionRecord rec;
      rec.persona_id = id;
      rec.session_id = r.at("session_id").get<std::string>();
      rec.arm = r.at("arm").get<std::string>();
      rec.status = SessionStatusFromString(r.at("status").get<std::string>());
      if (!r.at("outcome").is_null()) rec.outcome = OutcomeKindFromString(r.at("outcome").get<std::string>());
      rec.attempts = r.at("attempts").get<int>();
      rec.error = r.at("error").get<std::string>();
      m.sessions[id] = std::move(rec);
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  return m;
}

ProgressTracker::ProgressTracker(const std::map<std::string, int>& sessions_per_arm) {
  for (const auto& [arm, n] : sessions_per_arm) state_[arm].pending = n;
}

void ProgressTracker::Start(const std::string& arm) {
  std::lock_guard lock(mu_);
  auto& p = state_.at(arm);
  --p.pending;
  ++p.running;
}

void ProgressTracker::Finish(const std::string& arm, bool abandoned) {
  std::lock_guard lock(mu_);
  auto& p = state_.at(arm);
  --p.running;
  ++(abandoned ? p.abandoned : p.done);
}

ProgressSnapshot ProgressTracker::Snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

ProgressSnapshot Progress(const ProgressTracker& tracker) { return tracker.Snapshot(); }

namespace {

struct Job {
  std::string session_id;
  std::string persona_id;
  std::string arm;
  std::string variant_id;
};

struct JobResult {
  std::size_t job = 0;
  std::optional<SessionTrace> trace;
  int attempts = 0;
  std::string error;
};

// Many producers, one consumer.
class ResultQueue {
 public:
  void Push(JobResult r) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(r));
    }
    cv_.notify_one();
  }
  JobResult Pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty(); });
    JobResult r = std::move(items_.front());
    items_.pop_front();
    return r;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<JobResult> items_;
};

// Shared, immutable per-run resources.
struct Resources {
  std::shared_ptr<const Catalog> catalog;
  std::shared_ptr<const ExtractionRuleset> ruleset;
  std::shared_ptr<ModelClient> model;
  PromptTemplate prompt;
};

std::unique_ptr<EnvSession> MakeEnv(const ExperimentPlan& plan, const Resources& res, const std::string& variant) {
  if (const auto* m = std::get_if<MockShopBackend>(&plan.env_backend)) {
    return std::make_unique<MockShopSession>(res.catalog, m->variants.at(variant));
  }
  const auto& w = std::get<WebDriverBackend>(plan.env_backend);
  WebDriverEnvConfig cfg;
  cfg.driver = w.driver;
  cfg.start_url = w.start_urls.at(variant);
  cfg.variant = variant;
  auto env = std::make_unique<WebDriverSession>(res.ruleset, cfg);
  env->Open();
  return env;
}

std::unique_ptr<Clock> MakeClock(ClockMode mode) {
  if (mode == ClockMode::kFrozen) return std::make_unique<FrozenClock>();
  return std::make_unique<WallClock>();
}

void ClearTraceDir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto& p = e.path();
    if (e.is_regular_file() && (p.extension() == ".json" || p.filename() == kIndexFileName)) {
      std::filesystem::remove(p);
    }
  }
}

void CheckWritable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write-probe";
  try {
    WriteFile(probe, "");
  } catch (const Error&) {
    throw ValidationError("output_dir is not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace

RunManifest RunExperiment(const ExperimentPlan& plan, const RunOptions& options) {
  plan.Validate();
  CheckWritable(plan.output_dir);

  Resources res;
  if (const auto* m = std::get_if<MockShopBackend>(&plan.env_backend)) {
    res.catalog = std::make_shared<const Catalog>(Catalog::Load(m->catalog_path));
  } else {
    res.ruleset = std::make_shared<const ExtractionRuleset>(
        ExtractionRuleset::Load(std::get<WebDriverBackend>(plan.env_backend).ruleset_path));
  }
  if (const auto* p = std::get_if<ScriptedPolicy>(&plan.model)) {
    res.model = std::make_shared<ScriptedModel>(*p);
  } else {
    res.model = std::make_shared<HttpChatClient>(std::get<ModelConfig>(plan.model));
  }
  res.prompt = plan.prompt_template ? PromptTemplate::Load(*plan.prompt_template) : PromptTemplate::Default();

  // Arm order as declared, persona ids ascending within an arm.
  std::vector<Job> jobs;
  std::map<std::string, int> per_arm;
  for (const auto& arm : plan.arms) {
    per_arm[arm.name] = 0;
    for (const auto& id : plan.allocation.Members(arm.name)) {
      jobs.push_back({SessionIdFor(arm.name, id), id, arm.name, arm.variant_id});
      ++per_arm[arm.name];
    }
  }

  const auto run_clock = MakeClock(plan.clock);
  RunManifest manifest;
  manifest.tool_version = std::string(kToolVersion);
  manifest.plan_fingerprint = plan.Fingerprint();
  manifest.started = run_clock->Timestamp();
  for (const auto& j : jobs) {
    SessionRecord rec;
    rec.session_id = j.session_id;
    rec.persona_id = j.persona_id;
    rec.arm = j.arm;
    manifest.sessions[j.persona_id] = std::move(rec);
  }

  const auto trace_dir = plan.output_dir / "traces";
  ClearTraceDir(trace_dir);
  TraceWriter writer(trace_dir);
  ProgressTracker tracker(per_arm);
  if (options.on_start) options.on_start(tracker);

  auto emit = [&](const std::string& event, const Job& job, const std::string& status) {
    if (options.progress == nullptr) return;
    Json line = {{"event", event}, {"session_id", job.session_id}, {"arm", job.arm}, {"status", status}};
    Json totals = Json::object();
    for (const auto& [arm, p] : tracker.Snapshot()) {
      totals[arm] = {{"pending", p.pending}, {"running", p.running}, {"done", p.done}, {"abandoned", p.abandoned}};
    }
    line["progress"] = totals;
    *options.progress << line.dump() << '\n' << std::flush;
  };

  ResultQueue queue;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      tracker.Start(job.arm);
      JobResult result{i, std::nullopt, 0, {}};
      for (int attempt = 1; attempt <= 2 && !result.trace; ++attempt) {
        result.attempts = attempt;
        try {
          if (options.crash_hook) options.crash_hook(job.session_id, attempt);
          auto env = MakeEnv(plan, res, job.variant_id);
          const auto clock = MakeClock(plan.clock);
          SessionInput input{job.session_id, *plan.pool.Find(job.persona_id), plan.pool.intentions.at(job.persona_id),
                             job.arm, DeriveSeed(plan.seed, job.persona_id)};
          result.trace = RunSession(input, *env, *res.model, plan.limits, *clock, res.prompt);
        } catch (const std::exception& e) {
          result.error = e.what();
        } catch (...) {
          result.error = "unknown exception";
        }
      }
      tracker.Finish(job.arm, !result.trace);
      queue.Push(std::move(result));
    }
  };

  {
    std::vector<std::jthread> pool;
    const int n_workers = std::min<int>(plan.parallelism, static_cast<int>(jobs.size()));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);

    // Consumer: the only writer of traces and of the manifest.
    for (std::size_t received = 0; received < jobs.size(); ++received) {
      JobResult r = queue.Pop();
      const Job& job = jobs[r.job];
      SessionRecord& rec = manifest.sessions[job.persona_id];
      rec.attempts = r.attempts;
      if (r.trace) {
        writer.Write(*r.trace);
        rec.status = r.attempts > 1 ? SessionStatus::kRetried : SessionStatus::kDone;
        rec.outcome = r.trace->outcome.kind;
        rec.error = r.attempts > 1 ? r.error : std::string();
      } else {
        rec.status = SessionStatus::kAbandoned;
        rec.error = r.error;
      }
      emit("session_finished", job, std::string(ToString(rec.status)));
    }
  }

  manifest.finished = run_clock->Timestamp();
  WriteJsonFile(plan.output_dir / "manifest.json", manifest.ToJson());
  return manifest;
}

}  // namespace agentab
