#include "agentab/pipeline.hpp"

#include <sstream>

#include "agentab/analysis.hpp"
#include "agentab/trace_store.hpp"

namespace agentab {

namespace {

std::filesystem::path Artifact(const ExperimentConfig& cfg, std::string_view name) { return cfg.output_dir / name; }

void Require(const std::filesystem::path& p, std::string_view producer) {
  if (!std::filesystem::exists(p)) {
    throw MissingArtifactError("missing artifact " + p.string() + " (run `agentab " + std::string(producer) +
                               "` first)");
  }
}

std::unique_ptr<ModelClient> MakeModel(const ModelSpec& spec) {
  if (const auto* p = std::get_if<ScriptedPolicy>(&spec)) return std::make_unique<ScriptedModel>(*p);
  return std::make_unique<HttpChatClient>(std::get<ModelConfig>(spec));
}

PersonaPool LoadPool(const ExperimentConfig& cfg) {
  const auto path = Artifact(cfg, kPersonasFile);
  Require(path, "personas");
  PersonaPool pool = PersonaPool::Load(path);
  if (pool.spec_fingerprint != cfg.agent_spec.Fingerprint()) {
    throw MissingArtifactError(path.string() + " was generated from a different agent_spec (run `agentab personas`)");
  }
  return pool;
}

Allocation LoadAllocation(const ExperimentConfig& cfg, const PersonaPool& pool) {
  const auto path = Artifact(cfg, kAllocationFile);
  Require(path, "allocate");
  Allocation a = AllocationFromJson(ReadJsonFile(path));
  for (const auto& [id, arm] : a.assignment) {
    if (pool.Find(id) == nullptr) throw MissingArtifactError(path.string() + " names persona " + id + " absent from personas.json");
  }
  return a;
}

}  // namespace

PersonaPool StagePersonas(const ExperimentConfig& cfg) {
  auto model = MakeModel(cfg.model);
  PersonaPool pool = GeneratePersonas(cfg.agent_spec, *model, cfg.seeds.personas, cfg.parallelism);
  std::filesystem::create_directories(cfg.output_dir);
  WriteJsonFile(Artifact(cfg, kPersonasFile), pool.ToJson());
  return pool;
}

RerandomizeResult StageAllocate(const ExperimentConfig& cfg) {
  const PersonaPool pool = LoadPool(cfg);
  const auto sample = Sample(pool, cfg.sample_n, cfg.seeds.sample);
  RerandomizeResult r = Rerandomize(sample, cfg.arms, cfg.agent_spec.attributes, cfg.balance_threshold,
                                    cfg.max_attempts, cfg.seeds.allocation);
  WriteJsonFile(Artifact(cfg, kAllocationFile), AllocationToJson(r.allocation, r.report));
  return r;
}

ExperimentPlan BuildPlan(const ExperimentConfig& cfg) {
  ExperimentPlan plan;
  plan.arms = cfg.arms;
  plan.pool = LoadPool(cfg);
  plan.allocation = LoadAllocation(cfg, plan.pool);
  plan.env_backend = cfg.env_backend;
  plan.model = cfg.model;
  plan.limits = cfg.limits;
  plan.parallelism = cfg.parallelism;
  plan.seed = cfg.seeds.run;
  plan.output_dir = cfg.output_dir;
  plan.prompt_template = cfg.prompt_template;
  plan.clock = cfg.clock;
  return plan;
}

RunManifest StageRun(const ExperimentConfig& cfg, std::ostream* progress) {
  const ExperimentPlan plan = BuildPlan(cfg);
  RunOptions opts;
  opts.progress = progress;
  return RunExperiment(plan, opts);
}

AnalyzeResult StageAnalyze(const ExperimentConfig& cfg, std::ostream* diagnostics) {
  const auto manifest_path = Artifact(cfg, kManifestFile);
  Require(manifest_path, "run");
  const RunManifest manifest = RunManifest::FromJson(ReadJsonFile(manifest_path));
  const PersonaPool pool = LoadPool(cfg);

  AnalyzeResult out;
  LoadResult loaded = LoadTraces(cfg.output_dir / kTracesDir);
  out.rejected_traces = static_cast<int>(loaded.rejected.size());
  if (diagnostics != nullptr) {
    for (const auto& d : loaded.rejected) *diagnostics << "rejected trace " << d.file << ": " << d.error << '\n';
  }
  const auto& traces = loaded.traces;

  std::vector<ArmSummary> summaries;
  for (const auto& arm : cfg.arms) summaries.push_back(Summarize(traces, arm.name));
  const auto tests = CompareArms(traces, cfg.arms[1].name, cfg.arms[0].name);
  std::optional<BaselineSummary> baseline;
  if (cfg.analysis.baseline) baseline = BaselineSummary::Load(*cfg.analysis.baseline);

  std::string text = RenderReport(summaries, tests, baseline, ReportFormat::kText);
  Json doc = ReportJson(summaries, tests, baseline);

  if (!cfg.analysis.stratify.empty()) {
    std::map<std::string, Persona> personas;
    for (const auto& p : pool.personas) personas.emplace(p.id, p);
    const std::vector<std::string> arm_names = {cfg.arms[0].name, cfg.arms[1].name};
    Json strata_j = Json::array();
    std::ostringstream st;
    for (const auto& spec : cfg.analysis.stratify) {
      for (const auto& s : Stratify(traces, personas, spec.attribute, arm_names, spec.cut_points)) {
        st << "\n== " << spec.attribute << " " << s.label << " (" << s.n_sessions << " sessions) ==\n";
        if (s.tests_suppressed) st << "tests suppressed: an arm has fewer than 2 sessions\n";
        st << RenderReport(s.summaries, s.tests, std::nullopt, ReportFormat::kText);
        Json sj = ReportJson(s.summaries, s.tests, std::nullopt);
        strata_j.push_back({{"attribute", spec.attribute},
                            {"label", s.label},
                            {"n_sessions", s.n_sessions},
                            {"tests_suppressed", s.tests_suppressed},
                            {"report", sj}});
      }
    }
    text += "\nStrata\n" + st.str();
    doc["strata"] = strata_j;
  }

  out.sessions = static_cast<int>(manifest.sessions.size());
  out.abandoned = manifest.Abandoned();
  const double frac = out.sessions == 0 ? 0.0 : static_cast<double>(out.abandoned) / out.sessions;
  out.abandoned_over_threshold = frac > cfg.analysis.max_abandoned_fraction;
  doc["run"] = {{"sessions", out.sessions},
                {"abandoned", out.abandoned},
                {"rejected_traces", out.rejected_traces},
                {"plan_fingerprint", manifest.plan_fingerprint}};
  text += "\nsessions " + std::to_string(out.sessions) + ", abandoned " + std::to_string(out.abandoned) +
          ", rejected traces " + std::to_string(out.rejected_traces) + "\n";

  out.report_text = Artifact(cfg, kReportText);
  out.report_json = Artifact(cfg, kReportJson);
  out.sessions_csv = Artifact(cfg, kSessionsCsv);
  WriteFile(out.report_text, text);
  WriteJsonFile(out.report_json, doc);
  ExportTabular(traces, out.sessions_csv);
  return out;
}

}  // namespace agentab
