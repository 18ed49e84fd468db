#pragma once

#include <filesystem>
#include <ostream>

#include "agentab/config.hpp"

namespace agentab {

// Artifact names under output_dir.
inline constexpr std::string_view kPersonasFile = "personas.json";
inline constexpr std::string_view kAllocationFile = "allocation.json";
inline constexpr std::string_view kTracesDir = "traces";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kReportText = "report.txt";
inline constexpr std::string_view kReportJson = "report.json";
inline constexpr std::string_view kSessionsCsv = "sessions.csv";

// A stage's input artifact is absent or stale.
class MissingArtifactError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Generates agent_spec.count personas with seeds.personas.
PersonaPool StagePersonas(const ExperimentConfig& cfg);

// Samples sample_n personas (seeds.sample) and rerandomizes them over the
// arms (seeds.allocation).
RerandomizeResult StageAllocate(const ExperimentConfig& cfg);

ExperimentPlan BuildPlan(const ExperimentConfig& cfg);
RunManifest StageRun(const ExperimentConfig& cfg, std::ostream* progress);

struct AnalyzeResult {
  std::filesystem::path report_text;
  std::filesystem::path report_json;
  std::filesystem::path sessions_csv;
  int sessions = 0;
  int abandoned = 0;
  int rejected_traces = 0;
  bool abandoned_over_threshold = false;
};

AnalyzeResult StageAnalyze(const ExperimentConfig& cfg, std::ostream* diagnostics);

}  // namespace agentab
