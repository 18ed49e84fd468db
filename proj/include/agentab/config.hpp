#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agentab/orchestrator.hpp"

namespace agentab {

struct Seeds {
  std::uint64_t personas = 0;
  std::uint64_t sample = 0;
  std::uint64_t allocation = 0;
  std::uint64_t run = 0;
};

struct StratifySpec {
  std::string attribute;
  std::vector<double> cut_points;
};

struct AnalysisConfig {
  std::optional<std::filesystem::path> baseline;
  std::vector<StratifySpec> stratify;
  // analyze exits 3 when more than this fraction of sessions was abandoned
  double max_abandoned_fraction = 0.05;
};

// One experiment document drives every stage. Input paths are resolved
// against the document's directory; output_dir against the working dir.
struct ExperimentConfig {
  AgentSpec agent_spec;
  int sample_n = 0;
  std::vector<Arm> arms;  // arms[0] is control
  EnvBackend env_backend;
  ModelSpec model;
  SessionLimits limits;
  double balance_threshold = kDefaultBalanceThreshold;
  int max_attempts = kDefaultMaxAttempts;
  int parallelism = 1;
  Seeds seeds;
  std::filesystem::path output_dir;
  ClockMode clock = ClockMode::kWall;
  std::optional<std::filesystem::path> prompt_template;
  AnalysisConfig analysis;
};

// Schema violations throw ValidationError whose message starts with the
// JSON pointer of the offending value, e.g. "/seeds/run: missing".
ExperimentConfig ParseConfig(const Json& doc, const std::filesystem::path& base_dir);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

}  // namespace agentab
