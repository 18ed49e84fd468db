#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "agentab/agent.hpp"
#include "agentab/allocation.hpp"
#include "agentab/mock_shop.hpp"
#include "agentab/model_client.hpp"
#include "agentab/persona.hpp"
#include "agentab/webdriver_env.hpp"

namespace agentab {

struct MockShopBackend {
  std::filesystem::path catalog_path;
  std::map<std::string, VariantConfig> variants;  // variant id -> config
};

struct WebDriverBackend {
  WebDriverClient::Options driver;
  std::filesystem::path ruleset_path;
  std::map<std::string, std::string> start_urls;  // variant id -> URL
};

using EnvBackend = std::variant<MockShopBackend, WebDriverBackend>;
using ModelSpec = std::variant<ModelConfig, ScriptedPolicy>;

enum class ClockMode { kWall, kFrozen };

struct ExperimentPlan {
  std::vector<Arm> arms;
  Allocation allocation;
  PersonaPool pool;
  EnvBackend env_backend;
  ModelSpec model;
  SessionLimits limits;
  int parallelism = 1;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> prompt_template;
  ClockMode clock = ClockMode::kWall;

  void Validate() const;
  // Everything that shapes session behaviour; parallelism and output_dir
  // are excluded.
  std::string Fingerprint() const;
};

enum class SessionStatus { kPending, kRunning, kDone, kRetried, kAbandoned };
std::string_view ToString(SessionStatus s);

struct SessionRecord {
  std::string session_id;
  std::string persona_id;
  std::string arm;
  SessionStatus status = SessionStatus::kPending;
  std::optional<OutcomeKind> outcome;
  int attempts = 0;
  std::string error;  // last crash message, if any
};

struct ArmProgress {
  int pending = 0;
  int running = 0;
  int done = 0;
  int abandoned = 0;

  int Total() const { return pending + running + done + abandoned; }
  bool operator==(const ArmProgress&) const = default;
};

using ProgressSnapshot = std::map<std::string, ArmProgress>;

struct RunManifest {
  std::string tool_version;
  std::string plan_fingerprint;
  std::string started;
  std::string finished;
  std::map<std::string, SessionRecord> sessions;  // keyed by persona id

  std::map<std::string, std::map<std::string, int>> CountsPerArm() const;
  int Abandoned() const;

  Json ToJson() const;
  static RunManifest FromJson(const Json& j);
};

// Live progress shared between workers and the consumer.
class ProgressTracker {
 public:
  explicit ProgressTracker(const std::map<std::string, int>& sessions_per_arm);
  void Start(const std::string& arm);
  void Finish(const std::string& arm, bool abandoned);
  ProgressSnapshot Snapshot() const;

 private:
  mutable std::mutex mu_;
  ProgressSnapshot state_;
};

// Conservation holds at every snapshot: the per-arm counts sum to the
// number of sessions allocated to that arm.
ProgressSnapshot Progress(const ProgressTracker& tracker);

struct RunOptions {
  // Progress records (one JSON object per line); null silences them.
  std::ostream* progress = nullptr;
  // Test hook run at the start of every session attempt; an exception it
  // throws counts as a crash of that attempt.
  std::function<void(const std::string& session_id, int attempt)> crash_hook;
  // Receives a live tracker for the duration of the run.
  std::function<void(const ProgressTracker&)> on_start;
};

// Runs every allocated (persona, arm) pair, streaming traces into
// output_dir/traces and writing output_dir/manifest.json last.
RunManifest RunExperiment(const ExperimentPlan& plan, const RunOptions& options = {});

}  // namespace agentab
