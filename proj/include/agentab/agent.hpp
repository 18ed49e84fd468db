#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentab/clock.hpp"
#include "agentab/environment.hpp"
#include "agentab/model_client.hpp"
#include "agentab/persona.hpp"

namespace agentab {

// ---- action grammar ----

class ActionParseError : public Error {
 public:
  using Error::Error;
};

struct ParsedAction {
  Action action;
  std::size_t start = 0;  // byte offset of the match in the input
  std::size_t end = 0;
};

// First well-formed action in `text`, case-insensitive. Parenthesized and
// brace forms win over bare `purchase` / `stop` keywords. No space check.
std::optional<ParsedAction> FindAction(std::string_view text);

// FindAction plus an ActionSpace check. Throws ActionParseError when nothing
// parses and OutOfSpaceError when the action is not allowed.
Action ParseAction(std::string_view text, const ActionSpace& space);

// ---- session model ----

struct SessionLimits {
  int max_actions = 20;
  double max_wall_time = 600.0;  // seconds
  int loop_window = 3;

  void Validate() const;
  static SessionLimits FromJson(const Json& j);
  Json ToJson() const;
};

enum class OutcomeKind { kStopped, kActionCap, kTimeCap, kLooping, kExecFailure, kParseFailure };

inline constexpr std::array<OutcomeKind, 6> kAllOutcomeKinds = {
    OutcomeKind::kStopped,     OutcomeKind::kActionCap,   OutcomeKind::kTimeCap,
    OutcomeKind::kLooping,     OutcomeKind::kExecFailure, OutcomeKind::kParseFailure};

std::string_view ToString(OutcomeKind k);
OutcomeKind OutcomeKindFromString(std::string_view s);

struct SessionOutcome {
  OutcomeKind kind = OutcomeKind::kStopped;
  bool converted = false;
  int purchases = 0;
  double spend = 0.0;
  std::string reason;  // failure detail, empty otherwise

  bool operator==(const SessionOutcome&) const = default;
};

struct StepRecord {
  int step_index = 0;
  Observation observation;
  std::string prompt_digest;
  std::string raw_model_text;
  std::optional<Action> action;      // absent => parse failure
  std::string parse_error;           // set iff action is absent
  std::string repair_error;          // parser error that triggered the corrective re-prompt
  std::optional<ExecResult> exec;    // absent iff action is absent
  std::optional<std::string> rationale;
  double wall_time = 0.0;

  bool operator==(const StepRecord&) const = default;
};

inline constexpr int kTraceSchemaVersion = 1;

struct SessionTrace {
  int schema_version = kTraceSchemaVersion;
  std::string session_id;
  std::string persona_id;
  std::string arm;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  SessionOutcome outcome;
  std::map<ActionKind, int> totals;
  double spend = 0.0;
  double duration = 0.0;

  int TotalActions() const;
  bool operator==(const SessionTrace&) const = default;
};

// Counts of parsed actions per kind (all kinds present, zeros included).
std::map<ActionKind, int> ComputeTotals(const std::vector<StepRecord>& steps);
// Prices of purchases that took effect, read from the product page observed
// at that step.
double ComputeSpend(const std::vector<StepRecord>& steps);
int CountPurchases(const std::vector<StepRecord>& steps);

struct AgentState {
  Persona persona;
  Intention intention;
  std::string arm;
  int step_index = 0;
  std::vector<StepRecord> history;
  std::optional<SessionOutcome> done;
};

// Order: stopped, looping, action_cap, time_cap.
std::optional<OutcomeKind> DecideTermination(const AgentState& state, const SessionLimits& limits, double elapsed);

// ---- prompting ----

// Two-part text template with {{name}} placeholders: persona, goal,
// intention_json, history, observation_json, action_space, grammar.
struct PromptTemplate {
  std::string system;
  std::string user;

  static PromptTemplate Default();
  // File layout: a line "[system]", its text, a line "[user]", its text.
  static PromptTemplate Load(const std::filesystem::path& path);
  static PromptTemplate Parse(std::string_view text);
};

inline constexpr std::string_view kActionGrammar =
    "search(\"<query>\") | click_product(<N>) | click_filter_option(\"<Group>: <Value>\") | purchase | stop";

std::string DescribeActionSpace(const ActionSpace& space);
std::string SummarizeStep(const StepRecord& step);

std::vector<Message> BuildPrompt(const AgentState& state, const Observation& obs, const ActionSpace& space,
                                 const SessionLimits& limits, const PromptTemplate& tmpl = PromptTemplate::Default());
std::string PromptDigest(const std::vector<Message>& messages);

// ---- the loop ----

struct SessionInput {
  std::string session_id;
  Persona persona;
  Intention intention;
  std::string arm;
  std::uint64_t seed = 0;
};

// Runs until DecideTermination fires. Library errors from the environment or
// model become exec_failure / parse_failure outcomes; anything else escapes.
SessionTrace RunSession(const SessionInput& input, EnvSession& env, ModelClient& model, const SessionLimits& limits,
                        const Clock& clock, const PromptTemplate& tmpl = PromptTemplate::Default());

}  // namespace agentab
