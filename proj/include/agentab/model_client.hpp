#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "agentab/environment.hpp"

namespace agentab {

enum class Role { kSystem, kUser, kAssistant };

std::string_view ToString(Role r);

struct Message {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const Message&) const = default;
};

// Who is asking. Scripted backends key their random draws on this; remote
// backends ignore it.
struct ChatContext {
  std::string session_id;
  std::string arm;
  int step_index = 0;
  std::uint64_t session_seed = 0;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  // Precondition: non-empty messages. Thread-safe.
  virtual std::string Chat(const std::vector<Message>& messages, const ChatContext& ctx) = 0;
};

struct ModelConfig {
  std::string endpoint;  // full URL of an OpenAI-style chat-completions route
  std::string model_name;
  double temperature = 0.7;
  int max_tokens = 512;
  double timeout = 60.0;        // seconds, per attempt
  int retries = 3;
  double backoff_base = 1.0;    // seconds; attempt k waits base * 2^(k-1)
  std::string api_key_env = "OPENAI_API_KEY";

  static ModelConfig FromJson(const Json& j);
  Json ToJson() const;
  void Validate() const;
};

struct ChatReply {
  std::string text;
  int retries = 0;
};

class HttpChatClient final : public ModelClient {
 public:
  explicit HttpChatClient(ModelConfig config);

  std::string Chat(const std::vector<Message>& messages, const ChatContext& ctx) override;
  // Same as Chat, also reporting how many re-attempts were needed. Retries
  // connection failures, timeouts, 429 and 5xx; other statuses fail at once.
  ChatReply Complete(const std::vector<Message>& messages) const;

  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

// Request body in the chat-completions shape.
Json BuildChatRequest(const std::vector<Message>& messages, const ModelConfig& config);
// choices[0].message.content; throws TransportError on any other shape.
std::string ParseChatResponse(std::string_view body);

// Observation predicate: every present field must hold.
struct RulePredicate {
  std::optional<PageType> page_type;
  std::optional<std::string> arm;
  std::optional<bool> has_products;
  std::optional<bool> has_filters;
  std::optional<bool> filter_selected;
  std::optional<int> min_cart;
  std::optional<int> max_cart;
  std::optional<int> min_step;

  bool Unconditional() const;
  bool Matches(const Observation& obs, const ChatContext& ctx) const;
};

struct RuleChoice {
  std::string action_template;
  double weight = 1.0;
};

struct ScriptedRule {
  RulePredicate when;
  std::vector<RuleChoice> choices;  // one entry = deterministic rule
};

// Rule-driven stand-in for a language model. Action templates may use
// {query}, {goal}, {random_product}, {top_rated_product}, {cheapest_product},
// {relevant_filter}, {first_filter}.
struct ScriptedPolicy {
  std::vector<ScriptedRule> rules;
  std::uint64_t seed = 0;

  // At least one unconditional rule; each rule's weights sum to 1 ± 1e-9.
  void Validate() const;
  static ScriptedPolicy FromJson(const Json& j);
  Json ToJson() const;
};

// Tags delimiting machine-readable blocks inside prompts.
inline constexpr std::string_view kObservationOpen = "<observation>";
inline constexpr std::string_view kObservationClose = "</observation>";
inline constexpr std::string_view kIntentionOpen = "<intention>";
inline constexpr std::string_view kIntentionClose = "</intention>";
inline constexpr std::string_view kDemographicsOpen = "<demographics>";
inline constexpr std::string_view kDemographicsClose = "</demographics>";

// Text between the last `open`/`close` pair across messages, if any.
std::optional<std::string> FindTaggedBlock(const std::vector<Message>& messages, std::string_view open,
                                           std::string_view close);

class ScriptedModel final : public ModelClient {
 public:
  explicit ScriptedModel(ScriptedPolicy policy);

  // For agent prompts: the first matching rule fires, stochastic rules
  // resolved by a draw keyed on (seed, session id, step).
  // For persona prompts (a <demographics> block, no observation): a persona
  // document built around the given demographics.
  std::string Chat(const std::vector<Message>& messages, const ChatContext& ctx) override;

  const ScriptedPolicy& policy() const { return policy_; }

 private:
  std::string ChatAction(const std::vector<Message>& messages, const ChatContext& ctx) const;
  std::string ChatPersona(const std::vector<Message>& messages, const ChatContext& ctx) const;

  ScriptedPolicy policy_;
};

}  // namespace agentab
