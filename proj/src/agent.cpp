#include "agentab/agent.hpp"

#include <algorithm>
#include <cctype>

#include "agent_prompt_default.inc"  // kDefaultPromptText, generated from data/prompts/agent.txt

namespace agentab {

// ---- grammar ----

namespace {

bool IsIdentChar(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool MatchWordAt(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
  }
  if (pos > 0 && IsIdentChar(text[pos - 1])) return false;
  if (pos + word.size() < text.size() && IsIdentChar(text[pos + word.size()])) return false;
  return true;
}

void SkipSpaces(std::string_view text, std::size_t& i) {
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
}

constexpr std::string_view kLeftCurly = "\xE2\x80\x9C";   // “
constexpr std::string_view kRightCurly = "\xE2\x80\x9D";  // ”

// Reads a quoted string at i ('"', '\'', or curly quotes). Backslash escapes
// apply inside ASCII quotes.
std::optional<std::string> ReadQuoted(std::string_view text, std::size_t& i) {
  if (i >= text.size()) return std::nullopt;
  std::string out;
  if (text.substr(i).starts_with(kLeftCurly) || text.substr(i).starts_with(kRightCurly)) {
    std::size_t j = i + kLeftCurly.size();
    for (; j < text.size(); ++j) {
      auto rest = text.substr(j);
      if (rest.starts_with(kRightCurly) || rest.starts_with(kLeftCurly)) {
        i = j + kRightCurly.size();
        return out;
      }
      if (text[j] == '"') {
        i = j + 1;
        return out;
      }
      out.push_back(text[j]);
    }
    return std::nullopt;
  }
  const char q = text[i];
  if (q != '"' && q != '\'') return std::nullopt;
  for (std::size_t j = i + 1; j < text.size(); ++j) {
    if (text[j] == '\\' && j + 1 < text.size()) {
      out.push_back(text[++j]);
    } else if (text[j] == q) {
      i = j + 1;
      return out;
    } else {
      out.push_back(text[j]);
    }
  }
  return std::nullopt;
}

// Argument text up to `close`, quoted or raw.
std::optional<std::string> ReadArgument(std::string_view text, std::size_t& i, char close) {
  SkipSpaces(text, i);
  std::size_t save = i;
  if (auto q = ReadQuoted(text, i)) {
    SkipSpaces(text, i);
    if (i < text.size() && text[i] == close) return q;
    i = save;
  }
  auto end = text.find(close, i);
  if (end == std::string_view::npos) return std::nullopt;
  std::string raw = Trim(text.substr(i, end - i));
  i = end;
  if (raw.empty()) return std::nullopt;
  return raw;
}

std::optional<int> ReadIndex(std::string_view text, std::size_t& i, char close) {
  SkipSpaces(text, i);
  std::size_t b = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == b || i - b > 9) return std::nullopt;
  int v = std::stoi(std::string(text.substr(b, i - b)));
  SkipSpaces(text, i);
  if (i >= text.size() || text[i] != close || v < 1) return std::nullopt;
  return v;
}

std::optional<Action> FilterFrom(std::string_view arg) {
  auto colon = arg.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  std::string group = Trim(arg.substr(0, colon));
  std::string value = Trim(arg.substr(colon + 1));
  if (group.empty() || value.empty()) return std::nullopt;
  return action::ClickFilter{group, value};
}

enum class Verb { kSearch, kProduct, kFilter, kPurchase, kStop };

struct VerbName {
  std::string_view name;
  Verb verb;
};

constexpr std::array<VerbName, 5> kCallVerbs = {{
    {"search", Verb::kSearch},
    {"click_product", Verb::kProduct},
    {"click_filter_option", Verb::kFilter},
    {"purchase", Verb::kPurchase},
    {"stop", Verb::kStop},
}};

constexpr std::array<VerbName, 12> kBraceVerbs = {{
    {"search", Verb::kSearch},
    {"click_product", Verb::kProduct},
    {"product_click", Verb::kProduct},
    {"click", Verb::kProduct},
    {"click_filter_option", Verb::kFilter},
    {"filter_click", Verb::kFilter},
    {"filter", Verb::kFilter},
    {"purchase", Verb::kPurchase},
    {"buy", Verb::kPurchase},
    {"stop", Verb::kStop},
    {"terminate", Verb::kStop},
    {"end", Verb::kStop},
}};

std::optional<Action> ReadArgs(Verb verb, std::string_view text, std::size_t& i, char close) {
  switch (verb) {
    case Verb::kSearch: {
      auto q = ReadArgument(text, i, close);
      if (!q || Trim(*q).empty()) return std::nullopt;
      return action::Search{*q};
    }
    case Verb::kProduct: {
      auto n = ReadIndex(text, i, close);
      if (!n) return std::nullopt;
      return action::ClickProduct{*n};
    }
    case Verb::kFilter: {
      auto a = ReadArgument(text, i, close);
      if (!a) return std::nullopt;
      return FilterFrom(*a);
    }
    case Verb::kPurchase:
    case Verb::kStop:
      SkipSpaces(text, i);
      if (i >= text.size() || text[i] != close) return std::nullopt;
      if (verb == Verb::kPurchase) return action::Purchase{};
      return action::Stop{};
  }
  return std::nullopt;
}

// name(args)
std::optional<ParsedAction> TryCall(std::string_view text, std::size_t pos) {
  for (const auto& v : kCallVerbs) {
    if (!MatchWordAt(text, pos, v.name)) continue;
    std::size_t i = pos + v.name.size();
    SkipSpaces(text, i);
    if (i >= text.size() || text[i] != '(') return std::nullopt;
    ++i;
    auto a = ReadArgs(v.verb, text, i, ')');
    if (!a) return std::nullopt;
    return ParsedAction{*a, pos, i + 1};
  }
  return std::nullopt;
}

// {name args}
std::optional<ParsedAction> TryBrace(std::string_view text, std::size_t pos) {
  if (text[pos] != '{') return std::nullopt;
  std::size_t i = pos + 1;
  SkipSpaces(text, i);
  for (const auto& v : kBraceVerbs) {
    if (!MatchWordAt(text, i, v.name)) continue;
    std::size_t j = i + v.name.size();
    // Tolerate {search("x")} and {click_product: 3}.
    SkipSpaces(text, j);
    if (j < text.size() && (text[j] == ':' || text[j] == '(')) {
      std::size_t k = j + 1;
      const char close = text[j] == '(' ? ')' : '}';
      if (auto a = ReadArgs(v.verb, text, k, close)) {
        if (close == ')') {
          ++k;
          SkipSpaces(text, k);
          if (k >= text.size() || text[k] != '}') return std::nullopt;
        }
        return ParsedAction{*a, pos, k + 1};
      }
    }
    auto a = ReadArgs(v.verb, text, j, '}');
    if (!a) return std::nullopt;
    return ParsedAction{*a, pos, j + 1};
  }
  return std::nullopt;
}

}  // namespace

std::optional<ParsedAction> FindAction(std::string_view text) {
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    if (text[pos] == '{') {
      if (auto p = TryBrace(text, pos)) return p;
    } else if (auto p = TryCall(text, pos)) {
      return p;
    }
  }
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    if (MatchWordAt(text, pos, "purchase")) return ParsedAction{action::Purchase{}, pos, pos + 8};
    if (MatchWordAt(text, pos, "stop")) return ParsedAction{action::Stop{}, pos, pos + 4};
  }
  return std::nullopt;
}

Action ParseAction(std::string_view text, const ActionSpace& space) {
  auto p = FindAction(text);
  if (!p) throw ActionParseError("no parseable action in model output");
  if (!space.Allows(p->action)) {
    throw OutOfSpaceError("action " + Serialize(p->action) + " is not available on this page");
  }
  return p->action;
}

// ---- limits, outcomes ----

void SessionLimits::Validate() const {
  if (max_actions < 1) throw ValidationError("limits.max_actions must be >= 1");
  if (!(max_wall_time > 0.0)) throw ValidationError("limits.max_wall_time must be > 0");
  if (loop_window < 1) throw ValidationError("limits.loop_window must be >= 1");
}

SessionLimits SessionLimits::FromJson(const Json& j) {
  SessionLimits l;
  l.max_actions = j.value("max_actions", l.max_actions);
  l.max_wall_time = j.value("max_wall_time", l.max_wall_time);
  l.loop_window = j.value("loop_window", l.loop_window);
  l.Validate();
  return l;
}

Json SessionLimits::ToJson() const {
  return {{"max_actions", max_actions}, {"max_wall_time", max_wall_time}, {"loop_window", loop_window}};
}

std::string_view ToString(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kStopped: return "stopped";
    case OutcomeKind::kActionCap: return "action_cap";
    case OutcomeKind::kTimeCap: return "time_cap";
    case OutcomeKind::kLooping: return "looping";
    case OutcomeKind::kExecFailure: return "exec_failure";
    case OutcomeKind::kParseFailure: return "parse_failure";
  }
  return "stopped";
}

OutcomeKind OutcomeKindFromString(std::string_view s) {
  for (auto k : kAllOutcomeKinds) {
    if (ToString(k) == s) return k;
  }
  throw SchemaError("unknown outcome kind: " + std::string(s));
}

int SessionTrace::TotalActions() const {
  int n = 0;
  for (const auto& [k, c] : totals) n += c;
  return n;
}

std::map<ActionKind, int> ComputeTotals(const std::vector<StepRecord>& steps) {
  std::map<ActionKind, int> t;
  for (auto k : kAllActionKinds) t[k] = 0;
  for (const auto& s : steps) {
    if (s.action) ++t[KindOf(*s.action)];
  }
  return t;
}

namespace {

bool PurchaseTookEffect(const StepRecord& s) {
  return s.action && std::holds_alternative<action::Purchase>(*s.action) && s.exec && s.exec->TookEffect();
}

}  // namespace

double ComputeSpend(const std::vector<StepRecord>& steps) {
  double spend = 0.0;
  for (const auto& s : steps) {
    if (PurchaseTookEffect(s) && s.observation.detail) spend += s.observation.detail->price;
  }
  return spend;
}

int CountPurchases(const std::vector<StepRecord>& steps) {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), PurchaseTookEffect));
}

std::optional<OutcomeKind> DecideTermination(const AgentState& state, const SessionLimits& limits, double elapsed) {
  std::vector<const Action*> acted;
  for (const auto& s : state.history) {
    if (s.action) acted.push_back(&*s.action);
  }
  if (!acted.empty() && std::holds_alternative<action::Stop>(*acted.back())) return OutcomeKind::kStopped;
  const auto window = static_cast<std::size_t>(limits.loop_window);
  if (limits.loop_window >= 2 && acted.size() >= window) {
    bool same = true;
    for (std::size_t i = acted.size() - window + 1; i < acted.size() && same; ++i) {
      same = *acted[i] == *acted[acted.size() - window];
    }
    if (same) return OutcomeKind::kLooping;
  }
  if (static_cast<int>(acted.size()) >= limits.max_actions) return OutcomeKind::kActionCap;
  if (elapsed >= limits.max_wall_time) return OutcomeKind::kTimeCap;
  return std::nullopt;
}

// ---- prompts ----

PromptTemplate PromptTemplate::Parse(std::string_view text) {
  static constexpr std::string_view kSys = "[system]\n";
  static constexpr std::string_view kUser = "\n[user]\n";
  if (!text.starts_with(kSys)) throw ValidationError("prompt template must start with a [system] line");
  auto u = text.find(kUser);
  if (u == std::string_view::npos) throw ValidationError("prompt template lacks a [user] line");
  PromptTemplate t;
  t.system = std::string(text.substr(kSys.size(), u - kSys.size()));
  t.user = std::string(text.substr(u + kUser.size()));
  while (t.user.ends_with('\n')) t.user.pop_back();
  static constexpr std::array<std::string_view, 7> kKnown = {
      "persona", "goal", "intention_json", "history", "observation_json", "action_space", "grammar"};
  for (const std::string* part : {&t.system, &t.user}) {
    for (auto b = part->find("{{"); b != std::string::npos; b = part->find("{{", b + 2)) {
      auto e = part->find("}}", b);
      if (e == std::string::npos) throw ValidationError("unterminated placeholder in prompt template");
      std::string name = part->substr(b + 2, e - b - 2);
      if (std::find(kKnown.begin(), kKnown.end(), name) == kKnown.end()) {
        throw ValidationError("unknown prompt placeholder {{" + name + "}}");
      }
    }
  }
  if (t.user.find("{{observation_json}}") == std::string::npos) {
    throw ValidationError("prompt template must include {{observation_json}}");
  }
  return t;
}

PromptTemplate PromptTemplate::Default() {
  static const PromptTemplate t = Parse(kDefaultPromptText);
  return t;
}

PromptTemplate PromptTemplate::Load(const std::filesystem::path& path) { return Parse(ReadFile(path)); }

std::string DescribeActionSpace(const ActionSpace& space) {
  std::string out = "Available actions:";
  if (space.search) out += "\n- search(\"<query>\")";
  if (!space.product_indices.empty()) {
    out += "\n- click_product(N) with N one of:";
    for (std::size_t i = 0; i < space.product_indices.size(); ++i) {
      out += (i == 0 ? " " : ", ") + std::to_string(space.product_indices[i]);
    }
  }
  for (const auto& [g, v] : space.filter_options) out += "\n- " + Serialize(action::ClickFilter{g, v});
  if (space.purchase) out += "\n- purchase";
  if (space.stop) out += "\n- stop";
  return out;
}

std::string SummarizeStep(const StepRecord& step) {
  std::string line = "step " + std::to_string(step.step_index + 1) + ": ";
  if (!step.action) return line + "(no valid action) -> " + step.parse_error;
  line += Serialize(*step.action) + " -> ";
  const ExecResult& r = *step.exec;
  switch (r.status) {
    case ExecStatus::kOk: return line + "ok";
    case ExecStatus::kRecovered: return line + "ok after " + std::string(ToString(*r.strategy));
    case ExecStatus::kFailed: return line + "failed: " + r.reason;
  }
  return line;
}

namespace {

void Substitute(std::string& text, std::string_view name, std::string_view value) {
  const std::string ph = "{{" + std::string(name) + "}}";
  for (auto pos = text.find(ph); pos != std::string::npos; pos = text.find(ph, pos + value.size())) {
    text.replace(pos, ph.size(), value);
  }
}

}  // namespace

std::vector<Message> BuildPrompt(const AgentState& state, const Observation& obs, const ActionSpace& space,
                                 const SessionLimits& limits, const PromptTemplate& tmpl) {
  std::string history;
  if (!state.history.empty()) {
    const std::size_t keep = static_cast<std::size_t>(limits.loop_window) * 3;
    const std::size_t from = state.history.size() > keep ? state.history.size() - keep : 0;
    history = "Recent steps:\n";
    for (std::size_t i = from; i < state.history.size(); ++i) history += SummarizeStep(state.history[i]) + "\n";
    history += "\n";
  }
  std::string system = tmpl.system;
  std::string user = tmpl.user;
  for (std::string* part : {&system, &user}) {
    Substitute(*part, "persona", RenderPersonaDocument(state.persona));
    Substitute(*part, "goal", state.intention.goal_text);
    Substitute(*part, "intention_json", state.intention.ToJson().dump());
    Substitute(*part, "history", history);
    Substitute(*part, "observation_json", ToJson(obs).dump());
    Substitute(*part, "action_space", DescribeActionSpace(space));
    Substitute(*part, "grammar", kActionGrammar);
  }
  return {{Role::kSystem, system}, {Role::kUser, user}};
}

std::string PromptDigest(const std::vector<Message>& messages) {
  std::string buf;
  for (const auto& m : messages) {
    buf.append(ToString(m.role));
    buf.push_back('\x1e');
    buf.append(m.content);
    buf.push_back('\x1f');
  }
  return Sha256Hex(buf);
}

// ---- the loop ----

SessionTrace RunSession(const SessionInput& input, EnvSession& env, ModelClient& model, const SessionLimits& limits,
                        const Clock& clock, const PromptTemplate& tmpl) {
  limits.Validate();
  AgentState state{input.persona, input.intention, input.arm, 0, {}, std::nullopt};
  SessionTrace trace;
  trace.session_id = input.session_id;
  trace.persona_id = input.persona.id;
  trace.arm = input.arm;
  trace.seed = input.seed;
  const double t0 = clock.Seconds();

  auto finish = [&](OutcomeKind kind, std::string reason) {
    trace.steps = std::move(state.history);
    trace.totals = ComputeTotals(trace.steps);
    trace.spend = ComputeSpend(trace.steps);
    trace.outcome.kind = kind;
    trace.outcome.purchases = CountPurchases(trace.steps);
    trace.outcome.converted = trace.outcome.purchases >= 1;
    trace.outcome.spend = trace.spend;
    trace.outcome.reason = std::move(reason);
    trace.duration = clock.Seconds() - t0;
    return trace;
  };

  while (true) {
    const double step_start = clock.Seconds();
    Observation obs;
    try {
      obs = env.Observe();
    } catch (const Error& e) {
      return finish(OutcomeKind::kExecFailure, std::string("observe: ") + e.what());
    }
    const ActionSpace space = ComputeActionSpace(obs);
    std::vector<Message> messages = BuildPrompt(state, obs, space, limits, tmpl);

    StepRecord step;
    step.step_index = state.step_index;
    step.observation = obs;
    step.prompt_digest = PromptDigest(messages);
    const ChatContext ctx{input.session_id, input.arm, state.step_index, input.seed};

    std::optional<ParsedAction> parsed;
    std::string model_failure;
    for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
      try {
        step.raw_model_text = model.Chat(messages, ctx);
      } catch (const Error& e) {
        model_failure = std::string("model: ") + e.what();
        break;
      }
      std::string problem;
      if (auto p = FindAction(step.raw_model_text)) {
        if (space.Allows(p->action)) {
          parsed = std::move(p);
          break;
        }
        problem = Serialize(p->action) + " is not available on this page";
      } else {
        problem = "no parseable action found";
      }
      if (attempt == 0) {
        step.repair_error = problem;
        messages.push_back({Role::kAssistant, step.raw_model_text});
        messages.push_back({Role::kUser, "Your reply could not be used: " + problem +
                                             ". Reply with exactly one action:\n" + std::string(kActionGrammar)});
      } else {
        step.parse_error = problem;
      }
    }

    if (!parsed) {
      if (!model_failure.empty()) step.parse_error = model_failure;
      step.wall_time = clock.Seconds() - step_start;
      state.history.push_back(std::move(step));
      return finish(OutcomeKind::kParseFailure, state.history.back().parse_error);
    }

    step.action = parsed->action;
    std::string before = Trim(std::string_view(step.raw_model_text).substr(0, parsed->start));
    if (!before.empty()) step.rationale = before;
    try {
      step.exec = env.Execute(*step.action);
    } catch (const OutOfSpaceError&) {
      throw;
    } catch (const Error& e) {
      step.exec = ExecResult::Failed(e.what());
    }
    step.wall_time = clock.Seconds() - step_start;
    const bool failed = !step.exec->TookEffect();
    const std::string reason = failed ? step.exec->reason : std::string();
    state.history.push_back(std::move(step));
    ++state.step_index;
    if (failed) return finish(OutcomeKind::kExecFailure, reason);
    if (auto done = DecideTermination(state, limits, clock.Seconds() - t0)) return finish(*done, {});
  }
}

}  // namespace agentab
