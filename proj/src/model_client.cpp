#include "agentab/model_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace agentab {

std::string_view ToString(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

ModelConfig ModelConfig::FromJson(const Json& j) {
  ModelConfig c;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model_name = j.at("model_name").get<std::string>();
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.timeout = j.value("timeout", c.timeout);
  c.retries = j.value("retries", c.retries);
  c.backoff_base = j.value("backoff_base", c.backoff_base);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.Validate();
  return c;
}

Json ModelConfig::ToJson() const {
  return {{"endpoint", endpoint},     {"model_name", model_name}, {"temperature", temperature},
          {"max_tokens", max_tokens}, {"timeout", timeout},       {"retries", retries},
          {"backoff_base", backoff_base}, {"api_key_env", api_key_env}};
}

void ModelConfig::Validate() const {
  if (endpoint.empty()) throw ValidationError("model.endpoint must be set");
  if (!(timeout > 0.0)) throw ValidationError("model.timeout must be > 0");
  if (temperature < 0.0 || temperature > 2.0) throw ValidationError("model.temperature must be in [0,2]");
  if (max_tokens < 1) throw ValidationError("model.max_tokens must be >= 1");
  if (retries < 0) throw ValidationError("model.retries must be >= 0");
  if (backoff_base < 0.0) throw ValidationError("model.backoff_base must be >= 0");
}

Json BuildChatRequest(const std::vector<Message>& messages, const ModelConfig& config) {
  Json msgs = Json::array();
  for (const auto& m : messages) msgs.push_back({{"role", ToString(m.role)}, {"content", m.content}});
  return {{"model", config.model_name},
          {"messages", std::move(msgs)},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens}};
}

std::string ParseChatResponse(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::parse_error&) {
    throw TransportError("model backend: malformed JSON payload");
  }
  try {
    const Json& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw TransportError("model backend: content is not a string");
    return content.get<std::string>();
  } catch (const Json::exception&) {
    throw TransportError("model backend: payload lacks choices[0].message.content");
  }
}

HttpChatClient::HttpChatClient(ModelConfig config) : config_(std::move(config)) {
  config_.Validate();
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("model.endpoint must be an http(s) URL");
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpChatClient::Chat(const std::vector<Message>& messages, const ChatContext&) {
  return Complete(messages).text;
}

ChatReply HttpChatClient::Complete(const std::vector<Message>& messages) const {
  if (messages.empty()) throw ValidationError("chat: message list must be non-empty");
  for (const auto& m : messages) {
    if (m.role != Role::kAssistant && m.content.empty()) {
      throw ValidationError("chat: system/user message content must be non-empty");
    }
  }
  const std::string body = BuildChatRequest(messages, config_).dump();
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto timeout = std::chrono::duration<double>(config_.timeout);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      const double wait = config_.backoff_base * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    // One client per attempt: no connection state shared between calls.
    httplib::Client cli(scheme_host_port_);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error contacting " + config_.endpoint + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "backend status " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("model backend returned status " + std::to_string(res->status));
    }
    return {ParseChatResponse(res->body), attempt};
  }
  throw TransportError("chat failed after " + std::to_string(config_.retries) + " retries: " + last_error);
}

bool RulePredicate::Unconditional() const {
  return !page_type && !arm && !has_products && !has_filters && !filter_selected && !min_cart && !max_cart &&
         !min_step;
}

bool RulePredicate::Matches(const Observation& obs, const ChatContext& ctx) const {
  if (page_type && obs.page_type != *page_type) return false;
  if (arm && ctx.arm != *arm) return false;
  if (has_products && obs.products.empty() == *has_products) return false;
  if (has_filters && obs.filter_groups.empty() == *has_filters) return false;
  if (filter_selected) {
    bool any = false;
    for (const auto& g : obs.filter_groups) {
      for (const auto& o : g.options) any = any || o.selected;
    }
    if (any != *filter_selected) return false;
  }
  if (min_cart && obs.cart_count < *min_cart) return false;
  if (max_cart && obs.cart_count > *max_cart) return false;
  if (min_step && ctx.step_index < *min_step) return false;
  return true;
}

void ScriptedPolicy::Validate() const {
  if (rules.empty()) throw ValidationError("scripted policy: no rules");
  bool fallback = false;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    if (r.choices.empty()) throw ValidationError("scripted policy: rule " + std::to_string(i) + " has no action");
    double total = 0.0;
    for (const auto& c : r.choices) {
      if (c.weight < 0.0) throw ValidationError("scripted policy: negative weight in rule " + std::to_string(i));
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("scripted policy: weights of rule " + std::to_string(i) + " sum to " +
                            std::to_string(total) + ", expected 1");
    }
    fallback = fallback || r.when.Unconditional();
  }
  if (!fallback) throw ValidationError("scripted policy: needs an unconditional fallback rule");
}

ScriptedPolicy ScriptedPolicy::FromJson(const Json& j) {
  ScriptedPolicy p;
  p.seed = j.value("seed", std::uint64_t{0});
  for (const auto& r : j.at("rules")) {
    ScriptedRule rule;
    const Json when = r.value("when", Json::object());
    if (when.contains("page_type")) rule.when.page_type = PageTypeFromString(when["page_type"].get<std::string>());
    if (when.contains("arm")) rule.when.arm = when["arm"].get<std::string>();
    if (when.contains("has_products")) rule.when.has_products = when["has_products"].get<bool>();
    if (when.contains("has_filters")) rule.when.has_filters = when["has_filters"].get<bool>();
    if (when.contains("filter_selected")) rule.when.filter_selected = when["filter_selected"].get<bool>();
    if (when.contains("min_cart")) rule.when.min_cart = when["min_cart"].get<int>();
    if (when.contains("max_cart")) rule.when.max_cart = when["max_cart"].get<int>();
    if (when.contains("min_step")) rule.when.min_step = when["min_step"].get<int>();
    if (r.contains("then")) {
      rule.choices.push_back({r["then"].get<std::string>(), 1.0});
    } else {
      for (const auto& c : r.at("choices")) {
        rule.choices.push_back({c.at("action").get<std::string>(), c.at("weight").get<double>()});
      }
    }
    p.rules.push_back(std::move(rule));
  }
  p.Validate();
  return p;
}

Json ScriptedPolicy::ToJson() const {
  Json rs = Json::array();
  for (const auto& r : rules) {
    Json when = Json::object();
    if (r.when.page_type) when["page_type"] = ToString(*r.when.page_type);
    if (r.when.arm) when["arm"] = *r.when.arm;
    if (r.when.has_products) when["has_products"] = *r.when.has_products;
    if (r.when.has_filters) when["has_filters"] = *r.when.has_filters;
    if (r.when.filter_selected) when["filter_selected"] = *r.when.filter_selected;
    if (r.when.min_cart) when["min_cart"] = *r.when.min_cart;
    if (r.when.max_cart) when["max_cart"] = *r.when.max_cart;
    if (r.when.min_step) when["min_step"] = *r.when.min_step;
    Json rule = {{"when", when}};
    if (r.choices.size() == 1) {
      rule["then"] = r.choices[0].action_template;
    } else {
      Json cs = Json::array();
      for (const auto& c : r.choices) cs.push_back({{"action", c.action_template}, {"weight", c.weight}});
      rule["choices"] = cs;
    }
    rs.push_back(std::move(rule));
  }
  return {{"seed", seed}, {"rules", rs}};
}

std::optional<std::string> FindTaggedBlock(const std::vector<Message>& messages, std::string_view open,
                                           std::string_view close) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    const std::string& c = it->content;
    auto b = c.rfind(open);
    if (b == std::string::npos) continue;
    auto e = c.find(close, b);
    if (e == std::string::npos) continue;
    return c.substr(b + open.size(), e - b - open.size());
  }
  return std::nullopt;
}

ScriptedModel::ScriptedModel(ScriptedPolicy policy) : policy_(std::move(policy)) { policy_.Validate(); }

std::string ScriptedModel::Chat(const std::vector<Message>& messages, const ChatContext& ctx) {
  if (messages.empty()) throw ValidationError("chat: message list must be non-empty");
  if (FindTaggedBlock(messages, kObservationOpen, kObservationClose)) return ChatAction(messages, ctx);
  if (FindTaggedBlock(messages, kDemographicsOpen, kDemographicsClose)) return ChatPersona(messages, ctx);
  return "stop";
}

namespace {

std::string DrawKey(const ScriptedPolicy& p, const ChatContext& ctx, std::string_view what) {
  return std::to_string(p.seed) + "|" + ctx.session_id + "|" + std::to_string(ctx.step_index) + "|" +
         std::string(what);
}

std::string EscapeQuoted(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

bool SharesToken(std::string_view a, std::string_view b) {
  auto lower_words = [](std::string_view s) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : s) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else if (!cur.empty()) {
        words.push_back(std::exchange(cur, {}));
      }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
  };
  auto wa = lower_words(a);
  auto wb = lower_words(b);
  for (const auto& w : wa) {
    if (w.size() > 2 && std::find(wb.begin(), wb.end(), w) != wb.end()) return true;
  }
  return false;
}

}  // namespace

std::string ScriptedModel::ChatAction(const std::vector<Message>& messages, const ChatContext& ctx) const {
  Observation obs;
  try {
    obs = ObservationFromJson(Json::parse(*FindTaggedBlock(messages, kObservationOpen, kObservationClose)));
  } catch (const std::exception&) {
    return "stop";
  }
  std::string goal, query;
  if (auto intent = FindTaggedBlock(messages, kIntentionOpen, kIntentionClose)) {
    try {
      Json j = Json::parse(*intent);
      goal = j.value("goal", std::string());
      if (j.contains("category_hint") && j["category_hint"].is_string()) query = j["category_hint"].get<std::string>();
    } catch (const std::exception&) {
    }
  }
  if (query.empty()) query = goal;
  if (query.empty()) query = "products";

  const ScriptedRule* fired = nullptr;
  std::size_t fired_index = 0;
  for (std::size_t i = 0; i < policy_.rules.size(); ++i) {
    if (policy_.rules[i].when.Matches(obs, ctx)) {
      fired = &policy_.rules[i];
      fired_index = i;
      break;
    }
  }
  if (fired == nullptr) return "stop";

  const RuleChoice* choice = &fired->choices.back();
  if (fired->choices.size() > 1) {
    const double u = KeyedUniform(DrawKey(policy_, ctx, "rule" + std::to_string(fired_index)));
    double acc = 0.0;
    for (const auto& c : fired->choices) {
      acc += c.weight;
      if (u < acc) {
        choice = &c;
        break;
      }
    }
  }

  auto product_index = [&](auto better) {
    if (obs.products.empty()) return std::string("1");
    const ProductSummary* best = &obs.products.front();
    for (const auto& p : obs.products) {
      if (better(p, *best)) best = &p;
    }
    return std::to_string(best->index);
  };
  auto first_option = [&](bool relevant) -> std::string {
    for (const auto& g : obs.filter_groups) {
      for (const auto& o : g.options) {
        if (o.selected) continue;
        if (!relevant || SharesToken(o.value, query)) return EscapeQuoted(g.name + ": " + o.value);
      }
    }
    return {};
  };

  std::string text = choice->action_template;
  auto replace = [&](std::string_view key, const auto& make) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos)) {
      std::string value = make();
      text.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace("{query}", [&] { return EscapeQuoted(query); });
  replace("{goal}", [&] { return EscapeQuoted(goal); });
  replace("{random_product}", [&] {
    if (obs.products.empty()) return std::string("1");
    double u = KeyedUniform(DrawKey(policy_, ctx, "product"));
    return std::to_string(1 + static_cast<int>(u * static_cast<double>(obs.products.size())));
  });
  replace("{top_rated_product}", [&] {
    return product_index([](const ProductSummary& a, const ProductSummary& b) { return a.rating > b.rating; });
  });
  replace("{cheapest_product}", [&] {
    return product_index([](const ProductSummary& a, const ProductSummary& b) { return a.price < b.price; });
  });
  replace("{relevant_filter}", [&] {
    std::string s = first_option(true);
    return s.empty() ? first_option(false) : s;
  });
  replace("{first_filter}", [&] { return first_option(false); });
  return text;
}

std::string ScriptedModel::ChatPersona(const std::vector<Message>& messages, const ChatContext& ctx) const {
  static constexpr std::array<std::string_view, 12> kNames = {"Marcus", "Priya", "Elena", "Tomas", "Aisha", "Kenji",
                                                              "Sofia",  "Omar",  "Grace", "Diego", "Mei",   "Noah"};
  static constexpr std::array<std::string_view, 4> kGenders = {"Male", "Female", "Female", "Male"};
  static constexpr std::array<std::string_view, 4> kEducation = {"High school diploma", "Bachelor's degree",
                                                                 "Master's degree", "Associate degree"};
  static constexpr std::array<std::string_view, 6> kProfessions = {"Graphic Designer", "Nurse",   "Software Engineer",
                                                                   "Teacher",          "Retail Manager", "Accountant"};
  Json d = Json::parse(*FindTaggedBlock(messages, kDemographicsOpen, kDemographicsClose));
  auto pick = [&](const auto& list, std::string_view what) {
    double u = KeyedUniform(DrawKey(policy_, ctx, what));
    return std::string(list[static_cast<std::size_t>(u * static_cast<double>(list.size()))]);
  };
  auto field = [&](std::string_view key, const auto& list) -> std::string {
    if (d.contains(key)) {
      const Json& v = d[std::string(key)];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      if (v.is_number()) return FormatFixed(v.get<double>(), 0);
    }
    return pick(list, key);
  };
  const std::string name = pick(kNames, "name");
  const std::string age = field("age", std::array<std::string_view, 1>{"35"});
  const std::string profession = field("profession", kProfessions);
  std::string income = field("income", std::array<std::string_view, 1>{"55000"});

  std::string doc = "Persona: " + name + "\n\n";
  doc += "Background:\n" + name + " is a " + age + "-year-old " + ToLower(profession) +
         " who shops online most weeks.\n\n";
  doc += "Demographics:\n\n";
  doc += "Age: " + age + "\n\n";
  doc += "Gender: " + field("gender", kGenders) + "\n\n";
  doc += "Education: " + field("education", kEducation) + "\n\n";
  doc += "Profession: " + profession + "\n\n";
  doc += "Income: $" + income + "\n\n";
  for (const auto& [k, v] : d.items()) {
    if (k == "age" || k == "gender" || k == "education" || k == "profession" || k == "income") continue;
    std::string val = v.is_string() ? v.get<std::string>() : (v.is_number_integer() ? std::to_string(v.get<long long>()) : FormatFixed(v.get<double>(), 2));
    doc += k + ": " + val + "\n\n";
  }
  doc += "Financial Situation:\n" + name + " budgets carefully and compares prices before buying.\n\n";
  doc += "Shopping Habits:\n" + name + " reads reviews and prefers well-rated products.\n\n";
  doc += "Professional Life:\n" + name + " works as a " + ToLower(profession) + " with a busy schedule.\n\n";
  doc += "Personal Style:\n" + name + " likes practical, understated things.\n";
  return doc;
}

}  // namespace agentab
