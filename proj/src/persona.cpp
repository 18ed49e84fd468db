#include "agentab/persona.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <thread>

namespace agentab {

namespace {

std::string_view KindName(AttributeSpec::Kind k) {
  return k == AttributeSpec::Kind::kCategorical ? "categorical" : "numeric";
}

// "tech_literacy" -> "Tech Literacy"
std::string LabelFor(std::string_view key) {
  std::string out;
  bool start = true;
  for (char c : key) {
    if (c == '_') {
      out.push_back(' ');
      start = true;
    } else {
      out.push_back(start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
      start = false;
    }
  }
  return out;
}

// "Tech Literacy" -> "tech_literacy"
std::string KeyFor(std::string_view label) {
  std::string out;
  for (char c : Trim(label)) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string GroupThousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return v < 0 ? "-" + out : out;
}

bool IsWhole(double v) { return std::abs(v - std::round(v)) < 1e-9; }

std::string RenderNumber(double v) { return IsWhole(v) ? std::to_string(std::llround(v)) : FormatFixed(v, 2); }

std::string RenderDemographic(std::string_view key, const AttributeValue& v) {
  if (const double* d = std::get_if<double>(&v)) {
    if (key == "income") {
      return "$" + (IsWhole(*d) ? GroupThousands(std::llround(*d)) : FormatFixed(*d, 2));
    }
    return RenderNumber(*d);
  }
  return std::get<std::string>(v);
}

bool IsNumericKey(std::string_view key, const AgentSpec* spec) {
  if (spec != nullptr) {
    if (const AttributeSpec* a = spec->Find(key)) return a->kind == AttributeSpec::Kind::kNumeric;
  }
  return key == "age" || key == "income";
}

struct SectionAlias {
  std::string_view heading;
  std::string_view key;
};

constexpr std::array<SectionAlias, 20> kSectionAliases = {{
    {"background", "background"},
    {"about", "background"},
    {"overview", "background"},
    {"bio", "background"},
    {"demographics", "demographics"},
    {"demographic information", "demographics"},
    {"demographic profile", "demographics"},
    {"financial situation", "financial_situation"},
    {"finances", "financial_situation"},
    {"financial status", "financial_situation"},
    {"shopping habits", "shopping_habits"},
    {"shopping behavior", "shopping_habits"},
    {"shopping behaviour", "shopping_habits"},
    {"shopping preferences", "shopping_habits"},
    {"professional life", "professional_life"},
    {"work life", "professional_life"},
    {"career", "professional_life"},
    {"personal style", "personal_style"},
    {"style", "personal_style"},
    {"fashion sense", "personal_style"},
}};

std::optional<std::string_view> SectionFor(std::string_view heading) {
  std::string h = ToLower(Trim(heading));
  for (const auto& a : kSectionAliases) {
    if (h == a.heading) return a.key;
  }
  return std::nullopt;
}

// Strips markdown decoration: leading '#'s, bullets, and bold/italic markers.
std::string NormalizeLine(std::string_view raw) {
  std::string s = Trim(raw);
  std::size_t i = 0;
  while (i < s.size() && s[i] == '#') ++i;
  s = Trim(std::string_view(s).substr(i));
  if (s.size() >= 2 && (s[0] == '-' || s[0] == '*') && s[1] == ' ') s = Trim(std::string_view(s).substr(2));
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if ((s[k] == '*' || s[k] == '_') && k + 1 < s.size() && s[k + 1] == s[k]) {
      ++k;
      continue;
    }
    out.push_back(s[k]);
  }
  return Trim(out);
}

// "Label: rest" where the label is short and made of words.
std::optional<std::pair<std::string, std::string>> SplitLabel(std::string_view line) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 40) return std::nullopt;
  std::string_view label = line.substr(0, colon);
  for (char c : label) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != ' ' && c != '\'' && c != '-' && c != '&' &&
        c != '/' && c != '_') {
      return std::nullopt;
    }
  }
  return std::make_pair(Trim(label), Trim(line.substr(colon + 1)));
}

void AppendText(std::string& dst, std::string_view text) {
  if (text.empty()) return;
  if (!dst.empty()) dst.push_back('\n');
  dst.append(text);
}

bool SameValue(const AttributeValue& a, const AttributeValue& b) {
  if (a.index() != b.index()) return false;
  if (const double* x = std::get_if<double>(&a)) return std::abs(*x - std::get<double>(b)) <= 0.005;
  return ToLower(std::get<std::string>(a)) == ToLower(std::get<std::string>(b));
}

std::string PersonaId(int index, int count) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(count).size());
  std::string n = std::to_string(index + 1);
  return "p" + std::string(width > n.size() ? width - n.size() : 0, '0') + n;
}

}  // namespace

AttributeSpec AttributeSpec::FromJson(const Json& j) {
  AttributeSpec a;
  a.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "categorical") {
    a.kind = Kind::kCategorical;
    a.values = j.at("values").get<std::vector<std::string>>();
    if (j.contains("weights")) {
      a.weights = j["weights"].get<std::vector<double>>();
    } else if (!a.values.empty()) {
      a.weights.assign(a.values.size(), 1.0 / static_cast<double>(a.values.size()));
    }
  } else if (kind == "numeric") {
    a.kind = Kind::kNumeric;
    a.min = j.at("min").get<double>();
    a.max = j.at("max").get<double>();
    a.integer = j.value("integer", false);
    const std::string dist = j.value("distribution", std::string("uniform"));
    if (dist == "uniform") {
      a.distribution = Distribution::kUniform;
    } else if (dist == "normal") {
      a.distribution = Distribution::kNormal;
      a.mean = j.at("mean").get<double>();
      a.sd = j.at("sd").get<double>();
    } else {
      throw ValidationError("attribute " + a.name + ": unknown distribution '" + dist + "'");
    }
  } else {
    throw ValidationError("attribute " + a.name + ": unknown kind '" + kind + "'");
  }
  return a;
}

Json AttributeSpec::ToJson() const {
  Json j = {{"name", name}, {"kind", KindName(kind)}};
  if (kind == Kind::kCategorical) {
    j["values"] = values;
    j["weights"] = weights;
  } else {
    j["min"] = min;
    j["max"] = max;
    j["integer"] = integer;
    if (distribution == Distribution::kUniform) {
      j["distribution"] = "uniform";
    } else {
      j["distribution"] = "normal";
      j["mean"] = mean;
      j["sd"] = sd;
    }
  }
  return j;
}

IntentionTemplate IntentionTemplate::FromJson(const Json& j) {
  IntentionTemplate t;
  t.text = j.at("template").get<std::string>();
  if (j.contains("slots")) {
    for (const auto& [k, v] : j["slots"].items()) t.slots[k] = v.get<std::vector<std::string>>();
  }
  if (j.contains("category_slot")) t.category_slot = j["category_slot"].get<std::string>();
  if (j.contains("budget_slot")) t.budget_slot = j["budget_slot"].get<std::string>();
  return t;
}

Json IntentionTemplate::ToJson() const {
  Json s = Json::object();
  for (const auto& [k, v] : slots) s[k] = v;
  Json j = {{"template", text}, {"slots", s}};
  if (category_slot) j["category_slot"] = *category_slot;
  if (budget_slot) j["budget_slot"] = *budget_slot;
  return j;
}

void AgentSpec::Validate() const {
  if (count < 1) throw ValidationError("count must be ≥ 1");
  if (intention_spec.empty()) throw ValidationError("intention_spec must hold at least one template");
  std::set<std::string> names;
  for (const auto& a : attributes) {
    if (a.name.empty()) throw ValidationError("attribute with empty name");
    if (!names.insert(a.name).second) throw ValidationError("duplicate attribute name: " + a.name);
    if (a.kind == AttributeSpec::Kind::kCategorical) {
      if (a.values.empty()) throw ValidationError("attribute " + a.name + ": no values");
      if (a.weights.size() != a.values.size()) {
        throw ValidationError("attribute " + a.name + ": weights and values differ in length");
      }
      if (std::set<std::string>(a.values.begin(), a.values.end()).size() != a.values.size()) {
        throw ValidationError("attribute " + a.name + ": duplicate values");
      }
      double total = 0.0;
      for (double w : a.weights) {
        if (w < 0.0) throw ValidationError("attribute " + a.name + ": negative weight");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9) throw ValidationError("attribute " + a.name + ": weights must sum to 1");
    } else {
      if (!(a.min < a.max)) throw ValidationError("attribute " + a.name + ": min must be < max");
      if (a.distribution == AttributeSpec::Distribution::kNormal && !(a.sd > 0.0)) {
        throw ValidationError("attribute " + a.name + ": sd must be > 0");
      }
    }
  }
  for (const auto& t : intention_spec) {
    if (Trim(t.text).empty()) throw ValidationError("intention template is empty");
    for (const auto& [slot, values] : t.slots) {
      if (values.empty()) throw ValidationError("intention slot '" + slot + "' has no values");
    }
    for (std::size_t pos = t.text.find('{'); pos != std::string::npos; pos = t.text.find('{', pos + 1)) {
      auto end = t.text.find('}', pos);
      if (end == std::string::npos) throw ValidationError("unterminated placeholder in '" + t.text + "'");
      std::string slot = t.text.substr(pos + 1, end - pos - 1);
      if (!t.slots.contains(slot)) throw ValidationError("placeholder {" + slot + "} has no slot values");
    }
    for (const auto* s : {&t.category_slot, &t.budget_slot}) {
      if (*s && !t.slots.contains(**s)) throw ValidationError("unknown slot '" + **s + "'");
    }
  }
}

const AttributeSpec* AgentSpec::Find(std::string_view name) const {
  for (const auto& a : attributes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::string AgentSpec::Fingerprint() const { return Sha256Hex(ToJson().dump()); }

AgentSpec AgentSpec::FromJson(const Json& j) {
  AgentSpec s;
  s.count = j.at("count").get<int>();
  for (const auto& a : j.value("attributes", Json::array())) s.attributes.push_back(AttributeSpec::FromJson(a));
  s.population_description = j.value("population_description", std::string());
  for (const auto& t : j.at("intention_spec")) s.intention_spec.push_back(IntentionTemplate::FromJson(t));
  s.Validate();
  return s;
}

AgentSpec AgentSpec::Load(const std::filesystem::path& path) { return FromJson(ReadJsonFile(path)); }

Json AgentSpec::ToJson() const {
  Json attrs = Json::array();
  for (const auto& a : attributes) attrs.push_back(a.ToJson());
  Json ints = Json::array();
  for (const auto& t : intention_spec) ints.push_back(t.ToJson());
  return {{"count", count},
          {"attributes", attrs},
          {"population_description", population_description},
          {"intention_spec", ints}};
}

std::string ToString(const AttributeValue& v) {
  if (const double* d = std::get_if<double>(&v)) return RenderNumber(*d);
  return std::get<std::string>(v);
}

Json ToJson(const AttributeValue& v) {
  if (const double* d = std::get_if<double>(&v)) {
    if (IsWhole(*d) && std::abs(*d) < 9e15) return Json(std::llround(*d));
    return Json(*d);
  }
  return Json(std::get<std::string>(v));
}

Persona Persona::FromJson(const Json& j) {
  Persona p;
  p.id = j.at("id").get<std::string>();
  p.name = j.at("name").get<std::string>();
  for (const auto& [k, v] : j.at("demographics").items()) {
    if (v.is_number()) {
      p.demographics[k] = v.get<double>();
    } else {
      p.demographics[k] = v.get<std::string>();
    }
  }
  for (const auto& [k, v] : j.at("narrative").items()) p.narrative[k] = v.get<std::string>();
  return p;
}

Json Persona::ToJson() const {
  Json d = Json::object();
  for (const auto& [k, v] : demographics) d[k] = agentab::ToJson(v);
  Json n = Json::object();
  for (const auto& [k, v] : narrative) n[k] = v;
  return {{"id", id}, {"name", name}, {"demographics", d}, {"narrative", n}};
}

Intention Intention::FromJson(const Json& j) {
  Intention i;
  i.goal_text = j.at("goal_text").get<std::string>();
  if (j.contains("budget_limit") && !j["budget_limit"].is_null()) i.budget_limit = j["budget_limit"].get<double>();
  if (j.contains("category_hint") && !j["category_hint"].is_null()) {
    i.category_hint = j["category_hint"].get<std::string>();
  }
  if (Trim(i.goal_text).empty()) throw SchemaError("intention goal_text is empty");
  return i;
}

Json Intention::ToJson() const {
  return {{"goal_text", goal_text},
          {"budget_limit", budget_limit ? Json(*budget_limit) : Json(nullptr)},
          {"category_hint", category_hint ? Json(*category_hint) : Json(nullptr)}};
}

const Persona* PersonaPool::Find(std::string_view id) const {
  for (const auto& p : personas) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

void PersonaPool::CheckInvariants() const {
  std::set<std::string> ids;
  for (const auto& p : personas) {
    if (!ids.insert(p.id).second) throw SchemaError("duplicate persona id " + p.id);
    if (!intentions.contains(p.id)) throw SchemaError("persona " + p.id + " has no intention");
  }
  if (intentions.size() != personas.size()) throw SchemaError("intentions reference unknown personas");
}

PersonaPool PersonaPool::FromJson(const Json& j) {
  PersonaPool pool;
  try {
    pool.spec_fingerprint = j.at("spec_fingerprint").get<std::string>();
    for (const auto& p : j.at("personas")) pool.personas.push_back(Persona::FromJson(p));
    for (const auto& [id, i] : j.at("intentions").items()) pool.intentions[id] = Intention::FromJson(i);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("persona pool: ") + e.what());
  }
  pool.CheckInvariants();
  return pool;
}

PersonaPool PersonaPool::Load(const std::filesystem::path& path) { return FromJson(ReadJsonFile(path)); }

Json PersonaPool::ToJson() const {
  Json ps = Json::array();
  for (const auto& p : personas) ps.push_back(p.ToJson());
  Json is = Json::object();
  for (const auto& p : personas) is[p.id] = intentions.at(p.id).ToJson();
  return {{"spec_fingerprint", spec_fingerprint}, {"personas", ps}, {"intentions", is}};
}

std::string ValidationReport::Describe() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.attribute + ": " + v.message;
  }
  return out;
}

ValidationReport ValidatePersona(const Persona& p, const AgentSpec& spec) {
  ValidationReport r;
  auto flag = [&](std::string attr, std::string msg) { r.violations.push_back({std::move(attr), std::move(msg)}); };
  if (Trim(p.id).empty()) flag("structure", "missing id");
  if (Trim(p.name).empty()) flag("structure", "missing name");
  for (auto key : kDemographicKeys) {
    auto it = p.demographics.find(std::string(key));
    if (it == p.demographics.end()) {
      flag(std::string(key), "missing demographic");
    } else if ((key == "age" || key == "income") && !std::holds_alternative<double>(it->second)) {
      flag(std::string(key), "not a number: '" + ToString(it->second) + "'");
    } else if (const auto* s = std::get_if<std::string>(&it->second); s && Trim(*s).empty()) {
      flag(std::string(key), "empty value");
    }
  }
  for (auto key : kNarrativeKeys) {
    auto it = p.narrative.find(std::string(key));
    if (it == p.narrative.end() || Trim(it->second).empty()) {
      flag("structure", "missing narrative section " + std::string(key));
    }
  }
  for (const auto& a : spec.attributes) {
    auto it = p.demographics.find(a.name);
    if (it == p.demographics.end()) {
      if (std::find(kDemographicKeys.begin(), kDemographicKeys.end(), a.name) == kDemographicKeys.end()) {
        flag(a.name, "missing demographic");
      }
      continue;
    }
    if (a.kind == AttributeSpec::Kind::kCategorical) {
      const auto* s = std::get_if<std::string>(&it->second);
      if (s == nullptr || std::find(a.values.begin(), a.values.end(), *s) == a.values.end()) {
        flag(a.name, "'" + ToString(it->second) + "' is not an allowed label");
      }
    } else {
      const auto* d = std::get_if<double>(&it->second);
      if (d == nullptr) {
        flag(a.name, "not a number: '" + ToString(it->second) + "'");
      } else if (*d < a.min || *d > a.max) {
        flag(a.name, ToString(it->second) + " outside [" + RenderNumber(a.min) + ", " + RenderNumber(a.max) + "]");
      } else if (a.integer && !IsWhole(*d)) {
        flag(a.name, ToString(it->second) + " is not a whole number");
      }
    }
  }
  return r;
}

Persona ParsePersonaDocument(std::string_view text, const AgentSpec* spec) {
  Persona p;
  std::string section;
  bool any_section = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line = NormalizeLine(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;

    auto labeled = SplitLabel(line);
    if (labeled) {
      const auto& [label, rest] = *labeled;
      const std::string lower = ToLower(label);
      if (lower == "persona" || (lower == "name" && (section.empty() || section == "demographics"))) {
        p.name = rest;
        continue;
      }
      if (auto key = SectionFor(label)) {
        section = std::string(*key);
        any_section = true;
        if (section != "demographics") {
          std::string& dst = p.narrative[section];
          AppendText(dst, rest);
        }
        continue;
      }
      if (section == "demographics") {
        std::string key = KeyFor(label);
        if (key.empty() || rest.empty()) continue;
        if (key == "occupation" || key == "job") key = "profession";
        if (key == "sex") key = "gender";
        if (key == "annual_income") key = "income";
        if (IsNumericKey(key, spec)) {
          if (auto n = FirstNumber(rest)) {
            p.demographics[key] = *n;
            continue;
          }
        }
        std::string value = rest;
        while (!value.empty() && value.back() == '.') value.pop_back();
        p.demographics[key] = value;
        continue;
      }
    }
    if (!section.empty() && section != "demographics") AppendText(p.narrative[section], line);
  }
  if (!any_section) throw ValidationError("persona document has no recognizable sections");
  return p;
}

std::string RenderPersonaDocument(const Persona& p) {
  auto section = [&](std::string_view key) {
    auto it = p.narrative.find(std::string(key));
    return it == p.narrative.end() ? std::string() : it->second;
  };
  std::string doc = "Persona: " + p.name + "\n\n";
  doc += "Background:\n" + section("background") + "\n\n";
  doc += "Demographics:\n\n";
  for (auto key : kDemographicKeys) {
    auto it = p.demographics.find(std::string(key));
    if (it != p.demographics.end()) doc += LabelFor(key) + ": " + RenderDemographic(key, it->second) + "\n\n";
  }
  for (const auto& [key, value] : p.demographics) {
    if (std::find(kDemographicKeys.begin(), kDemographicKeys.end(), key) != kDemographicKeys.end()) continue;
    doc += LabelFor(key) + ": " + RenderDemographic(key, value) + "\n\n";
  }
  doc += "Financial Situation:\n" + section("financial_situation") + "\n\n";
  doc += "Shopping Habits:\n" + section("shopping_habits") + "\n\n";
  doc += "Professional Life:\n" + section("professional_life") + "\n\n";
  doc += "Personal Style:\n" + section("personal_style") + "\n";
  return doc;
}

std::map<std::string, AttributeValue> SampleDemographics(const AgentSpec& spec, Rng& rng) {
  std::map<std::string, AttributeValue> out;
  for (const auto& a : spec.attributes) {
    if (a.kind == AttributeSpec::Kind::kCategorical) {
      const double u = Uniform01(rng);
      double acc = 0.0;
      std::size_t pick = a.values.size() - 1;
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        acc += a.weights[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      out[a.name] = a.values[pick];
      continue;
    }
    double v;
    if (a.distribution == AttributeSpec::Distribution::kUniform) {
      v = a.min + Uniform01(rng) * (a.max - a.min);
    } else {
      // Truncated normal by rejection; clamp if the mass inside is tiny.
      v = Normal(rng, a.mean, a.sd);
      for (int tries = 0; (v < a.min || v > a.max) && tries < 100; ++tries) v = Normal(rng, a.mean, a.sd);
      v = std::clamp(v, a.min, a.max);
    }
    if (a.integer) {
      v = std::clamp(std::round(v), std::ceil(a.min), std::floor(a.max));
    } else {
      v = std::clamp(std::round(v * 100.0) / 100.0, a.min, a.max);
    }
    out[a.name] = v;
  }
  return out;
}

Intention SampleIntention(const AgentSpec& spec, Rng& rng) {
  const IntentionTemplate& t = spec.intention_spec[UniformBelow(rng, spec.intention_spec.size())];
  std::map<std::string, std::string> chosen;
  for (const auto& [slot, values] : t.slots) chosen[slot] = values[UniformBelow(rng, values.size())];
  Intention intent;
  std::string text = t.text;
  for (const auto& [slot, value] : chosen) {
    const std::string ph = "{" + slot + "}";
    for (auto pos = text.find(ph); pos != std::string::npos; pos = text.find(ph, pos + value.size())) {
      text.replace(pos, ph.size(), value);
    }
  }
  intent.goal_text = text;
  if (t.category_slot) intent.category_hint = chosen.at(*t.category_slot);
  if (t.budget_slot) intent.budget_limit = FirstNumber(chosen.at(*t.budget_slot));
  return intent;
}

std::vector<Message> BuildPersonaPrompt(const AgentSpec& spec, const std::map<std::string, AttributeValue>& fixed) {
  Json d = Json::object();
  for (const auto& [k, v] : fixed) d[k] = ToJson(v);
  std::string user;
  if (!spec.population_description.empty()) user += "Target population: " + spec.population_description + "\n\n";
  user += "Write one online-shopper persona. These demographic values are fixed; state them exactly as given:\n";
  user += std::string(kDemographicsOpen) + d.dump() + std::string(kDemographicsClose) + "\n\n";
  user +=
      "Choose any demographic not listed. Use exactly this layout:\n\n"
      "Persona: <first name>\n\n"
      "Background:\n<paragraph>\n\n"
      "Demographics:\n\n"
      "Age: <years>\n\nGender: <label>\n\nEducation: <label>\n\nProfession: <label>\n\nIncome: $<per year>\n\n"
      "<Other Attribute>: <value>   (one line per remaining fixed value)\n\n"
      "Financial Situation:\n<paragraph>\n\n"
      "Shopping Habits:\n<paragraph>\n\n"
      "Professional Life:\n<paragraph>\n\n"
      "Personal Style:\n<paragraph>\n";
  return {{Role::kSystem, "You write realistic, specific personas of online shoppers for usability research."},
          {Role::kUser, user}};
}

namespace {

struct Generated {
  Persona persona;
  Intention intention;
};

Generated GenerateOne(const AgentSpec& spec, ModelClient& model, std::uint64_t seed, int index) {
  const std::string id = PersonaId(index, spec.count);
  Rng rng(DeriveSeed(seed, id));
  auto fixed = SampleDemographics(spec, rng);
  Rng intent_rng(DeriveSeed(seed, id + "/intention"));
  Intention intention = SampleIntention(spec, intent_rng);

  std::vector<Message> messages = BuildPersonaPrompt(spec, fixed);
  std::string last_problem;
  for (int attempt = 0; attempt < kPersonaAttempts; ++attempt) {
    ChatContext ctx{id, "", attempt, DeriveSeed(seed, id)};
    std::string text = model.Chat(messages, ctx);
    ValidationReport report;
    Persona p;
    try {
      p = ParsePersonaDocument(text, &spec);
      p.id = id;
      report = ValidatePersona(p, spec);
    } catch (const ValidationError& e) {
      report.violations.push_back({"structure", e.what()});
    }
    for (const auto& [k, v] : fixed) {
      auto it = p.demographics.find(k);
      if (it != p.demographics.end() && !SameValue(it->second, v)) {
        report.violations.push_back({k, "requested " + ToString(v) + ", got " + ToString(it->second)});
      }
    }
    if (report.ok()) return {std::move(p), std::move(intention)};
    last_problem = report.Describe();
    messages.push_back({Role::kAssistant, text});
    messages.push_back({Role::kUser, "That persona is invalid (" + last_problem +
                                         "). Rewrite it in the same layout with the fixed values."});
  }
  throw ValidationError("persona " + id + " failed validation after " + std::to_string(kPersonaAttempts) +
                        " attempts: " + last_problem);
}

}  // namespace

PersonaPool GeneratePersonas(const AgentSpec& spec, ModelClient& model, std::uint64_t seed, int parallelism) {
  spec.Validate();
  if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
  std::vector<std::optional<Generated>> slots(spec.count);
  std::vector<std::exception_ptr> errors(spec.count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.count; i = next++) {
      try {
        slots[i] = GenerateOne(spec, model, seed, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < std::min(parallelism, spec.count); ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  PersonaPool pool;
  pool.spec_fingerprint = spec.Fingerprint();
  for (auto& g : slots) {
    pool.intentions[g->persona.id] = std::move(g->intention);
    pool.personas.push_back(std::move(g->persona));
  }
  return pool;
}

std::vector<Persona> Sample(const PersonaPool& pool, int n, std::uint64_t seed) {
  if (n < 1 || n > static_cast<int>(pool.personas.size())) {
    throw ValidationError("sample size " + std::to_string(n) + " outside [1, " +
                          std::to_string(pool.personas.size()) + "]");
  }
  std::vector<std::size_t> order(pool.personas.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  Shuffle(order, rng);
  std::vector<Persona> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(pool.personas[order[i]]);
  return out;
}

}  // namespace agentab
