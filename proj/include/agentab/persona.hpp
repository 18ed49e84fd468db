#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "agentab/common.hpp"
#include "agentab/model_client.hpp"

namespace agentab {

struct AttributeSpec {
  enum class Kind { kCategorical, kNumeric };
  enum class Distribution { kUniform, kNormal };

  std::string name;
  Kind kind = Kind::kCategorical;
  // categorical
  std::vector<std::string> values;
  std::vector<double> weights;
  // numeric
  double min = 0.0;
  double max = 0.0;
  Distribution distribution = Distribution::kUniform;
  double mean = 0.0;
  double sd = 0.0;
  bool integer = false;  // draws rounded to whole units

  static AttributeSpec FromJson(const Json& j);
  Json ToJson() const;
};

struct IntentionTemplate {
  std::string text;  // "{slot}" placeholders
  std::map<std::string, std::vector<std::string>> slots;
  std::optional<std::string> category_slot;
  std::optional<std::string> budget_slot;  // slot values parse as prices

  static IntentionTemplate FromJson(const Json& j);
  Json ToJson() const;
};

struct AgentSpec {
  int count = 0;
  std::vector<AttributeSpec> attributes;
  std::string population_description;
  std::vector<IntentionTemplate> intention_spec;

  void Validate() const;
  const AttributeSpec* Find(std::string_view name) const;
  std::string Fingerprint() const;

  static AgentSpec FromJson(const Json& j);
  static AgentSpec Load(const std::filesystem::path& path);
  Json ToJson() const;
};

using AttributeValue = std::variant<double, std::string>;

std::string ToString(const AttributeValue& v);
Json ToJson(const AttributeValue& v);

inline constexpr std::array<std::string_view, 5> kDemographicKeys = {"age", "gender", "education", "profession",
                                                                     "income"};
inline constexpr std::array<std::string_view, 5> kNarrativeKeys = {
    "background", "financial_situation", "shopping_habits", "professional_life", "personal_style"};

struct Persona {
  std::string id;
  std::string name;
  std::map<std::string, AttributeValue> demographics;
  std::map<std::string, std::string> narrative;

  bool operator==(const Persona&) const = default;

  static Persona FromJson(const Json& j);
  Json ToJson() const;
};

struct Intention {
  std::string goal_text;
  std::optional<double> budget_limit;
  std::optional<std::string> category_hint;

  bool operator==(const Intention&) const = default;

  static Intention FromJson(const Json& j);
  Json ToJson() const;
};

struct PersonaPool {
  std::vector<Persona> personas;
  std::map<std::string, Intention> intentions;
  std::string spec_fingerprint;

  const Persona* Find(std::string_view id) const;
  // Throws SchemaError on duplicate ids or a missing intention.
  void CheckInvariants() const;

  static PersonaPool FromJson(const Json& j);
  static PersonaPool Load(const std::filesystem::path& path);
  Json ToJson() const;
};

struct Violation {
  std::string attribute;  // attribute name, or "structure"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string Describe() const;
};

ValidationReport ValidatePersona(const Persona& p, const AgentSpec& spec);

// Tolerant reader for labeled-section persona documents: headings are
// case-insensitive and colon-terminated, optionally wrapped in markdown.
// Sections: Background, Demographics, Financial Situation, Shopping Habits,
// Professional Life, Personal Style. Numeric demographics take the first
// number on the line. Throws ValidationError when no section is found.
Persona ParsePersonaDocument(std::string_view text, const AgentSpec* spec = nullptr);
std::string RenderPersonaDocument(const Persona& p);

// Host-side draw of the spec's attributes for one persona.
std::map<std::string, AttributeValue> SampleDemographics(const AgentSpec& spec, Rng& rng);
Intention SampleIntention(const AgentSpec& spec, Rng& rng);

std::vector<Message> BuildPersonaPrompt(const AgentSpec& spec, const std::map<std::string, AttributeValue>& fixed);

inline constexpr int kPersonaAttempts = 3;

// One request per persona; each persona gets up to kPersonaAttempts tries.
PersonaPool GeneratePersonas(const AgentSpec& spec, ModelClient& model, std::uint64_t seed,
                             int parallelism = 1);

// n distinct personas in seeded random order. Requires 1 <= n <= |pool|.
std::vector<Persona> Sample(const PersonaPool& pool, int n, std::uint64_t seed);

}  // namespace agentab
