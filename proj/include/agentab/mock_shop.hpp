#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agentab/environment.hpp"

namespace agentab {

struct Product {
  std::string id;
  std::string title;
  std::string brand;
  double price = 0.0;
  double rating = 0.0;
  int review_count = 0;
  std::string department;
  std::map<std::string, std::string> attributes;

  bool operator==(const Product&) const = default;
};

class Catalog {
 public:
  Catalog() = default;
  // Validates ids unique, price > 0, rating in [0,5], departments known.
  Catalog(std::vector<Product> products, std::vector<std::string> departments);

  // Accepts either a bare JSON array of products or
  // {"departments": [...], "products": [...]}.
  static Catalog FromJson(const Json& j);
  static Catalog Load(const std::filesystem::path& path);
  Json ToJson() const;

  const std::vector<Product>& products() const { return products_; }
  const std::vector<std::string>& departments() const { return departments_; }
  const Product* Find(std::string_view id) const;

 private:
  std::vector<Product> products_;
  std::vector<std::string> departments_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Lowercased alphanumeric tokens with stopwords removed.
std::vector<std::string> Tokenize(std::string_view text);
std::set<std::string> TokenSet(std::string_view text);
bool IsStopword(std::string_view token);

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  virtual std::string_view id() const = 0;
  // Similarity of a filter option label to the search query, in [0,1].
  virtual double Score(std::string_view option, std::string_view query) const = 0;
};

// |tokens(option) ∩ tokens(query)| / |tokens(option)|; 0 when the option has
// no tokens.
class TokenOverlapScorer final : public SimilarityScorer {
 public:
  std::string_view id() const override { return "token_overlap"; }
  double Score(std::string_view option, std::string_view query) const override;
};

std::shared_ptr<const SimilarityScorer> MakeScorer(std::string_view id);

struct VariantConfig {
  enum class FilterMode { kFull, kReduced };
  FilterMode filter_mode = FilterMode::kFull;
  double threshold = 0.8;
  std::string scorer = "token_overlap";

  static VariantConfig Full() { return {}; }
  static VariantConfig Reduced(double threshold = 0.8) {
    return {FilterMode::kReduced, threshold, "token_overlap"};
  }
  static VariantConfig FromJson(const Json& j);
  Json ToJson() const;
};

inline constexpr std::size_t kMaxResults = 10;

// Ranks by fraction of query tokens found in the title or attribute values,
// dropping zero scores; ties broken by rating desc then id asc. Top 10.
std::vector<const Product*> SearchRank(const Catalog& catalog, std::string_view query);

// Group names in panel order.
inline constexpr std::array<std::string_view, 4> kFilterGroupNames = {"Brand", "Department",
                                                                      "Price", "Rating"};

bool ProductMatchesOption(const Product& p, std::string_view group, std::string_view value);

std::vector<FilterGroup> BuildFilterGroups(const std::vector<const Product*>& results,
                                           const VariantConfig& variant, std::string_view query);

struct ShopState {
  PageType page = PageType::kHome;
  std::optional<std::string> query;
  std::set<std::pair<std::string, std::string>> active_filters;
  std::vector<std::string> results;        // ranked ids from the last search
  std::vector<FilterGroup> panel;          // options as built at search time
  std::optional<std::string> viewing;
  std::vector<std::pair<std::string, double>> purchases;
  bool terminated = false;

  double Spend() const;
  bool operator==(const ShopState&) const = default;
};

// Ids of `results` passing the active filters: conjunctive across groups,
// disjunctive within a group.
std::vector<std::string> VisibleResults(const ShopState& state, const Catalog& catalog);

Observation ObserveShop(const ShopState& state, const Catalog& catalog);

// Throws OutOfSpaceError if the action is not legal in the observed state and
// ValidationError if the state is terminated.
ShopState Transition(const ShopState& state, const Action& action, const Catalog& catalog,
                     const VariantConfig& variant);

class MockShopSession final : public EnvSession {
 public:
  MockShopSession(std::shared_ptr<const Catalog> catalog, VariantConfig variant);

  Observation Observe() override;
  ExecResult Execute(const Action& action) override;

  const ShopState& state() const { return state_; }

 private:
  std::shared_ptr<const Catalog> catalog_;
  VariantConfig variant_;
  ShopState state_;
};

// URL-addressed rendering of the shop, so a browser (or a fake driver) can
// walk it. Routes under `prefix`: "/", "/search?q=..&f=Group:Value&cart=N",
// "/product/<id>?q=..&cart=N", "/buy/<id>?q=..&cart=N".
class ShopRouter {
 public:
  ShopRouter(std::shared_ptr<const Catalog> catalog, VariantConfig variant, std::string prefix);

  // Returns nullopt for unknown routes.
  std::optional<std::string> Render(std::string_view path_and_query) const;
  const std::string& prefix() const { return prefix_; }

 private:
  std::shared_ptr<const Catalog> catalog_;
  VariantConfig variant_;
  std::string prefix_;
};

// HTML for one state. `cart` is the purchase count shown in the header.
std::string RenderShopHtml(const ShopState& state, const Catalog& catalog, std::string_view prefix);

std::string UrlEncode(std::string_view s);
std::string UrlDecode(std::string_view s);
std::string HtmlEscape(std::string_view s);

}  // namespace agentab
