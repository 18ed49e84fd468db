#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "agentab/common.hpp"

namespace agentab {

enum class PageType { kHome, kSearchResults, kProductDetail, kPurchaseConfirmation };

std::string_view ToString(PageType type);
PageType PageTypeFromString(std::string_view name);

struct ProductSummary {
  int index = 0;  // 1-based page position
  std::string title;
  double price = 0.0;
  double rating = 0.0;
  int review_count = 0;

  bool operator==(const ProductSummary&) const = default;
};

struct FilterOption {
  std::string value;
  bool selected = false;

  bool operator==(const FilterOption&) const = default;
};

struct FilterGroup {
  std::string name;
  std::vector<FilterOption> options;

  bool operator==(const FilterGroup&) const = default;
};

struct ProductDetail {
  std::string title;
  std::string brand;
  double price = 0.0;
  double rating = 0.0;
  int review_count = 0;
  std::string department;

  bool operator==(const ProductDetail&) const = default;
};

struct Observation {
  PageType page_type = PageType::kHome;
  std::optional<std::string> query;
  std::vector<ProductSummary> products;
  std::vector<FilterGroup> filter_groups;
  std::optional<ProductDetail> detail;
  int cart_count = 0;
  std::vector<std::string> notices;

  bool operator==(const Observation&) const = default;
};

// Throws ValidationError naming the first violated invariant.
void ValidateObservation(const Observation& obs);

// Canonical JSON: field order fixed, absent optionals rendered as null.
Json ToJson(const Observation& obs);
Observation ObservationFromJson(const Json& j);

namespace action {
struct Search {
  std::string query;
  bool operator==(const Search&) const = default;
};
struct ClickProduct {
  int index = 0;
  bool operator==(const ClickProduct&) const = default;
};
struct ClickFilter {
  std::string group;
  std::string value;
  bool operator==(const ClickFilter&) const = default;
};
struct Purchase {
  bool operator==(const Purchase&) const = default;
};
struct Stop {
  bool operator==(const Stop&) const = default;
};
}  // namespace action

using Action = std::variant<action::Search, action::ClickProduct, action::ClickFilter,
                            action::Purchase, action::Stop>;

enum class ActionKind { kSearch, kClickProduct, kClickFilterOption, kPurchase, kStop };

inline constexpr std::array<ActionKind, 5> kAllActionKinds = {
    ActionKind::kSearch, ActionKind::kClickProduct, ActionKind::kClickFilterOption,
    ActionKind::kPurchase, ActionKind::kStop};

ActionKind KindOf(const Action& a);
// "search", "click_product", "click_filter_option", "purchase", "stop".
std::string_view ToString(ActionKind kind);
ActionKind ActionKindFromString(std::string_view name);

// Canonical text form, e.g. search("x"), click_product(3),
// click_filter_option("Brand: Sony"), purchase, stop.
std::string Serialize(const Action& a);
Json ToJson(const Action& a);
Action ActionFromJson(const Json& j);

// Throws ValidationError if the action's own argument invariants fail.
void ValidateAction(const Action& a);

struct ActionSpace {
  bool search = false;
  std::vector<int> product_indices;
  std::vector<std::pair<std::string, std::string>> filter_options;
  bool purchase = false;
  bool stop = true;

  bool Allows(const Action& a) const;
  std::vector<ActionKind> Kinds() const;

  bool operator==(const ActionSpace&) const = default;
};

// Page-type table: home -> {Search, Stop}; results -> {Search, ClickProduct,
// ClickFilter, Stop}; detail -> {Search, Purchase, Stop}; confirmation ->
// {Search, Stop}. Only listed products and filter options are clickable.
ActionSpace ComputeActionSpace(const Observation& obs);
Json ToJson(const ActionSpace& space);

enum class ExecStatus { kOk, kRecovered, kFailed };
enum class RecoveryStrategy { kRetry, kScroll, kReparse };

std::string_view ToString(ExecStatus s);
std::string_view ToString(RecoveryStrategy s);

struct ExecResult {
  ExecStatus status = ExecStatus::kOk;
  std::optional<RecoveryStrategy> strategy;  // set iff status == kRecovered
  std::string reason;                        // set iff status == kFailed
  double latency = 0.0;                      // seconds

  static ExecResult Ok(double latency = 0.0) { return {ExecStatus::kOk, std::nullopt, {}, latency}; }
  static ExecResult Recovered(RecoveryStrategy s, double latency = 0.0) {
    return {ExecStatus::kRecovered, s, {}, latency};
  }
  static ExecResult Failed(std::string reason, double latency = 0.0) {
    return {ExecStatus::kFailed, std::nullopt, std::move(reason), latency};
  }
  bool TookEffect() const { return status != ExecStatus::kFailed; }

  bool operator==(const ExecResult&) const = default;
};

Json ToJson(const ExecResult& r);
ExecResult ExecResultFromJson(const Json& j);

// Raised when an executed action is not in the current action space.
class OutOfSpaceError : public Error {
 public:
  using Error::Error;
};

// A live handle on one environment instance. Owned by exactly one worker.
class EnvSession {
 public:
  virtual ~EnvSession() = default;
  virtual Observation Observe() = 0;
  // Precondition: action is in ComputeActionSpace(Observe()); otherwise
  // throws OutOfSpaceError.
  virtual ExecResult Execute(const Action& action) = 0;
};

}  // namespace agentab
