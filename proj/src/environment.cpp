#include "agentab/environment.hpp"

#include <algorithm>

namespace agentab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string Quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Json OptionalString(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

}  // namespace

std::string_view ToString(PageType type) {
  switch (type) {
    case PageType::kHome: return "home";
    case PageType::kSearchResults: return "search_results";
    case PageType::kProductDetail: return "product_detail";
    case PageType::kPurchaseConfirmation: return "purchase_confirmation";
  }
  return "home";
}

PageType PageTypeFromString(std::string_view name) {
  if (name == "home") return PageType::kHome;
  if (name == "search_results") return PageType::kSearchResults;
  if (name == "product_detail") return PageType::kProductDetail;
  if (name == "purchase_confirmation") return PageType::kPurchaseConfirmation;
  throw ValidationError("unknown page type: " + std::string(name));
}

void ValidateObservation(const Observation& obs) {
  if (obs.cart_count < 0) throw ValidationError("observation: cart_count must be >= 0");
  if (obs.page_type == PageType::kHome && (!obs.products.empty() || !obs.filter_groups.empty())) {
    throw ValidationError("observation: home page must not list products or filters");
  }
  for (std::size_t i = 0; i < obs.products.size(); ++i) {
    const auto& p = obs.products[i];
    if (p.index != static_cast<int>(i) + 1) {
      throw ValidationError("observation: product indices must be consecutive from 1");
    }
    if (p.rating < 0.0 || p.rating > 5.0) throw ValidationError("observation: rating outside [0,5]");
    if (p.review_count < 0) throw ValidationError("observation: negative review_count");
  }
  for (const auto& g : obs.filter_groups) {
    std::set<std::string> seen;
    for (const auto& o : g.options) {
      if (!seen.insert(o.value).second) {
        throw ValidationError("observation: duplicate option '" + o.value + "' in group '" +
                              g.name + "'");
      }
    }
  }
}

Json ToJson(const Observation& obs) {
  Json j;
  j["page_type"] = ToString(obs.page_type);
  j["query"] = OptionalString(obs.query);
  Json products = Json::array();
  for (const auto& p : obs.products) {
    products.push_back({{"index", p.index},
                        {"title", p.title},
                        {"price", p.price},
                        {"rating", p.rating},
                        {"review_count", p.review_count}});
  }
  j["products"] = std::move(products);
  Json groups = Json::array();
  for (const auto& g : obs.filter_groups) {
    Json options = Json::array();
    for (const auto& o : g.options) options.push_back({{"value", o.value}, {"selected", o.selected}});
    groups.push_back({{"name", g.name}, {"options", std::move(options)}});
  }
  j["filter_groups"] = std::move(groups);
  if (obs.detail) {
    const auto& d = *obs.detail;
    j["detail"] = {{"title", d.title},       {"brand", d.brand},
                   {"price", d.price},       {"rating", d.rating},
                   {"review_count", d.review_count}, {"department", d.department}};
  } else {
    j["detail"] = nullptr;
  }
  j["cart_count"] = obs.cart_count;
  j["notices"] = obs.notices;
  return j;
}

Observation ObservationFromJson(const Json& j) {
  Observation obs;
  obs.page_type = PageTypeFromString(j.at("page_type").get<std::string>());
  if (!j.at("query").is_null()) obs.query = j.at("query").get<std::string>();
  for (const auto& p : j.at("products")) {
    obs.products.push_back({p.at("index").get<int>(), p.at("title").get<std::string>(),
                            p.at("price").get<double>(), p.at("rating").get<double>(),
                            p.at("review_count").get<int>()});
  }
  for (const auto& g : j.at("filter_groups")) {
    FilterGroup group{g.at("name").get<std::string>(), {}};
    for (const auto& o : g.at("options")) {
      group.options.push_back({o.at("value").get<std::string>(), o.at("selected").get<bool>()});
    }
    obs.filter_groups.push_back(std::move(group));
  }
  if (!j.at("detail").is_null()) {
    const auto& d = j.at("detail");
    obs.detail = ProductDetail{d.at("title").get<std::string>(),  d.at("brand").get<std::string>(),
                               d.at("price").get<double>(),       d.at("rating").get<double>(),
                               d.at("review_count").get<int>(),   d.at("department").get<std::string>()};
  }
  obs.cart_count = j.at("cart_count").get<int>();
  obs.notices = j.at("notices").get<std::vector<std::string>>();
  return obs;
}

ActionKind KindOf(const Action& a) { return static_cast<ActionKind>(a.index()); }

std::string_view ToString(ActionKind kind) {
  switch (kind) {
    case ActionKind::kSearch: return "search";
    case ActionKind::kClickProduct: return "click_product";
    case ActionKind::kClickFilterOption: return "click_filter_option";
    case ActionKind::kPurchase: return "purchase";
    case ActionKind::kStop: return "stop";
  }
  return "stop";
}

ActionKind ActionKindFromString(std::string_view name) {
  for (ActionKind k : kAllActionKinds) {
    if (ToString(k) == name) return k;
  }
  throw ValidationError("unknown action kind: " + std::string(name));
}

std::string Serialize(const Action& a) {
  return std::visit(
      Overloaded{
          [](const action::Search& s) { return "search(" + Quote(s.query) + ")"; },
          [](const action::ClickProduct& c) { return "click_product(" + std::to_string(c.index) + ")"; },
          [](const action::ClickFilter& f) {
            return "click_filter_option(" + Quote(f.group + ": " + f.value) + ")";
          },
          [](const action::Purchase&) { return std::string("purchase"); },
          [](const action::Stop&) { return std::string("stop"); },
      },
      a);
}

Json ToJson(const Action& a) {
  Json j;
  j["kind"] = ToString(KindOf(a));
  std::visit(Overloaded{
                 [&](const action::Search& s) { j["query"] = s.query; },
                 [&](const action::ClickProduct& c) { j["index"] = c.index; },
                 [&](const action::ClickFilter& f) {
                   j["group"] = f.group;
                   j["value"] = f.value;
                 },
                 [](const action::Purchase&) {},
                 [](const action::Stop&) {},
             },
             a);
  return j;
}

Action ActionFromJson(const Json& j) {
  switch (ActionKindFromString(j.at("kind").get<std::string>())) {
    case ActionKind::kSearch: return action::Search{j.at("query").get<std::string>()};
    case ActionKind::kClickProduct: return action::ClickProduct{j.at("index").get<int>()};
    case ActionKind::kClickFilterOption:
      return action::ClickFilter{j.at("group").get<std::string>(), j.at("value").get<std::string>()};
    case ActionKind::kPurchase: return action::Purchase{};
    case ActionKind::kStop: return action::Stop{};
  }
  throw ValidationError("unreachable action kind");
}

void ValidateAction(const Action& a) {
  if (const auto* s = std::get_if<action::Search>(&a); s && Trim(s->query).empty()) {
    throw ValidationError("search query must be non-empty");
  }
  if (const auto* c = std::get_if<action::ClickProduct>(&a); c && c->index < 1) {
    throw ValidationError("click_product index must be >= 1");
  }
  if (const auto* f = std::get_if<action::ClickFilter>(&a)) {
    if (f->group.empty() || f->value.empty()) throw ValidationError("filter group/value must be non-empty");
    if (f->group.find(':') != std::string::npos) throw ValidationError("filter group must not contain ':'");
  }
}

bool ActionSpace::Allows(const Action& a) const {
  return std::visit(
      Overloaded{
          [&](const action::Search& s) { return search && !Trim(s.query).empty(); },
          [&](const action::ClickProduct& c) {
            return std::find(product_indices.begin(), product_indices.end(), c.index) !=
                   product_indices.end();
          },
          [&](const action::ClickFilter& f) {
            return std::find(filter_options.begin(), filter_options.end(),
                             std::pair{f.group, f.value}) != filter_options.end();
          },
          [&](const action::Purchase&) { return purchase; },
          [&](const action::Stop&) { return stop; },
      },
      a);
}

std::vector<ActionKind> ActionSpace::Kinds() const {
  std::vector<ActionKind> kinds;
  if (search) kinds.push_back(ActionKind::kSearch);
  if (!product_indices.empty()) kinds.push_back(ActionKind::kClickProduct);
  if (!filter_options.empty()) kinds.push_back(ActionKind::kClickFilterOption);
  if (purchase) kinds.push_back(ActionKind::kPurchase);
  if (stop) kinds.push_back(ActionKind::kStop);
  return kinds;
}

ActionSpace ComputeActionSpace(const Observation& obs) {
  ActionSpace space;
  space.search = true;
  space.stop = true;
  switch (obs.page_type) {
    case PageType::kHome:
    case PageType::kPurchaseConfirmation:
      break;
    case PageType::kSearchResults:
      for (const auto& p : obs.products) space.product_indices.push_back(p.index);
      for (const auto& g : obs.filter_groups) {
        for (const auto& o : g.options) space.filter_options.emplace_back(g.name, o.value);
      }
      break;
    case PageType::kProductDetail:
      space.purchase = true;
      break;
  }
  return space;
}

Json ToJson(const ActionSpace& space) {
  Json j;
  j["search"] = space.search;
  j["click_product"] = space.product_indices;
  Json filters = Json::array();
  for (const auto& [g, v] : space.filter_options) filters.push_back(g + ": " + v);
  j["click_filter_option"] = std::move(filters);
  j["purchase"] = space.purchase;
  j["stop"] = space.stop;
  return j;
}

std::string_view ToString(ExecStatus s) {
  switch (s) {
    case ExecStatus::kOk: return "ok";
    case ExecStatus::kRecovered: return "recovered";
    case ExecStatus::kFailed: return "failed";
  }
  return "failed";
}

std::string_view ToString(RecoveryStrategy s) {
  switch (s) {
    case RecoveryStrategy::kRetry: return "retry";
    case RecoveryStrategy::kScroll: return "scroll";
    case RecoveryStrategy::kReparse: return "reparse";
  }
  return "retry";
}

Json ToJson(const ExecResult& r) {
  Json j;
  j["status"] = ToString(r.status);
  j["strategy"] = r.strategy ? Json(ToString(*r.strategy)) : Json(nullptr);
  j["reason"] = r.status == ExecStatus::kFailed ? Json(r.reason) : Json(nullptr);
  j["latency"] = r.latency;
  return j;
}

ExecResult ExecResultFromJson(const Json& j) {
  ExecResult r;
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = ExecStatus::kOk;
  } else if (status == "recovered") {
    r.status = ExecStatus::kRecovered;
    const auto s = j.at("strategy").get<std::string>();
    if (s == "retry") r.strategy = RecoveryStrategy::kRetry;
    else if (s == "scroll") r.strategy = RecoveryStrategy::kScroll;
    else if (s == "reparse") r.strategy = RecoveryStrategy::kReparse;
    else throw SchemaError("unknown recovery strategy: " + s);
  } else if (status == "failed") {
    r.status = ExecStatus::kFailed;
    r.reason = j.at("reason").get<std::string>();
  } else {
    throw SchemaError("unknown exec status: " + status);
  }
  r.latency = j.at("latency").get<double>();
  return r;
}

}  // namespace agentab
