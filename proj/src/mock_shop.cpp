#include "agentab/mock_shop.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace agentab {

namespace {

constexpr std::array<std::string_view, 24> kStopwords = {
    "a",  "an",   "and",  "are", "as",   "at",  "be",   "by",  "for",  "from", "in",   "is",
    "it", "of",   "on",   "or",  "that", "the", "this", "to",  "with", "my",   "your", "&"};

struct PriceBucket {
  std::string_view label;
  double lo;
  double hi;  // exclusive
};

constexpr std::array<PriceBucket, 4> kPriceBuckets = {{
    {"Under $25", 0.0, 25.0},
    {"$25 to $50", 25.0, 50.0},
    {"$50 to $100", 50.0, 100.0},
    {"$100 & Above", 100.0, 1e300},
}};

struct RatingBucket {
  std::string_view label;
  double min;
};

constexpr std::array<RatingBucket, 2> kRatingBuckets = {{{"4 Stars & Up", 4.0}, {"3 Stars & Up", 3.0}}};

std::string FormatPrice(double price) { return "$" + FormatFixed(price, 2); }

std::string WithCommas(int n) {
  std::string digits = std::to_string(n);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count > 0 && count % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

Catalog::Catalog(std::vector<Product> products, std::vector<std::string> departments)
    : products_(std::move(products)), departments_(std::move(departments)) {
  std::set<std::string, std::less<>> depts(departments_.begin(), departments_.end());
  for (std::size_t i = 0; i < products_.size(); ++i) {
    const Product& p = products_[i];
    if (p.id.empty()) throw ValidationError("catalog: product with empty id");
    if (!by_id_.emplace(p.id, i).second) throw ValidationError("catalog: duplicate product id " + p.id);
    if (!(p.price > 0.0)) throw ValidationError("catalog: product " + p.id + " price must be > 0");
    if (p.rating < 0.0 || p.rating > 5.0) throw ValidationError("catalog: product " + p.id + " rating outside [0,5]");
    if (p.review_count < 0) throw ValidationError("catalog: product " + p.id + " negative review_count");
    if (!depts.contains(p.department)) {
      throw ValidationError("catalog: product " + p.id + " department '" + p.department + "' not listed");
    }
  }
}

Catalog Catalog::FromJson(const Json& j) {
  const Json& items = j.is_array() ? j : j.at("products");
  std::vector<Product> products;
  std::vector<std::string> departments;
  for (const auto& item : items) {
    Product p;
    p.id = item.at("id").get<std::string>();
    p.title = item.at("title").get<std::string>();
    p.brand = item.at("brand").get<std::string>();
    p.price = item.at("price").get<double>();
    p.rating = item.at("rating").get<double>();
    p.review_count = item.at("review_count").get<int>();
    p.department = item.at("department").get<std::string>();
    if (item.contains("attributes")) {
      for (const auto& [k, v] : item.at("attributes").items()) p.attributes[k] = v.get<std::string>();
    }
    if (j.is_array() && std::find(departments.begin(), departments.end(), p.department) == departments.end()) {
      departments.push_back(p.department);
    }
    products.push_back(std::move(p));
  }
  if (!j.is_array()) departments = j.at("departments").get<std::vector<std::string>>();
  return Catalog(std::move(products), std::move(departments));
}

Catalog Catalog::Load(const std::filesystem::path& path) { return FromJson(ReadJsonFile(path)); }

Json Catalog::ToJson() const {
  Json items = Json::array();
  for (const auto& p : products_) {
    Json attrs = Json::object();
    for (const auto& [k, v] : p.attributes) attrs[k] = v;
    items.push_back({{"id", p.id},
                     {"title", p.title},
                     {"brand", p.brand},
                     {"price", p.price},
                     {"rating", p.rating},
                     {"review_count", p.review_count},
                     {"department", p.department},
                     {"attributes", attrs}});
  }
  return {{"departments", departments_}, {"products", items}};
}

const Product* Catalog::Find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &products_[it->second];
}

bool IsStopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !IsStopword(cur)) tokens.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::set<std::string> TokenSet(std::string_view text) {
  auto tokens = Tokenize(text);
  return {tokens.begin(), tokens.end()};
}

double TokenOverlapScorer::Score(std::string_view option, std::string_view query) const {
  auto opt = TokenSet(option);
  if (opt.empty()) return 0.0;
  auto q = TokenSet(query);
  std::size_t shared = 0;
  for (const auto& t : opt) shared += q.count(t);
  return static_cast<double>(shared) / static_cast<double>(opt.size());
}

std::shared_ptr<const SimilarityScorer> MakeScorer(std::string_view id) {
  if (id == "token_overlap") return std::make_shared<TokenOverlapScorer>();
  throw ValidationError("unknown similarity scorer: " + std::string(id));
}

VariantConfig VariantConfig::FromJson(const Json& j) {
  VariantConfig v;
  const auto mode = j.value("filter_mode", std::string("full"));
  if (mode == "full") {
    v.filter_mode = FilterMode::kFull;
  } else if (mode == "reduced") {
    v.filter_mode = FilterMode::kReduced;
  } else {
    throw ValidationError("filter_mode must be 'full' or 'reduced'");
  }
  v.threshold = j.value("threshold", 0.8);
  v.scorer = j.value("scorer", std::string("token_overlap"));
  if (v.threshold < 0.0 || v.threshold > 1.0) throw ValidationError("threshold must be in [0,1]");
  MakeScorer(v.scorer);
  return v;
}

Json VariantConfig::ToJson() const {
  Json j;
  j["filter_mode"] = filter_mode == FilterMode::kFull ? "full" : "reduced";
  if (filter_mode == FilterMode::kReduced) {
    j["threshold"] = threshold;
    j["scorer"] = scorer;
  }
  return j;
}

std::vector<const Product*> SearchRank(const Catalog& catalog, std::string_view query) {
  auto q = TokenSet(query);
  if (q.empty()) return {};
  std::vector<std::pair<double, const Product*>> scored;
  for (const auto& p : catalog.products()) {
    auto tokens = TokenSet(p.title);
    for (const auto& [k, v] : p.attributes) {
      for (auto& t : Tokenize(v)) tokens.insert(std::move(t));
    }
    std::size_t shared = 0;
    for (const auto& t : q) shared += tokens.count(t);
    if (shared == 0) continue;
    scored.emplace_back(static_cast<double>(shared) / static_cast<double>(q.size()), &p);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (a.second->rating != b.second->rating) return a.second->rating > b.second->rating;
    return a.second->id < b.second->id;
  });
  std::vector<const Product*> out;
  for (std::size_t i = 0; i < scored.size() && i < kMaxResults; ++i) out.push_back(scored[i].second);
  return out;
}

bool ProductMatchesOption(const Product& p, std::string_view group, std::string_view value) {
  if (group == "Brand") return p.brand == value;
  if (group == "Department") return p.department == value;
  if (group == "Price") {
    for (const auto& b : kPriceBuckets) {
      if (b.label == value) return p.price >= b.lo && p.price < b.hi;
    }
    return false;
  }
  if (group == "Rating") {
    for (const auto& b : kRatingBuckets) {
      if (b.label == value) return p.rating >= b.min;
    }
    return false;
  }
  return false;
}

std::vector<FilterGroup> BuildFilterGroups(const std::vector<const Product*>& results,
                                           const VariantConfig& variant, std::string_view query) {
  std::vector<FilterGroup> groups;
  auto add = [&](std::string_view name, std::vector<std::string> values) {
    FilterGroup g{std::string(name), {}};
    for (auto& v : values) g.options.push_back({std::move(v), false});
    groups.push_back(std::move(g));
  };

  std::set<std::string> brands, departments;
  for (const Product* p : results) {
    brands.insert(p->brand);
    departments.insert(p->department);
  }
  add("Brand", {brands.begin(), brands.end()});
  add("Department", {departments.begin(), departments.end()});

  std::vector<std::string> prices;
  for (const auto& b : kPriceBuckets) {
    bool any = std::any_of(results.begin(), results.end(),
                           [&](const Product* p) { return ProductMatchesOption(*p, "Price", b.label); });
    if (any) prices.emplace_back(b.label);
  }
  add("Price", std::move(prices));

  std::vector<std::string> ratings;
  for (const auto& b : kRatingBuckets) {
    bool any = std::any_of(results.begin(), results.end(), [&](const Product* p) { return p->rating >= b.min; });
    if (any) ratings.emplace_back(b.label);
  }
  add("Rating", std::move(ratings));

  if (variant.filter_mode == VariantConfig::FilterMode::kReduced) {
    auto scorer = MakeScorer(variant.scorer);
    for (auto& g : groups) {
      std::erase_if(g.options, [&](const FilterOption& o) { return scorer->Score(o.value, query) < variant.threshold; });
    }
  }
  std::erase_if(groups, [](const FilterGroup& g) { return g.options.empty(); });
  return groups;
}

double ShopState::Spend() const {
  double total = 0.0;
  for (const auto& [id, price] : purchases) total += price;
  return total;
}

std::vector<std::string> VisibleResults(const ShopState& state, const Catalog& catalog) {
  std::map<std::string, std::vector<std::string>> by_group;
  for (const auto& [g, v] : state.active_filters) by_group[g].push_back(v);
  std::vector<std::string> out;
  for (const auto& id : state.results) {
    const Product* p = catalog.Find(id);
    if (p == nullptr) continue;
    bool ok = true;
    for (const auto& [g, values] : by_group) {
      bool any = std::any_of(values.begin(), values.end(),
                             [&](const std::string& v) { return ProductMatchesOption(*p, g, v); });
      if (!any) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(id);
  }
  return out;
}

Observation ObserveShop(const ShopState& state, const Catalog& catalog) {
  Observation obs;
  obs.page_type = state.page;
  obs.query = state.query;
  obs.cart_count = static_cast<int>(state.purchases.size());
  switch (state.page) {
    case PageType::kHome:
      obs.query.reset();
      break;
    case PageType::kSearchResults: {
      int index = 1;
      for (const auto& id : VisibleResults(state, catalog)) {
        const Product* p = catalog.Find(id);
        obs.products.push_back({index++, p->title, p->price, p->rating, p->review_count});
      }
      obs.filter_groups = state.panel;
      for (auto& g : obs.filter_groups) {
        for (auto& o : g.options) o.selected = state.active_filters.contains({g.name, o.value});
      }
      if (obs.products.empty()) obs.notices.push_back("No results for \"" + state.query.value_or("") + "\"");
      break;
    }
    case PageType::kProductDetail: {
      const Product* p = catalog.Find(*state.viewing);
      obs.detail = ProductDetail{p->title, p->brand, p->price, p->rating, p->review_count, p->department};
      break;
    }
    case PageType::kPurchaseConfirmation: {
      const auto& last = state.purchases.back();
      const Product* p = catalog.Find(last.first);
      obs.notices.push_back("Order placed: " + (p ? p->title : last.first));
      break;
    }
  }
  return obs;
}

ShopState Transition(const ShopState& state, const Action& action, const Catalog& catalog,
                     const VariantConfig& variant) {
  if (state.terminated) throw ValidationError("session terminated: no further transitions");
  const Observation obs = ObserveShop(state, catalog);
  if (!ComputeActionSpace(obs).Allows(action)) {
    throw OutOfSpaceError("action not in current space: " + Serialize(action));
  }
  ShopState next = state;
  if (const auto* s = std::get_if<action::Search>(&action)) {
    auto ranked = SearchRank(catalog, s->query);
    next.page = PageType::kSearchResults;
    next.query = s->query;
    next.active_filters.clear();
    next.results.clear();
    for (const Product* p : ranked) next.results.push_back(p->id);
    next.panel = BuildFilterGroups(ranked, variant, s->query);
    next.viewing.reset();
  } else if (const auto* f = std::get_if<action::ClickFilter>(&action)) {
    std::pair key{f->group, f->value};
    if (!next.active_filters.erase(key)) next.active_filters.insert(std::move(key));
  } else if (const auto* c = std::get_if<action::ClickProduct>(&action)) {
    auto visible = VisibleResults(state, catalog);
    next.viewing = visible.at(static_cast<std::size_t>(c->index - 1));
    next.page = PageType::kProductDetail;
  } else if (std::holds_alternative<action::Purchase>(action)) {
    const Product* p = catalog.Find(*state.viewing);
    next.purchases.emplace_back(p->id, p->price);
    next.page = PageType::kPurchaseConfirmation;
  } else {
    next.terminated = true;
  }
  return next;
}

MockShopSession::MockShopSession(std::shared_ptr<const Catalog> catalog, VariantConfig variant)
    : catalog_(std::move(catalog)), variant_(std::move(variant)) {}

Observation MockShopSession::Observe() { return ObserveShop(state_, *catalog_); }

ExecResult MockShopSession::Execute(const Action& action) {
  state_ = Transition(state_, action, *catalog_, variant_);
  return ExecResult::Ok();
}

std::string UrlEncode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char c : s) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(c);
    } else if (c == ' ') {
      out.push_back('+');
    } else {
      out.push_back('%');
      out.push_back(kHex[uc >> 4]);
      out.push_back(kHex[uc & 0xF]);
    }
  }
  return out;
}

std::string UrlDecode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out.push_back(' ');
    } else if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string HtmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

using Params = std::vector<std::pair<std::string, std::string>>;

std::string BuildQuery(const Params& params) {
  std::string q;
  for (const auto& [k, v] : params) {
    q += q.empty() ? "?" : "&";
    q += UrlEncode(k) + "=" + UrlEncode(v);
  }
  return q;
}

Params ParseQuery(std::string_view qs) {
  Params out;
  while (!qs.empty()) {
    auto amp = qs.find('&');
    auto part = qs.substr(0, amp);
    auto eq = part.find('=');
    if (!part.empty()) {
      out.emplace_back(UrlDecode(part.substr(0, eq)),
                       eq == std::string_view::npos ? "" : UrlDecode(part.substr(eq + 1)));
    }
    if (amp == std::string_view::npos) break;
    qs.remove_prefix(amp + 1);
  }
  return out;
}

Params StateParams(const ShopState& s, bool with_filters) {
  Params p;
  if (s.query) p.emplace_back("q", *s.query);
  if (with_filters) {
    for (const auto& [g, v] : s.active_filters) p.emplace_back("f", g + ":" + v);
  }
  p.emplace_back("cart", std::to_string(s.purchases.size()));
  return p;
}

void RenderHeader(std::ostringstream& html, const ShopState& s, std::string_view prefix) {
  html << "<header id=\"nav\">\n"
       << "  <a class=\"logo\" href=\"" << prefix << "/\">MockShop</a>\n"
       << "  <form class=\"search-form\" action=\"" << prefix << "/search\" method=\"get\">\n"
       << "    <input id=\"search-box\" type=\"text\" name=\"q\" value=\""
       << HtmlEscape(s.page == PageType::kHome ? "" : s.query.value_or("")) << "\">\n"
       << "    <input type=\"hidden\" name=\"cart\" value=\"" << s.purchases.size() << "\">\n"
       << "    <button id=\"search-submit\" type=\"submit\">Go</button>\n"
       << "  </form>\n"
       << "  <span class=\"cart\">Cart: <span id=\"cart-count\">" << s.purchases.size() << "</span></span>\n"
       << "</header>\n"
       << "<div class=\"ad-banner\"><a href=\"https://ads.example.com/\">Limited time deal! Save 20% on gadgets</a></div>\n";
}

}  // namespace

std::string RenderShopHtml(const ShopState& state, const Catalog& catalog, std::string_view prefix) {
  const Observation obs = ObserveShop(state, catalog);
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>MockShop</title></head>\n<body>\n";
  RenderHeader(html, state, prefix);
  for (const auto& n : obs.notices) html << "<div class=\"notice\">" << HtmlEscape(n) << "</div>\n";
  switch (state.page) {
    case PageType::kHome:
      html << "<main id=\"home-hero\"><h1>Welcome to MockShop</h1>\n"
           << "<p>Search our catalog to get started.</p></main>\n";
      break;
    case PageType::kSearchResults: {
      html << "<div id=\"filter-panel\">\n";
      for (const auto& g : obs.filter_groups) {
        html << "  <div class=\"filter-group\"><h3 class=\"filter-group-name\">" << HtmlEscape(g.name)
             << "</h3>\n  <ul>\n";
        for (const auto& o : g.options) {
          ShopState toggled = state;
          std::pair key{g.name, o.value};
          if (!toggled.active_filters.erase(key)) toggled.active_filters.insert(key);
          html << "    <li class=\"filter-option\" data-selected=\"" << (o.selected ? "true" : "false")
               << "\"><a class=\"filter-link\" href=\"" << prefix << "/search"
               << HtmlEscape(BuildQuery(StateParams(toggled, true))) << "\"><span class=\"filter-value\">"
               << HtmlEscape(o.value) << "</span></a></li>\n";
        }
        html << "  </ul></div>\n";
      }
      html << "</div>\n<div id=\"search-results\">\n";
      const auto visible = VisibleResults(state, catalog);
      for (const auto& id : visible) {
        const Product* p = catalog.Find(id);
        ShopState at = state;
        html << "  <div class=\"s-result-item\" data-id=\"" << HtmlEscape(p->id) << "\">\n"
             << "    <h2 class=\"product-title\"><a class=\"product-link\" href=\"" << prefix << "/product/"
             << UrlEncode(p->id) << HtmlEscape(BuildQuery(StateParams(at, false))) << "\">"
             << HtmlEscape(p->title) << "</a></h2>\n"
             << "    <span class=\"price\">" << FormatPrice(p->price) << "</span>\n"
             << "    <span class=\"rating\">" << FormatFixed(p->rating, 1) << " out of 5 stars</span>\n"
             << "    <span class=\"review-count\">" << WithCommas(p->review_count) << "</span>\n"
             << "  </div>\n";
      }
      html << "</div>\n";
      break;
    }
    case PageType::kProductDetail: {
      const Product* p = catalog.Find(*state.viewing);
      html << "<div id=\"product-detail\">\n"
           << "  <h1 id=\"product-title\">" << HtmlEscape(p->title) << "</h1>\n"
           << "  <div id=\"detail-brand\">" << HtmlEscape(p->brand) << "</div>\n"
           << "  <div id=\"detail-department\">" << HtmlEscape(p->department) << "</div>\n"
           << "  <span id=\"detail-price\">" << FormatPrice(p->price) << "</span>\n"
           << "  <span id=\"detail-rating\">" << FormatFixed(p->rating, 1) << " out of 5 stars</span>\n"
           << "  <span id=\"detail-reviews\">" << WithCommas(p->review_count) << " ratings</span>\n"
           << "  <a id=\"buy-now\" class=\"buy-button\" href=\"" << prefix << "/buy/" << UrlEncode(p->id)
           << HtmlEscape(BuildQuery(StateParams(state, false))) << "\">Buy Now</a>\n"
           << "</div>\n";
      break;
    }
    case PageType::kPurchaseConfirmation:
      html << "<div id=\"order-confirmation\"><h1>Thank you for your order</h1></div>\n";
      break;
  }
  html << "<footer><a href=\"https://example.com/careers\">Careers</a></footer>\n</body>\n</html>\n";
  return html.str();
}

ShopRouter::ShopRouter(std::shared_ptr<const Catalog> catalog, VariantConfig variant, std::string prefix)
    : catalog_(std::move(catalog)), variant_(std::move(variant)), prefix_(std::move(prefix)) {
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::optional<std::string> ShopRouter::Render(std::string_view path_and_query) const {
  auto qpos = path_and_query.find('?');
  std::string_view path = path_and_query.substr(0, qpos);
  Params params = qpos == std::string_view::npos ? Params{} : ParseQuery(path_and_query.substr(qpos + 1));
  if (!path.starts_with(prefix_)) return std::nullopt;
  path.remove_prefix(prefix_.size());
  if (path.empty()) path = "/";

  ShopState state;
  int cart = 0;
  std::vector<std::pair<std::string, std::string>> filters;
  for (const auto& [k, v] : params) {
    if (k == "q" && !Trim(v).empty()) state.query = v;
    if (k == "cart") {
      try {
        cart = std::max(0, std::stoi(v));
      } catch (const std::exception&) {
        cart = 0;
      }
    }
    if (k == "f") {
      auto colon = v.find(':');
      if (colon != std::string::npos) filters.emplace_back(v.substr(0, colon), v.substr(colon + 1));
    }
  }
  state.purchases.assign(static_cast<std::size_t>(cart), {"", 0.0});

  auto run_search = [&] {
    auto ranked = SearchRank(*catalog_, *state.query);
    for (const Product* p : ranked) state.results.push_back(p->id);
    state.panel = BuildFilterGroups(ranked, variant_, *state.query);
  };

  if (path == "/") {
    state.page = PageType::kHome;
  } else if (path == "/search") {
    if (!state.query) return std::nullopt;
    state.page = PageType::kSearchResults;
    run_search();
    for (auto& f : filters) state.active_filters.insert(std::move(f));
  } else if (path.starts_with("/product/") || path.starts_with("/buy/")) {
    const bool buy = path.starts_with("/buy/");
    const std::string id = UrlDecode(path.substr(buy ? 5 : 9));
    const Product* p = catalog_->Find(id);
    if (p == nullptr) return std::nullopt;
    state.viewing = id;
    if (buy) {
      state.purchases.emplace_back(id, p->price);
      state.page = PageType::kPurchaseConfirmation;
    } else {
      state.page = PageType::kProductDetail;
    }
  } else {
    return std::nullopt;
  }
  return RenderShopHtml(state, *catalog_, prefix_);
}

}  // namespace agentab
