#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <regex>

#include "agentab/mock_shop.hpp"
#include "agentab/webdriver_env.hpp"
#include "paths.hpp"

using namespace agentab;
using agentab::testing::DataDir;

namespace {

std::shared_ptr<const Catalog> Bundled() {
  static auto c = std::make_shared<const Catalog>(Catalog::Load(DataDir() / "catalog.json"));
  return c;
}

// Exhaustive reference: regex tokens, every product scored, full sort.
std::vector<std::string> OracleRank(const Catalog& c, const std::string& query) {
  auto tokens = [](const std::string& text) {
    std::set<std::string> out;
    static const std::regex word("[A-Za-z0-9]+");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), word); it != std::sregex_iterator(); ++it) {
      std::string t = it->str();
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (!IsStopword(t)) out.insert(t);
    }
    return out;
  };
  const auto q = tokens(query);
  struct Row {
    double score;
    double rating;
    std::string id;
  };
  std::vector<Row> rows;
  for (const auto& p : c.products()) {
    std::string text = p.title;
    for (const auto& [k, v] : p.attributes) text += " " + v;
    const auto t = tokens(text);
    int hit = 0;
    for (const auto& w : q) hit += t.count(w) ? 1 : 0;
    if (hit > 0) rows.push_back({static_cast<double>(hit) / q.size(), p.rating, p.id});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(b.score, b.rating, a.id) < std::tie(a.score, a.rating, b.id);
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size() && i < 10; ++i) ids.push_back(rows[i].id);
  return ids;
}

std::vector<std::string> Ids(const std::vector<const Product*>& ps) {
  std::vector<std::string> out;
  for (const auto* p : ps) out.push_back(p->id);
  return out;
}

std::set<std::pair<std::string, std::string>> Options(const std::vector<FilterGroup>& groups) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& g : groups) {
    for (const auto& o : g.options) out.emplace(g.name, o.value);
  }
  return out;
}

Catalog Tiny() {
  return Catalog({{"B", "Red Widget", "Acme", 10.0, 4.0, 5, "Tools", {}},
                  {"A", "Red Widget", "Acme", 30.0, 4.0, 5, "Tools", {}},
                  {"C", "Blue Widget Deluxe", "Zeta", 60.0, 4.8, 9, "Tools", {{"color", "red"}}}},
                 {"Tools"});
}

}  // namespace

TEST_CASE("catalog validation") {
  CHECK(Bundled()->products().size() == 50);
  CHECK(Bundled()->departments().size() == 5);
  CHECK_THROWS_AS(Catalog({{"A", "x", "b", 1.0, 4.0, 1, "D", {}}, {"A", "y", "b", 1.0, 4.0, 1, "D", {}}}, {"D"}),
                  ValidationError);
  CHECK_THROWS_AS(Catalog({{"A", "x", "b", 0.0, 4.0, 1, "D", {}}}, {"D"}), ValidationError);
  CHECK_THROWS_AS(Catalog({{"A", "x", "b", 1.0, 4.0, 1, "E", {}}}, {"D"}), ValidationError);
  const Catalog round = Catalog::FromJson(Bundled()->ToJson());
  CHECK(round.products() == Bundled()->products());
}

TEST_CASE("search ranking matches the exhaustive reference") {
  for (const std::string q : {"solar filter for telescope", "eclipse glasses", "bluetooth speaker waterproof",
                              "ND filter 77mm", "eyepiece", "nothing-matches-zzz", "Glass Film"}) {
    CAPTURE(q);
    CHECK(Ids(SearchRank(*Bundled(), q)) == OracleRank(*Bundled(), q));
  }
  CHECK(SearchRank(*Bundled(), "solar filter for telescope").size() == kMaxResults);
  CHECK(SearchRank(*Bundled(), "the of and").empty());
}

TEST_CASE("search tie-breaks and attribute tokens") {
  const Catalog c = Tiny();
  // C scores 1.0 through its color attribute and out-rates the others; A and B tie, A first.
  CHECK(Ids(SearchRank(c, "red widget")) == std::vector<std::string>{"C", "A", "B"});
  CHECK(Ids(SearchRank(c, "blue widget deluxe")).front() == "C");
}

TEST_CASE("full panel is the union over results") {
  const auto ranked = SearchRank(*Bundled(), "solar filter for telescope");
  const auto groups = BuildFilterGroups(ranked, VariantConfig::Full(), "solar filter for telescope");
  std::set<std::string> brands, depts;
  for (const auto* p : ranked) {
    brands.insert(p->brand);
    depts.insert(p->department);
  }
  for (const auto& g : groups) {
    std::set<std::string> values;
    for (const auto& o : g.options) values.insert(o.value);
    if (g.name == "Brand") CHECK(values == brands);
    if (g.name == "Department") CHECK(values == depts);
    if (g.name == "Price" || g.name == "Rating") {
      for (const auto& v : values) {
        CHECK(std::any_of(ranked.begin(), ranked.end(), [&](const Product* p) { return ProductMatchesOption(*p, g.name, v); }));
      }
    }
  }
}

TEST_CASE("price and rating buckets") {
  Product p{"X", "t", "b", 25.0, 4.0, 0, "D", {}};
  CHECK(ProductMatchesOption(p, "Price", "$25 to $50"));
  CHECK_FALSE(ProductMatchesOption(p, "Price", "Under $25"));
  p.price = 24.99;
  CHECK(ProductMatchesOption(p, "Price", "Under $25"));
  p.price = 100.0;
  CHECK(ProductMatchesOption(p, "Price", "$100 & Above"));
  CHECK(ProductMatchesOption(p, "Rating", "4 Stars & Up"));
  CHECK(ProductMatchesOption(p, "Rating", "3 Stars & Up"));
  p.rating = 3.9;
  CHECK_FALSE(ProductMatchesOption(p, "Rating", "4 Stars & Up"));
  CHECK_FALSE(ProductMatchesOption(p, "Color", "Red"));
}

TEST_CASE("reduced panel pruning") {
  const std::string q = "solar filter for telescope";
  TokenOverlapScorer s;
  CHECK(s.Score("Safety Goggles & Glasses", q) == doctest::Approx(0.0));
  CHECK(s.Score("Solar Telescope Filter", q) == doctest::Approx(1.0));
  CHECK(s.Score("Telescope Eyepieces", q) == doctest::Approx(0.5));
  CHECK(s.Score("&", q) == 0.0);

  const auto ranked = SearchRank(*Bundled(), q);
  const auto full = Options(BuildFilterGroups(ranked, VariantConfig::Full(), q));
  const auto reduced = Options(BuildFilterGroups(ranked, VariantConfig::Reduced(0.8), q));
  CHECK(full.contains({"Department", "Safety Goggles & Glasses"}));
  CHECK_FALSE(reduced.contains({"Department", "Safety Goggles & Glasses"}));
  CHECK(reduced.contains({"Department", "Solar Telescope Filter"}));
  CHECK(std::includes(full.begin(), full.end(), reduced.begin(), reduced.end()));
  CHECK(reduced.size() < full.size());
  for (const auto& g : BuildFilterGroups(ranked, VariantConfig::Reduced(0.8), q)) CHECK_FALSE(g.options.empty());
  CHECK(BuildFilterGroups(ranked, VariantConfig::Reduced(0.0), q) == BuildFilterGroups(ranked, VariantConfig::Full(), q));
  CHECK_THROWS_AS(MakeScorer("cosine"), ValidationError);
  CHECK_THROWS_AS(VariantConfig::FromJson(Json{{"filter_mode", "reduced"}, {"threshold", 1.5}}), ValidationError);
  CHECK(VariantConfig::FromJson(VariantConfig::Reduced(0.8).ToJson()).threshold == 0.8);
}

TEST_CASE("session walk: search, filter toggle, click, purchase, stop") {
  MockShopSession s(Bundled(), VariantConfig::Full());
  Observation o = s.Observe();
  CHECK(o.page_type == PageType::kHome);
  CHECK(o.cart_count == 0);
  CHECK_THROWS_AS(s.Execute(action::Purchase{}), OutOfSpaceError);

  s.Execute(action::Search{"solar filter for telescope"});
  o = s.Observe();
  CHECK(o.page_type == PageType::kSearchResults);
  CHECK(o.products.size() == 10);
  ValidateObservation(o);
  const auto before = o;

  const auto& brand = o.filter_groups.front();
  REQUIRE(brand.name == "Brand");
  const action::ClickFilter f{"Brand", brand.options.front().value};
  s.Execute(f);
  o = s.Observe();
  for (const auto& p : o.products) {
    const auto it = std::find_if(Bundled()->products().begin(), Bundled()->products().end(),
                                 [&](const Product& x) { return x.title == p.title; });
    CHECK(it->brand == f.value);
  }
  CHECK(o.filter_groups.front().options.front().selected);
  s.Execute(f);
  CHECK(s.Observe() == before);

  s.Execute(action::ClickProduct{2});
  o = s.Observe();
  CHECK(o.page_type == PageType::kProductDetail);
  REQUIRE(o.detail);
  CHECK(o.detail->title == before.products[1].title);
  const double price = o.detail->price;
  s.Execute(action::Purchase{});
  CHECK(s.Observe().page_type == PageType::kPurchaseConfirmation);
  CHECK(s.Observe().cart_count == 1);
  CHECK(s.state().Spend() == price);
  s.Execute(action::Stop{});
  CHECK(s.state().terminated);
  CHECK_THROWS_AS(s.Execute(action::Search{"x"}), ValidationError);
}

TEST_CASE("filters narrowing to nothing leave an empty results page") {
  const Catalog c = Tiny();
  ShopState st;
  st = Transition(st, action::Search{"widget"}, c, VariantConfig::Full());
  st = Transition(st, action::ClickFilter{"Brand", "Zeta"}, c, VariantConfig::Full());
  st = Transition(st, action::ClickFilter{"Price", "Under $25"}, c, VariantConfig::Full());
  const auto obs = ObserveShop(st, c);
  CHECK(obs.products.empty());
  CHECK(ComputeActionSpace(obs).product_indices.empty());
  CHECK_THROWS_AS(Transition(st, action::ClickProduct{1}, c, VariantConfig::Full()), OutOfSpaceError);
  // Disjunctive within a group.
  st = Transition(st, action::ClickFilter{"Brand", "Acme"}, c, VariantConfig::Full());
  CHECK(VisibleResults(st, c) == std::vector<std::string>{"B"});
}

TEST_CASE("purchase accounting on a literal price") {
  Catalog c({{"Z", "Trail Speaker", "Tembo", 60.99, 4.1, 10, "D", {}}}, {"D"});
  ShopState st;
  st = Transition(st, action::Search{"speaker"}, c, VariantConfig::Full());
  st = Transition(st, action::ClickProduct{1}, c, VariantConfig::Full());
  const auto next = Transition(st, action::Purchase{}, c, VariantConfig::Full());
  CHECK(next.purchases.size() == st.purchases.size() + 1);
  CHECK(next.Spend() == 60.99);
}

TEST_CASE("rendered HTML extracts back to the observed state") {
  const auto rules = ExtractionRuleset::Load(DataDir() / "rulesets" / "mockshop.json");
  MockShopSession s(Bundled(), VariantConfig::Reduced(0.8));
  auto check = [&] { CHECK(Extract(RenderShopHtml(s.state(), *Bundled(), ""), rules) == s.Observe()); };
  check();
  s.Execute(action::Search{"solar filter for telescope"});
  check();
  s.Execute(action::ClickFilter{"Department", "Solar Telescope Filter"});
  check();
  s.Execute(action::ClickProduct{1});
  check();
  s.Execute(action::Purchase{});
  check();
  s.Execute(action::Search{"zzzz"});
  check();
}

TEST_CASE("router serves the rendered states") {
  ShopRouter router(Bundled(), VariantConfig::Full(), "/shop/");
  CHECK(router.prefix() == "/shop");
  CHECK(router.Render("/shop/"));
  CHECK(router.Render("/shop/search?q=solar+filter&f=Brand:Lumora&cart=1")->find("cart-count\">1<") != std::string::npos);
  CHECK(router.Render("/shop/product/P001?q=solar&cart=0"));
  CHECK(router.Render("/shop/buy/P001?cart=2")->find("order-confirmation") != std::string::npos);
  CHECK_FALSE(router.Render("/shop/product/P999"));
  CHECK_FALSE(router.Render("/elsewhere"));
  CHECK_FALSE(router.Render("/shop/search"));
  CHECK(UrlDecode(UrlEncode("a b&c=d/é")) == "a b&c=d/é");
  CHECK(HtmlEscape("<a href=\"x\">&'") == "&lt;a href=&quot;x&quot;&gt;&amp;&#39;");
}
