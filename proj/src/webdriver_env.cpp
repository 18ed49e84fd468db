#include "agentab/webdriver_env.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <thread>

namespace agentab {

namespace {

constexpr std::string_view kElementKey = "element-6066-11e4-a52e-4f735466cecf";

PostProcess PostFromString(std::string_view s) {
  if (s == "trim") return PostProcess::kTrim;
  if (s == "parse-price") return PostProcess::kParsePrice;
  if (s == "parse-rating") return PostProcess::kParseRating;
  if (s == "parse-int") return PostProcess::kParseInt;
  if (s == "exists") return PostProcess::kExists;
  throw ValidationError("unknown post-processing step: " + std::string(s));
}

const std::vector<std::string_view>& RequiredRoles(PageType type) {
  static const std::vector<std::string_view> kResults = {
      role::kProductCard,      role::kProductTitle,    role::kProductPrice,          role::kProductRating,
      role::kProductReviews,   role::kProductLink,     role::kFilterGroup,           role::kFilterGroupName,
      role::kFilterOption,     role::kFilterOptionValue, role::kFilterOptionSelected};
  static const std::vector<std::string_view> kDetail = {role::kDetailTitle,   role::kDetailBrand,
                                                        role::kDetailPrice,   role::kDetailRating,
                                                        role::kDetailReviews, role::kDetailDepartment,
                                                        role::kBuyButton};
  static const std::vector<std::string_view> kNone = {};
  switch (type) {
    case PageType::kSearchResults: return kResults;
    case PageType::kProductDetail: return kDetail;
    default: return kNone;
  }
}

using Layout = ExtractionLayout;
using Parsed = ParsedPage;

std::optional<std::string> RawValue(const html::Node& el, const FieldRule& rule) {
  if (rule.attribute == "text") return el.TextContent();
  const std::string* v = el.Attr(rule.attribute);
  if (v == nullptr) return std::nullopt;
  return Trim(*v);
}

class FieldReader {
 public:
  explicit FieldReader(const ExtractionRuleset& rules) : rules_(rules) {}

  std::optional<std::string> Text(const html::Node& scope, std::string_view role) const {
    const FieldRule* rule = rules_.Rule(role);
    if (rule == nullptr) return std::nullopt;
    const html::Node* el = rules_.CompiledSelector(role).QueryFirst(scope);
    if (el == nullptr) return std::nullopt;
    auto v = RawValue(*el, *rule);
    if (v) *v = Trim(*v);
    return v;
  }

  std::optional<double> Number(const html::Node& scope, std::string_view role) const {
    auto text = Text(scope, role);
    if (!text) return std::nullopt;
    try {
      switch (rules_.Require(role).post) {
        case PostProcess::kParsePrice: return ParsePrice(*text);
        case PostProcess::kParseRating: return ParseRating(*text);
        case PostProcess::kParseInt: return ParseInt(*text);
        default: return std::stod(*text);
      }
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  bool Exists(const html::Node& scope, std::string_view role) const {
    if (rules_.Rule(role) == nullptr) return false;
    const auto& sel = rules_.CompiledSelector(role);
    return (scope.IsElement() && sel.Matches(scope)) || sel.QueryFirst(scope) != nullptr;
  }

  std::vector<const html::Node*> All(const html::Node& scope, std::string_view role) const {
    if (rules_.Rule(role) == nullptr) return {};
    return rules_.CompiledSelector(role).QueryAll(scope);
  }

 private:
  const ExtractionRuleset& rules_;
};

Parsed ExtractParsed(const html::Document& doc, std::string_view source, const ExtractionRuleset& rules) {
  const html::Node& root = doc.root();
  std::optional<PageType> type;
  for (std::size_t i = 0; i < rules.detectors().size(); ++i) {
    if (rules.DetectorSelector(i).QueryFirst(root) != nullptr) {
      type = rules.detectors()[i].page_type;
      break;
    }
  }
  if (!type) throw UnclassifiablePageError(PageSignature(doc, source));

  FieldReader read(rules);
  Parsed out;
  Observation& obs = out.obs;
  obs.page_type = *type;
  if (auto q = read.Text(root, role::kQuery); q && !q->empty()) obs.query = *q;
  obs.cart_count = static_cast<int>(read.Number(root, role::kCartCount).value_or(0));
  for (const html::Node* n : read.All(root, role::kNotice)) {
    std::string t = n->TextContent();
    if (!t.empty()) obs.notices.push_back(std::move(t));
  }

  if (*type == PageType::kSearchResults) {
    auto cards = read.All(root, role::kProductCard);
    for (std::size_t ci = 0; ci < cards.size(); ++ci) {
      auto title = read.Text(*cards[ci], role::kProductTitle);
      auto price = read.Number(*cards[ci], role::kProductPrice);
      if (!title || title->empty() || !price) continue;
      ProductSummary p;
      p.index = static_cast<int>(obs.products.size()) + 1;
      p.title = *title;
      p.price = *price;
      p.rating = std::clamp(read.Number(*cards[ci], role::kProductRating).value_or(0.0), 0.0, 5.0);
      p.review_count = static_cast<int>(read.Number(*cards[ci], role::kProductReviews).value_or(0));
      obs.products.push_back(std::move(p));
      out.layout.card_ordinal.push_back(ci);
    }
    auto groups = read.All(root, role::kFilterGroup);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      auto name = read.Text(*groups[gi], role::kFilterGroupName);
      if (!name || name->empty()) continue;
      FilterGroup g{*name, {}};
      std::vector<std::size_t> ordinals;
      auto options = read.All(*groups[gi], role::kFilterOption);
      for (std::size_t oi = 0; oi < options.size(); ++oi) {
        auto value = read.Text(*options[oi], role::kFilterOptionValue);
        if (!value || value->empty()) continue;
        bool dup = std::any_of(g.options.begin(), g.options.end(), [&](const FilterOption& o) { return o.value == *value; });
        if (dup) continue;
        g.options.push_back({*value, read.Exists(*options[oi], role::kFilterOptionSelected)});
        ordinals.push_back(oi);
      }
      if (g.options.empty()) continue;
      obs.filter_groups.push_back(std::move(g));
      out.layout.group_ordinal.push_back(gi);
      out.layout.option_ordinal.push_back(std::move(ordinals));
    }
  } else if (*type == PageType::kProductDetail) {
    ProductDetail d;
    d.title = read.Text(root, role::kDetailTitle).value_or("");
    d.brand = read.Text(root, role::kDetailBrand).value_or("");
    d.price = read.Number(root, role::kDetailPrice).value_or(0.0);
    d.rating = std::clamp(read.Number(root, role::kDetailRating).value_or(0.0), 0.0, 5.0);
    d.review_count = static_cast<int>(read.Number(root, role::kDetailReviews).value_or(0));
    d.department = read.Text(root, role::kDetailDepartment).value_or("");
    obs.detail = std::move(d);
  } else if (*type == PageType::kHome) {
    obs.query.reset();
  }
  return out;
}

Json ElementJson(const ElementRef& el) { return Json{{std::string(kElementKey), el.id}}; }

WebDriverError NoSuchElement(std::string what) {
  return WebDriverError("no such element", std::move(what), 404);
}

// Maps a target in `old_obs` to the equivalent action in `fresh`, matching by
// product title or by filter (group, value).
std::optional<Action> Reresolve(const Action& a, const Observation& old_obs, const Observation& fresh) {
  if (const auto* c = std::get_if<action::ClickProduct>(&a)) {
    if (c->index < 1 || static_cast<std::size_t>(c->index) > old_obs.products.size()) return std::nullopt;
    const std::string& title = old_obs.products[static_cast<std::size_t>(c->index - 1)].title;
    for (const auto& p : fresh.products) {
      if (p.title == title) return action::ClickProduct{p.index};
    }
    return std::nullopt;
  }
  if (fresh.page_type != old_obs.page_type) return std::nullopt;
  if (!ComputeActionSpace(fresh).Allows(a)) return std::nullopt;
  return a;
}

}  // namespace

double ParsePrice(std::string_view text) {
  auto n = FirstNumber(text);
  if (!n) throw ValidationError("no price in '" + std::string(text) + "'");
  return *n;
}

double ParseRating(std::string_view text) {
  auto n = FirstNumber(text);
  if (!n) throw ValidationError("no rating in '" + std::string(text) + "'");
  return *n;
}

int ParseInt(std::string_view text) {
  auto n = FirstNumber(text);
  if (!n) throw ValidationError("no integer in '" + std::string(text) + "'");
  return static_cast<int>(*n);
}

ExtractionRuleset::ExtractionRuleset(std::string name, std::vector<PageDetector> detectors,
                                     std::map<std::string, FieldRule, std::less<>> rules)
    : name_(std::move(name)), detectors_(std::move(detectors)), rules_(std::move(rules)) {
  if (detectors_.empty()) throw ValidationError("ruleset " + name_ + ": no page detectors");
  for (const auto& d : detectors_) {
    try {
      detector_selectors_.push_back(html::Selector::Parse(d.selector));
    } catch (const std::invalid_argument& e) {
      throw ValidationError("ruleset " + name_ + ": " + e.what());
    }
  }
  for (const auto& [role, rule] : rules_) {
    try {
      compiled_.emplace(role, html::Selector::Parse(rule.selector));
    } catch (const std::invalid_argument& e) {
      throw ValidationError("ruleset " + name_ + " role " + role + ": " + e.what());
    }
  }
  for (const auto& d : detectors_) {
    for (std::string_view r : RequiredRoles(d.page_type)) {
      if (!rules_.contains(r)) {
        throw ValidationError("ruleset " + name_ + ": page type " + std::string(ToString(d.page_type)) +
                              " needs a rule for " + std::string(r));
      }
    }
  }
  for (std::string_view r : {role::kQuery, role::kCartCount, role::kNotice, role::kSearchBox, role::kSearchSubmit}) {
    if (!rules_.contains(r)) throw ValidationError("ruleset " + name_ + ": missing rule for " + std::string(r));
  }
}

ExtractionRuleset ExtractionRuleset::FromJson(const Json& j) {
  std::vector<PageDetector> detectors;
  for (const auto& d : j.at("page_detectors")) {
    detectors.push_back({d.at("selector").get<std::string>(), PageTypeFromString(d.at("page_type").get<std::string>())});
  }
  std::map<std::string, FieldRule, std::less<>> rules;
  for (const auto& [role, r] : j.at("field_rules").items()) {
    FieldRule rule;
    rule.selector = r.at("selector").get<std::string>();
    rule.attribute = r.value("attribute", std::string("text"));
    rule.post = PostFromString(r.value("post", std::string("trim")));
    rules.emplace(role, std::move(rule));
  }
  return ExtractionRuleset(j.value("name", std::string("unnamed")), std::move(detectors), std::move(rules));
}

ExtractionRuleset ExtractionRuleset::Load(const std::filesystem::path& path) { return FromJson(ReadJsonFile(path)); }

const FieldRule* ExtractionRuleset::Rule(std::string_view role) const {
  auto it = rules_.find(role);
  return it == rules_.end() ? nullptr : &it->second;
}

const FieldRule& ExtractionRuleset::Require(std::string_view role) const {
  const FieldRule* r = Rule(role);
  if (r == nullptr) throw ValidationError("ruleset " + name_ + ": no rule for " + std::string(role));
  return *r;
}

const html::Selector& ExtractionRuleset::CompiledSelector(std::string_view role) const {
  auto it = compiled_.find(role);
  if (it == compiled_.end()) throw ValidationError("ruleset " + name_ + ": no rule for " + std::string(role));
  return it->second;
}

std::string PageSignature(const html::Document& doc, std::string_view source) {
  std::string title = doc.Title();
  std::string text = doc.root().TextContent();
  if (text.size() > 80) text = text.substr(0, 80) + "...";
  return "title='" + title + "' text='" + text + "' sha256=" + Sha256Hex(source).substr(0, 12);
}

Observation Extract(const html::Document& doc, std::string_view source, const ExtractionRuleset& rules) {
  return ExtractParsed(doc, source, rules).obs;
}

ParsedPage ExtractPage(std::string_view html_source, const ExtractionRuleset& rules) {
  return ExtractParsed(html::Document::Parse(html_source), html_source, rules);
}

Observation Extract(std::string_view html_source, const ExtractionRuleset& rules) {
  return Extract(html::Document::Parse(html_source), html_source, rules);
}

bool IsRecoverableDriverError(const WebDriverError& e) {
  return e.code() == "no such element" || e.code() == "element click intercepted" ||
         e.code() == "stale element reference" || e.code() == "element not interactable";
}

WebDriverClient::WebDriverClient(Options options) : options_(std::move(options)) {
  while (!options_.endpoint.empty() && options_.endpoint.back() == '/') options_.endpoint.pop_back();
}

WebDriverClient::~WebDriverClient() {
  try {
    DeleteSession();
  } catch (const std::exception&) {
  }
}

Json WebDriverClient::Call(std::string_view method, const std::string& path, const Json* body) {
  httplib::Client cli(options_.endpoint);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Result res;
  const std::string payload = body ? body->dump() : std::string();
  if (method == "GET") {
    res = cli.Get(path);
  } else if (method == "DELETE") {
    res = cli.Delete(path);
  } else {
    res = cli.Post(path, payload, "application/json");
  }
  if (!res) {
    throw TransportError("webdriver endpoint unreachable: " + options_.endpoint + path + " (" +
                         httplib::to_string(res.error()) + ")");
  }
  Json reply;
  try {
    reply = res->body.empty() ? Json::object() : Json::parse(res->body);
  } catch (const Json::parse_error&) {
    throw TransportError("webdriver: malformed response from " + options_.endpoint + path);
  }
  if (res->status < 200 || res->status >= 300) {
    const Json& v = reply.contains("value") ? reply["value"] : reply;
    std::string code = v.is_object() ? v.value("error", std::string("unknown error")) : "unknown error";
    std::string msg = v.is_object() ? v.value("message", std::string()) : std::string();
    throw WebDriverError(code, msg, res->status);
  }
  return reply.contains("value") ? reply["value"] : Json();
}

std::string WebDriverClient::NewSession() {
  Json args = Json::array();
  if (options_.headless) args = {"--headless=new", "--no-sandbox", "--disable-gpu"};
  Json caps = {{"capabilities",
                {{"alwaysMatch", {{"browserName", options_.browser_name}, {"goog:chromeOptions", {{"args", args}}}}}}}};
  Json v = Call("POST", "/session", &caps);
  if (!v.is_object() || !v.contains("sessionId")) throw TransportError("webdriver: New Session reply has no sessionId");
  session_id_ = v["sessionId"].get<std::string>();
  return session_id_;
}

void WebDriverClient::DeleteSession() {
  if (session_id_.empty()) return;
  std::string id = std::exchange(session_id_, {});
  Call("DELETE", "/session/" + id, nullptr);
}

void WebDriverClient::NavigateTo(std::string_view url) {
  Json body = {{"url", url}};
  Call("POST", "/session/" + session_id_ + "/url", &body);
}

std::string WebDriverClient::PageSource() {
  Json v = Call("GET", "/session/" + session_id_ + "/source", nullptr);
  if (!v.is_string()) throw TransportError("webdriver: page source is not a string");
  return v.get<std::string>();
}

namespace {

std::vector<ElementRef> ElementsFrom(const Json& v) {
  std::vector<ElementRef> out;
  if (!v.is_array()) return out;
  for (const auto& e : v) {
    if (e.is_object() && e.contains(kElementKey)) out.push_back({e[std::string(kElementKey)].get<std::string>()});
  }
  return out;
}

}  // namespace

std::vector<ElementRef> WebDriverClient::FindElements(std::string_view css) {
  Json body = {{"using", "css selector"}, {"value", css}};
  return ElementsFrom(Call("POST", "/session/" + session_id_ + "/elements", &body));
}

std::vector<ElementRef> WebDriverClient::FindElementsFrom(const ElementRef& parent, std::string_view css) {
  Json body = {{"using", "css selector"}, {"value", css}};
  return ElementsFrom(Call("POST", "/session/" + session_id_ + "/element/" + parent.id + "/elements", &body));
}

ElementRef WebDriverClient::FindElement(std::string_view css) {
  Json body = {{"using", "css selector"}, {"value", css}};
  Json v = Call("POST", "/session/" + session_id_ + "/element", &body);
  if (!v.is_object() || !v.contains(kElementKey)) throw NoSuchElement(std::string(css));
  return {v[std::string(kElementKey)].get<std::string>()};
}

void WebDriverClient::Click(const ElementRef& el) {
  Json body = Json::object();
  Call("POST", "/session/" + session_id_ + "/element/" + el.id + "/click", &body);
}

void WebDriverClient::Clear(const ElementRef& el) {
  Json body = Json::object();
  Call("POST", "/session/" + session_id_ + "/element/" + el.id + "/clear", &body);
}

void WebDriverClient::SendKeys(const ElementRef& el, std::string_view text) {
  Json body = {{"text", text}};
  Call("POST", "/session/" + session_id_ + "/element/" + el.id + "/value", &body);
}

Json WebDriverClient::ExecuteScript(std::string_view script, const Json& args) {
  Json body = {{"script", script}, {"args", args}};
  return Call("POST", "/session/" + session_id_ + "/execute/sync", &body);
}

WebDriverSession::WebDriverSession(std::shared_ptr<const ExtractionRuleset> rules, WebDriverEnvConfig config)
    : rules_(std::move(rules)), config_(std::move(config)), client_(config_.driver) {}

WebDriverSession::~WebDriverSession() {
  try {
    Close();
  } catch (const std::exception&) {
  }
}

void WebDriverSession::Open() {
  client_.NewSession();
  client_.NavigateTo(config_.start_url);
  Settle();
}

void WebDriverSession::Close() { client_.DeleteSession(); }

std::string WebDriverSession::Snapshot() {
  if (!client_.has_session()) throw TransportError("webdriver: session closed");
  return client_.PageSource();
}

const ParsedPage& WebDriverSession::Current() {
  if (!last_) last_ = ExtractPage(Snapshot(), *rules_);
  return *last_;
}

Observation WebDriverSession::Observe() { return Current().obs; }

void WebDriverSession::Settle() {
  const auto deadline = std::chrono::steady_clock::now() + config_.settle_timeout;
  while (true) {
    bool ready = false;
    try {
      Json state = client_.ExecuteScript("return document.readyState;");
      if (state.is_string() && state.get<std::string>() == "complete") {
        for (const auto& d : rules_->detectors()) {
          if (!client_.FindElements(d.selector).empty()) {
            ready = true;
            break;
          }
        }
      }
    } catch (const WebDriverError&) {
    }
    if (ready || std::chrono::steady_clock::now() >= deadline) return;
    std::this_thread::sleep_for(config_.settle_poll);
  }
}

ElementRef WebDriverSession::Resolve(const Action& a, const ParsedPage& page) {
  if (const auto* c = std::get_if<action::ClickProduct>(&a)) {
    const auto idx = static_cast<std::size_t>(c->index - 1);
    if (idx >= page.layout.card_ordinal.size()) throw NoSuchElement("product card " + std::to_string(c->index));
    auto cards = client_.FindElements(rules_->Require(role::kProductCard).selector);
    const std::size_t ordinal = page.layout.card_ordinal[idx];
    if (ordinal >= cards.size()) throw NoSuchElement("product card " + std::to_string(c->index));
    auto links = client_.FindElementsFrom(cards[ordinal], rules_->Require(role::kProductLink).selector);
    if (links.empty()) throw NoSuchElement("product link " + std::to_string(c->index));
    return links.front();
  }
  if (const auto* f = std::get_if<action::ClickFilter>(&a)) {
    for (std::size_t gi = 0; gi < page.obs.filter_groups.size(); ++gi) {
      const auto& g = page.obs.filter_groups[gi];
      if (g.name != f->group) continue;
      for (std::size_t oi = 0; oi < g.options.size(); ++oi) {
        if (g.options[oi].value != f->value) continue;
        auto groups = client_.FindElements(rules_->Require(role::kFilterGroup).selector);
        const std::size_t go = page.layout.group_ordinal[gi];
        if (go >= groups.size()) throw NoSuchElement("filter group " + f->group);
        auto options = client_.FindElementsFrom(groups[go], rules_->Require(role::kFilterOption).selector);
        const std::size_t oo = page.layout.option_ordinal[gi][oi];
        if (oo >= options.size()) throw NoSuchElement("filter option " + f->value);
        if (const FieldRule* link = rules_->Rule(role::kFilterOptionLink)) {
          auto links = client_.FindElementsFrom(options[oo], link->selector);
          if (!links.empty()) return links.front();
        }
        return options[oo];
      }
    }
    throw NoSuchElement("filter option " + f->group + ": " + f->value);
  }
  if (std::holds_alternative<action::Purchase>(a)) return client_.FindElement(rules_->Require(role::kBuyButton).selector);
  return client_.FindElement(rules_->Require(role::kSearchSubmit).selector);
}

void WebDriverSession::Attempt(const Action& a, const ParsedPage& page, bool scroll_first) {
  auto scroll = [&](const ElementRef& el) {
    client_.ExecuteScript("arguments[0].scrollIntoView({block: 'center'});", Json::array({ElementJson(el)}));
  };
  if (const auto* s = std::get_if<action::Search>(&a)) {
    ElementRef box = client_.FindElement(rules_->Require(role::kSearchBox).selector);
    if (scroll_first) scroll(box);
    client_.Clear(box);
    client_.SendKeys(box, s->query);
  }
  ElementRef target = Resolve(a, page);
  if (scroll_first) scroll(target);
  client_.Click(target);
}

ExecResult WebDriverSession::Execute(const Action& a) {
  if (stopped_) throw ValidationError("session stopped: no further actions");
  const ParsedPage page = Current();
  if (!ComputeActionSpace(page.obs).Allows(a)) throw OutOfSpaceError("action not in current space: " + Serialize(a));
  if (std::holds_alternative<action::Stop>(a)) {
    stopped_ = true;
    return ExecResult::Ok();
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  auto done = [&](std::optional<RecoveryStrategy> strategy) {
    last_.reset();
    Settle();
    return strategy ? ExecResult::Recovered(*strategy, elapsed()) : ExecResult::Ok(elapsed());
  };

  std::string last_error;
  // True on success, false on a recoverable protocol error; rethrows others.
  auto try_once = [&](const Action& act, const ParsedPage& against, bool scroll_first) {
    try {
      Attempt(act, against, scroll_first);
      return true;
    } catch (const WebDriverError& e) {
      if (!IsRecoverableDriverError(e)) throw;
      last_error = e.what();
      return false;
    }
  };

  try {
    if (try_once(a, page, false)) return done(std::nullopt);
    std::this_thread::sleep_for(config_.retry_delay);
    if (try_once(a, page, false)) return done(RecoveryStrategy::kRetry);
    if (try_once(a, page, true)) return done(RecoveryStrategy::kScroll);

    ParsedPage fresh = ExtractPage(Snapshot(), *rules_);
    auto target = Reresolve(a, page.obs, fresh.obs);
    if (!target) {
      last_.reset();
      return ExecResult::Failed("target not found after re-parse (" + last_error + ")", elapsed());
    }
    if (try_once(*target, fresh, true)) return done(RecoveryStrategy::kReparse);
    last_.reset();
    return ExecResult::Failed(last_error, elapsed());
  } catch (const Error& e) {
    last_.reset();
    return ExecResult::Failed(e.what(), elapsed());
  }
}

}  // namespace agentab
