#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentab/environment.hpp"
#include "agentab/html.hpp"

namespace agentab {

enum class PostProcess { kTrim, kParsePrice, kParseRating, kParseInt, kExists };

// Parsers behind the rule post-processing steps. Throw ValidationError when
// no number can be read.
double ParsePrice(std::string_view text);   // "$1,055.14" -> 1055.14
double ParseRating(std::string_view text);  // "4.5 out of 5 stars" -> 4.5
int ParseInt(std::string_view text);        // "1,234 ratings" -> 1234

struct FieldRule {
  std::string selector;
  std::string attribute = "text";  // "text" or an attribute name
  PostProcess post = PostProcess::kTrim;
};

// Field roles. "product.*" and "filter.*" rules other than the containers are
// evaluated inside each container element; "filter.option*" inside each option.
namespace role {
inline constexpr std::string_view kQuery = "page.query";
inline constexpr std::string_view kCartCount = "page.cart_count";
inline constexpr std::string_view kNotice = "page.notice";
inline constexpr std::string_view kProductCard = "product.card";
inline constexpr std::string_view kProductTitle = "product.title";
inline constexpr std::string_view kProductPrice = "product.price";
inline constexpr std::string_view kProductRating = "product.rating";
inline constexpr std::string_view kProductReviews = "product.review_count";
inline constexpr std::string_view kProductLink = "product.link";
inline constexpr std::string_view kFilterGroup = "filter.group";
inline constexpr std::string_view kFilterGroupName = "filter.group_name";
inline constexpr std::string_view kFilterOption = "filter.option";
inline constexpr std::string_view kFilterOptionValue = "filter.option_value";
inline constexpr std::string_view kFilterOptionSelected = "filter.option_selected";
inline constexpr std::string_view kFilterOptionLink = "filter.option_link";
inline constexpr std::string_view kDetailTitle = "detail.title";
inline constexpr std::string_view kDetailBrand = "detail.brand";
inline constexpr std::string_view kDetailPrice = "detail.price";
inline constexpr std::string_view kDetailRating = "detail.rating";
inline constexpr std::string_view kDetailReviews = "detail.review_count";
inline constexpr std::string_view kDetailDepartment = "detail.department";
inline constexpr std::string_view kSearchBox = "action.search_box";
inline constexpr std::string_view kSearchSubmit = "action.search_submit";
inline constexpr std::string_view kBuyButton = "action.buy_button";
}  // namespace role

struct PageDetector {
  std::string selector;
  PageType page_type;
};

class ExtractionRuleset {
 public:
  // Validates selectors and that every field each detectable page type needs
  // has a rule. Throws ValidationError.
  ExtractionRuleset(std::string name, std::vector<PageDetector> detectors,
                    std::map<std::string, FieldRule, std::less<>> rules);

  static ExtractionRuleset FromJson(const Json& j);
  static ExtractionRuleset Load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::vector<PageDetector>& detectors() const { return detectors_; }
  const FieldRule* Rule(std::string_view role) const;
  const FieldRule& Require(std::string_view role) const;
  const html::Selector& CompiledSelector(std::string_view role) const;
  const html::Selector& DetectorSelector(std::size_t i) const { return detector_selectors_.at(i); }

 private:
  std::string name_;
  std::vector<PageDetector> detectors_;
  std::map<std::string, FieldRule, std::less<>> rules_;
  std::vector<html::Selector> detector_selectors_;
  std::map<std::string, html::Selector, std::less<>> compiled_;
};

class UnclassifiablePageError : public Error {
 public:
  UnclassifiablePageError(std::string signature)
      : Error("unclassifiable page: " + signature), signature_(std::move(signature)) {}
  const std::string& signature() const { return signature_; }

 private:
  std::string signature_;
};

// Short page fingerprint: title, leading text, and a digest prefix.
std::string PageSignature(const html::Document& doc, std::string_view source);

// DOM ordinals of each extracted entry, so an executor can locate the element
// again: card_ordinal[i] is the position of products[i]'s card among all
// matches of the card selector, and likewise for groups and options.
struct ExtractionLayout {
  std::vector<std::size_t> card_ordinal;
  std::vector<std::size_t> group_ordinal;
  std::vector<std::vector<std::size_t>> option_ordinal;

  bool operator==(const ExtractionLayout&) const = default;
};

struct ParsedPage {
  Observation obs;
  ExtractionLayout layout;
};

ParsedPage ExtractPage(std::string_view html_source, const ExtractionRuleset& rules);

// Pure. The first matching detector fixes the page type; only rule-selected
// elements contribute. Throws UnclassifiablePageError.
Observation Extract(std::string_view html_source, const ExtractionRuleset& rules);
Observation Extract(const html::Document& doc, std::string_view source, const ExtractionRuleset& rules);

// A W3C WebDriver error response.
class WebDriverError : public TransportError {
 public:
  WebDriverError(std::string code, std::string message, int http_status)
      : TransportError(code + ": " + message), code_(std::move(code)), http_status_(http_status) {}
  const std::string& code() const { return code_; }
  int http_status() const { return http_status_; }

 private:
  std::string code_;
  int http_status_;
};

// Element reference as returned by Find Element(s).
struct ElementRef {
  std::string id;
};

// Thin W3C WebDriver wire-protocol client for one session. Every call carries
// the configured timeout.
class WebDriverClient {
 public:
  struct Options {
    std::string endpoint;  // e.g. http://127.0.0.1:9515
    std::chrono::milliseconds timeout{10000};
    bool headless = true;
    std::string browser_name = "chrome";
  };

  explicit WebDriverClient(Options options);
  ~WebDriverClient();
  WebDriverClient(const WebDriverClient&) = delete;
  WebDriverClient& operator=(const WebDriverClient&) = delete;

  // New Session. Throws TransportError naming the endpoint if unreachable.
  std::string NewSession();
  void DeleteSession();
  bool has_session() const { return !session_id_.empty(); }
  const std::string& session_id() const { return session_id_; }

  void NavigateTo(std::string_view url);
  std::string PageSource();
  std::vector<ElementRef> FindElements(std::string_view css);
  std::vector<ElementRef> FindElementsFrom(const ElementRef& parent, std::string_view css);
  ElementRef FindElement(std::string_view css);
  void Click(const ElementRef& el);
  void Clear(const ElementRef& el);
  void SendKeys(const ElementRef& el, std::string_view text);
  Json ExecuteScript(std::string_view script, const Json& args = Json::array());

 private:
  Json Call(std::string_view method, const std::string& path, const Json* body);

  Options options_;
  std::string session_id_;
};

struct WebDriverEnvConfig {
  WebDriverClient::Options driver;
  std::string start_url;
  std::string variant;
  std::chrono::milliseconds retry_delay{500};
  std::chrono::milliseconds settle_timeout{10000};
  std::chrono::milliseconds settle_poll{100};
};

// Live-browser EnvSession. Owns its browser session; closes it on destruction.
class WebDriverSession final : public EnvSession {
 public:
  WebDriverSession(std::shared_ptr<const ExtractionRuleset> rules, WebDriverEnvConfig config);
  ~WebDriverSession() override;

  // New Session + Navigate To start_url + settle.
  void Open();
  void Close();
  const std::string& session_id() const { return client_.session_id(); }

  std::string Snapshot();
  Observation Observe() override;
  // Recovery ladder on missing / intercepted / stale targets:
  // retry after retry_delay, then scroll into view, then re-snapshot and
  // re-resolve, then fail with the last protocol error.
  ExecResult Execute(const Action& action) override;

 private:
  // Locates and clicks (or types into) the target described by `action`
  // against `obs`. Throws WebDriverError.
  void Attempt(const Action& action, const ParsedPage& page, bool scroll_first);
  ElementRef Resolve(const Action& action, const ParsedPage& page);
  const ParsedPage& Current();
  void Settle();

  std::shared_ptr<const ExtractionRuleset> rules_;
  WebDriverEnvConfig config_;
  WebDriverClient client_;
  std::optional<ParsedPage> last_;
  bool stopped_ = false;
};

bool IsRecoverableDriverError(const WebDriverError& e);

}  // namespace agentab
