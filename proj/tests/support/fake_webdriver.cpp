#include "fake_webdriver.hpp"

#include <httplib.h>

#include <set>

#include "agentab/common.hpp"
#include "agentab/html.hpp"
#include "agentab/mock_shop.hpp"

namespace agentab::testing {

namespace {

constexpr const char* kElementKey = "element-6066-11e4-a52e-4f735466cecf";

struct DriverError {
  int status;
  std::string code;
  std::string message;
};

std::string StripOrigin(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) return url.empty() ? "/" : url;
  auto slash = url.find('/', scheme + 3);
  return slash == std::string::npos ? "/" : url.substr(slash);
}

std::string ResolveHref(const std::string& href, const std::string& current) {
  if (href.find("://") != std::string::npos) return StripOrigin(href);
  if (!href.empty() && href[0] == '/') return href;
  auto q = current.find('?');
  std::string base = current.substr(0, q);
  auto slash = base.rfind('/');
  return base.substr(0, slash + 1) + href;
}

}  // namespace

struct FakeWebDriver::Impl {
  struct Session {
    std::string path;
    std::unique_ptr<html::Document> doc;
    std::string source;
    int version = 0;
    std::vector<std::pair<int, const html::Node*>> elements;
    std::set<const html::Node*> scrolled;
    std::map<const html::Node*, std::string> typed;
  };

  Pages pages;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  std::map<std::string, Session> sessions;
  std::vector<Fault> faults;
  std::vector<std::string> log;
  std::string last_path;
  int opened = 0;
  int closed = 0;

  void Load(Session& s, const std::string& path) {
    s.path = path;
    last_path = path;
    auto html = pages(path);
    s.source = html ? *html : "<html><head><title>Not Found</title></head><body><h1>404</h1></body></html>";
    s.doc = std::make_unique<html::Document>(html::Document::Parse(s.source));
    ++s.version;
    s.scrolled.clear();
    s.typed.clear();
  }

  Session& Get(const std::string& id) {
    auto it = sessions.find(id);
    if (it == sessions.end()) throw DriverError{404, "invalid session id", id};
    return it->second;
  }

  std::string Register(Session& s, const html::Node* n) {
    s.elements.emplace_back(s.version, n);
    return std::to_string(s.elements.size() - 1);
  }

  const html::Node* Lookup(Session& s, const std::string& eid) {
    std::size_t i = 0;
    try {
      i = std::stoul(eid);
    } catch (const std::exception&) {
      throw DriverError{404, "no such element", "bad element id " + eid};
    }
    if (i >= s.elements.size()) throw DriverError{404, "no such element", "unknown element " + eid};
    if (s.elements[i].first != s.version) throw DriverError{404, "stale element reference", "element " + eid};
    return s.elements[i].second;
  }

  static html::Selector Compile(const std::string& css) {
    try {
      return html::Selector::Parse(css);
    } catch (const std::invalid_argument& e) {
      throw DriverError{400, "invalid selector", e.what()};
    }
  }

  static bool SelfOrAncestorMatches(const html::Selector& sel, const html::Node* n) {
    for (; n != nullptr; n = n->parent) {
      if (n->IsElement() && sel.Matches(*n)) return true;
    }
    return false;
  }

  static const html::Node* Closest(const html::Node* n, std::string_view tag) {
    for (; n != nullptr; n = n->parent) {
      if (n->IsElement() && n->tag == tag) return n;
    }
    return nullptr;
  }

  bool Scrolled(const Session& s, const html::Node* n) const {
    for (; n != nullptr; n = n->parent) {
      if (s.scrolled.contains(n)) return true;
    }
    return false;
  }

  void Click(Session& s, const html::Node* n) {
    for (auto& f : faults) {
      if (f.failures == 0) continue;
      if (!SelfOrAncestorMatches(Compile(f.selector), n)) continue;
      if (f.cleared_by_scroll && Scrolled(s, n)) continue;
      if (f.failures > 0) --f.failures;
      log.push_back("click_fail " + f.code);
      throw DriverError{f.code == "element click intercepted" ? 400 : 404, f.code, "injected"};
    }
    log.push_back("click");
    if (const html::Node* a = Closest(n, "a")) {
      if (const std::string* href = a->Attr("href")) {
        Load(s, ResolveHref(*href, s.path));
        return;
      }
    }
    const std::string* type = n->Attr("type");
    const bool submit = (n->tag == "button" && (type == nullptr || *type == "submit")) ||
                        (n->tag == "input" && type != nullptr && *type == "submit");
    if (!submit) return;
    const html::Node* form = Closest(n, "form");
    if (form == nullptr) return;
    std::string query;
    for (const html::Node* in : Compile("input[name]").QueryAll(*form)) {
      const std::string* t = in->Attr("type");
      if (t != nullptr && (*t == "submit" || *t == "checkbox")) continue;
      auto typed = s.typed.find(in);
      std::string value = typed != s.typed.end() ? typed->second : (in->Attr("value") ? *in->Attr("value") : "");
      query += (query.empty() ? "?" : "&") + *in->Attr("name") + "=" + UrlEncode(value);
    }
    const std::string* action = form->Attr("action");
    Load(s, ResolveHref(action ? *action : s.path.substr(0, s.path.find('?')), s.path) + query);
  }

  Json ElementJson(Session& s, const html::Node* n) { return Json{{kElementKey, Register(s, n)}}; }

  Json Handle(const std::string& method, const std::vector<std::string>& parts, const Json& body) {
    // parts: ["session", id, ...]
    if (parts.size() == 1 && method == "POST") {
      const std::string id = "s" + std::to_string(++opened);
      Session s;
      Load(s, "/");
      sessions.emplace(id, std::move(s));
      log.push_back("new_session");
      return {{"sessionId", id}, {"capabilities", Json::object()}};
    }
    if (parts.size() < 2) throw DriverError{404, "unknown command", "bad route"};
    const std::string& id = parts[1];
    if (parts.size() == 2 && method == "DELETE") {
      Get(id);
      sessions.erase(id);
      ++closed;
      log.push_back("delete_session");
      return nullptr;
    }
    Session& s = Get(id);
    const std::string cmd = parts.size() > 2 ? parts[2] : "";
    if (cmd == "url" && method == "POST") {
      const std::string path = StripOrigin(body.at("url").get<std::string>());
      log.push_back("navigate " + path);
      Load(s, path);
      return nullptr;
    }
    if (cmd == "source") {
      log.push_back("source");
      return s.source;
    }
    if (cmd == "execute" && parts.size() == 4 && parts[3] == "sync") {
      const std::string script = body.at("script").get<std::string>();
      if (script.find("readyState") != std::string::npos) return "complete";
      if (script.find("scrollIntoView") != std::string::npos) {
        const Json& args = body.at("args");
        if (args.empty() || !args[0].contains(kElementKey)) throw DriverError{400, "invalid argument", "no element"};
        s.scrolled.insert(Lookup(s, args[0][kElementKey].get<std::string>()));
        log.push_back("scroll");
        return nullptr;
      }
      return nullptr;
    }
    if (cmd == "elements" || cmd == "element") {
      if (parts.size() == 3) {
        auto matches = Compile(body.at("value").get<std::string>()).QueryAll(s.doc->root());
        log.push_back("find");
        if (cmd == "element") {
          if (matches.empty()) throw DriverError{404, "no such element", body.at("value").get<std::string>()};
          return ElementJson(s, matches.front());
        }
        Json out = Json::array();
        for (const html::Node* n : matches) out.push_back(ElementJson(s, n));
        return out;
      }
      const html::Node* el = Lookup(s, parts[3]);
      const std::string sub = parts.size() > 4 ? parts[4] : "";
      if (sub == "elements") {
        log.push_back("find");
        Json out = Json::array();
        for (const html::Node* n : Compile(body.at("value").get<std::string>()).QueryAll(*el)) {
          out.push_back(ElementJson(s, n));
        }
        return out;
      }
      if (sub == "click") {
        Click(s, el);
        return nullptr;
      }
      if (sub == "clear") {
        log.push_back("clear");
        s.typed[el] = "";
        return nullptr;
      }
      if (sub == "value") {
        log.push_back("keys");
        s.typed[el] += body.at("text").get<std::string>();
        return nullptr;
      }
    }
    throw DriverError{404, "unknown command", method + " " + cmd};
  }

  void Serve(const httplib::Request& req, httplib::Response& res) {
    std::vector<std::string> parts;
    std::string path = req.path;
    for (std::size_t b = 1; b <= path.size();) {
      auto e = path.find('/', b);
      if (e == std::string::npos) e = path.size();
      if (e > b) parts.push_back(path.substr(b, e - b));
      b = e + 1;
    }
    std::lock_guard lock(mu);
    try {
      if (parts.empty() || parts[0] != "session") throw DriverError{404, "unknown command", path};
      Json body = req.body.empty() ? Json::object() : Json::parse(req.body);
      Json value = Handle(req.method, parts, body);
      res.set_content(Json{{"value", value}}.dump(), "application/json");
    } catch (const DriverError& e) {
      res.status = e.status;
      res.set_content(Json{{"value", {{"error", e.code}, {"message", e.message}}}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(Json{{"value", {{"error", "unknown error"}, {"message", e.what()}}}}.dump(),
                      "application/json");
    }
  }
};

FakeWebDriver::FakeWebDriver(Pages pages) : impl_(std::make_unique<Impl>()) {
  impl_->pages = std::move(pages);
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->Serve(req, res); };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Delete(".*", handler);
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

FakeWebDriver::~FakeWebDriver() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string FakeWebDriver::endpoint() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void FakeWebDriver::AddFault(Fault f) {
  std::lock_guard lock(impl_->mu);
  impl_->faults.push_back(std::move(f));
}

void FakeWebDriver::MutateCurrentPage(const std::function<std::string(const std::string&)>& edit) {
  std::lock_guard lock(impl_->mu);
  for (auto& [id, s] : impl_->sessions) {
    s.source = edit(s.source);
    s.doc = std::make_unique<html::Document>(html::Document::Parse(s.source));
    ++s.version;
    s.scrolled.clear();
    s.typed.clear();
  }
}

std::vector<std::string> FakeWebDriver::Log() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

void FakeWebDriver::ClearLog() {
  std::lock_guard lock(impl_->mu);
  impl_->log.clear();
}

std::string FakeWebDriver::current_path() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_path;
}

int FakeWebDriver::sessions_opened() const {
  std::lock_guard lock(impl_->mu);
  return impl_->opened;
}

int FakeWebDriver::sessions_closed() const {
  std::lock_guard lock(impl_->mu);
  return impl_->closed;
}

}  // namespace agentab::testing
