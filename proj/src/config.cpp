#include "agentab/config.hpp"

#include <set>

namespace agentab {

namespace {

std::string Escape(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

[[noreturn]] void Fail(const std::string& ptr, const std::string& what) {
  throw ValidationError((ptr.empty() ? "/" : ptr) + ": " + what);
}

// A JSON value together with its pointer, for error messages.
struct Node {
  const Json& j;
  std::string ptr;

  Node At(std::string_view key) const {
    if (!j.is_object()) Fail(ptr, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) Fail(ptr + "/" + Escape(key), "missing");
    return {*it, ptr + "/" + Escape(key)};
  }
  std::optional<Node> Maybe(std::string_view key) const {
    if (!j.is_object()) Fail(ptr, "expected an object");
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return Node{*it, ptr + "/" + Escape(key)};
  }
  Node Index(std::size_t i) const { return {j.at(i), ptr + "/" + std::to_string(i)}; }

  void OnlyKeys(std::initializer_list<std::string_view> allowed) const {
    if (!j.is_object()) Fail(ptr, "expected an object");
    for (const auto& [k, v] : j.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) Fail(ptr + "/" + Escape(k), "unknown key");
    }
  }
  const Json& Array() const {
    if (!j.is_array()) Fail(ptr, "expected an array");
    return j;
  }
  std::string String() const {
    if (!j.is_string()) Fail(ptr, "expected a string");
    return j.get<std::string>();
  }
  double Number() const {
    if (!j.is_number()) Fail(ptr, "expected a number");
    return j.get<double>();
  }
  std::int64_t Int() const {
    if (!j.is_number_integer()) Fail(ptr, "expected an integer");
    return j.get<std::int64_t>();
  }
  std::uint64_t Seed() const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      Fail(ptr, "expected a non-negative integer seed");
    }
    return j.get<std::uint64_t>();
  }

  // Delegates to a component parser, tagging its error with this pointer.
  template <class F>
  auto Parse(F&& f) const {
    try {
      return f(j);
    } catch (const ValidationError& e) {
      Fail(ptr, e.what());
    } catch (const SchemaError& e) {
      Fail(ptr, e.what());
    } catch (const Json::exception& e) {
      Fail(ptr, e.what());
    } catch (const Error& e) {
      Fail(ptr, e.what());  // unreadable referenced file
    }
  }
};

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

// Exactly one of the listed keys must be present.
std::string OneOf(const Node& n, std::initializer_list<std::string_view> keys) {
  if (!n.j.is_object()) Fail(n.ptr, "expected an object");
  std::string found;
  for (auto k : keys) {
    if (n.j.contains(k)) {
      if (!found.empty()) Fail(n.ptr, "exactly one of its kinds may be given, found '" + found + "' and '" + std::string(k) + "'");
      found = std::string(k);
    }
  }
  if (found.empty()) {
    std::string all;
    for (auto k : keys) all += (all.empty() ? "" : ", ") + std::string(k);
    Fail(n.ptr, "expected one of " + all);
  }
  if (n.j.size() != 1) Fail(n.ptr, "unexpected keys beside '" + found + "'");
  return found;
}

EnvBackend ParseEnv(const Node& n, const std::filesystem::path& base) {
  const std::string kind = OneOf(n, {"mockshop", "webdriver"});
  const Node b = n.At(kind);
  if (kind == "mockshop") {
    b.OnlyKeys({"catalog", "variants"});
    MockShopBackend m;
    m.catalog_path = Resolve(base, b.At("catalog").String());
    const Node vs = b.At("variants");
    if (!vs.j.is_object() || vs.j.empty()) Fail(vs.ptr, "expected a non-empty object of variants");
    for (const auto& [id, v] : vs.j.items()) {
      m.variants[id] = vs.At(id).Parse([](const Json& x) { return VariantConfig::FromJson(x); });
    }
    return m;
  }
  b.OnlyKeys({"endpoint", "ruleset", "start_urls", "timeout_ms", "headless", "browser"});
  WebDriverBackend w;
  w.driver.endpoint = b.At("endpoint").String();
  if (auto t = b.Maybe("timeout_ms")) {
    if (t->Int() <= 0) Fail(t->ptr, "must be positive");
    w.driver.timeout = std::chrono::milliseconds(t->Int());
  }
  if (auto h = b.Maybe("headless")) {
    if (!h->j.is_boolean()) Fail(h->ptr, "expected a boolean");
    w.driver.headless = h->j.get<bool>();
  }
  if (auto br = b.Maybe("browser")) w.driver.browser_name = br->String();
  w.ruleset_path = Resolve(base, b.At("ruleset").String());
  const Node urls = b.At("start_urls");
  if (!urls.j.is_object() || urls.j.empty()) Fail(urls.ptr, "expected a non-empty object of URLs");
  for (const auto& [id, u] : urls.j.items()) w.start_urls[id] = urls.At(id).String();
  return w;
}

ModelSpec ParseModel(const Node& n) {
  const std::string kind = OneOf(n, {"http", "scripted"});
  const Node b = n.At(kind);
  if (kind == "http") return b.Parse([](const Json& x) { return ModelConfig::FromJson(x); });
  return b.Parse([](const Json& x) { return ScriptedPolicy::FromJson(x); });
}

}  // namespace

ExperimentConfig ParseConfig(const Json& doc, const std::filesystem::path& base_dir) {
  const Node root{doc, ""};
  root.OnlyKeys({"agent_spec", "sample_n", "arms", "env_backend", "model", "limits", "allocation", "parallelism",
                 "seeds", "output_dir", "clock", "prompt_template", "analysis"});
  ExperimentConfig c;

  // agent_spec: inline object or a path to one.
  const Node spec = root.At("agent_spec");
  if (spec.j.is_string()) {
    const auto path = Resolve(base_dir, spec.String());
    c.agent_spec = spec.Parse([&](const Json&) { return AgentSpec::Load(path); });
  } else {
    c.agent_spec = spec.Parse([](const Json& x) { return AgentSpec::FromJson(x); });
  }

  const Node n = root.At("sample_n");
  c.sample_n = static_cast<int>(n.Int());
  if (c.sample_n < 2) Fail(n.ptr, "must be at least 2");
  if (c.sample_n > c.agent_spec.count) Fail(n.ptr, "exceeds agent_spec count " + std::to_string(c.agent_spec.count));

  const Node arms = root.At("arms");
  if (arms.Array().size() != 2) Fail(arms.ptr, "exactly two arms are supported (control first)");
  std::set<std::string> names;
  for (std::size_t i = 0; i < arms.j.size(); ++i) {
    const Node a = arms.Index(i);
    a.OnlyKeys({"name", "variant"});
    Arm arm{a.At("name").String(), a.At("variant").String()};
    if (arm.name.empty()) Fail(a.ptr + "/name", "must be non-empty");
    if (arm.name.find_first_of("/\\") != std::string::npos) Fail(a.ptr + "/name", "may not contain '/'");
    if (!names.insert(arm.name).second) Fail(a.ptr + "/name", "duplicate arm name");
    c.arms.push_back(std::move(arm));
  }

  const Node env = root.At("env_backend");
  c.env_backend = ParseEnv(env, base_dir);
  for (std::size_t i = 0; i < c.arms.size(); ++i) {
    const auto& v = c.arms[i].variant_id;
    const bool known = std::visit(
        [&](const auto& b) {
          if constexpr (std::is_same_v<std::decay_t<decltype(b)>, MockShopBackend>) {
            return b.variants.contains(v);
          } else {
            return b.start_urls.contains(v);
          }
        },
        c.env_backend);
    if (!known) Fail("/arms/" + std::to_string(i) + "/variant", "no variant '" + v + "' in env_backend");
  }

  c.model = ParseModel(root.At("model"));

  if (auto l = root.Maybe("limits")) c.limits = l->Parse([](const Json& x) {
    auto lim = SessionLimits::FromJson(x);
    lim.Validate();
    return lim;
  });

  if (auto a = root.Maybe("allocation")) {
    a->OnlyKeys({"threshold", "max_attempts"});
    if (auto t = a->Maybe("threshold")) {
      c.balance_threshold = t->Number();
      if (!(c.balance_threshold > 0)) Fail(t->ptr, "must be positive");
    }
    if (auto m = a->Maybe("max_attempts")) {
      c.max_attempts = static_cast<int>(m->Int());
      if (c.max_attempts < 1) Fail(m->ptr, "must be at least 1");
    }
  }

  if (auto p = root.Maybe("parallelism")) {
    c.parallelism = static_cast<int>(p->Int());
    if (c.parallelism < 1) Fail(p->ptr, "must be at least 1");
  }

  const Node seeds = root.At("seeds");
  seeds.OnlyKeys({"personas", "sample", "allocation", "run"});
  c.seeds = {seeds.At("personas").Seed(), seeds.At("sample").Seed(), seeds.At("allocation").Seed(),
             seeds.At("run").Seed()};

  c.output_dir = root.At("output_dir").String();
  if (c.output_dir.empty()) Fail("/output_dir", "must be non-empty");

  if (auto cl = root.Maybe("clock")) {
    const auto s = cl->String();
    if (s == "wall") {
      c.clock = ClockMode::kWall;
    } else if (s == "frozen") {
      c.clock = ClockMode::kFrozen;
    } else {
      Fail(cl->ptr, "expected \"wall\" or \"frozen\"");
    }
  }

  if (auto pt = root.Maybe("prompt_template")) {
    c.prompt_template = Resolve(base_dir, pt->String());
    pt->Parse([&](const Json&) { return PromptTemplate::Load(*c.prompt_template); });
  }

  if (auto an = root.Maybe("analysis")) {
    an->OnlyKeys({"baseline", "stratify", "max_abandoned_fraction"});
    if (auto b = an->Maybe("baseline")) c.analysis.baseline = Resolve(base_dir, b->String());
    if (auto f = an->Maybe("max_abandoned_fraction")) {
      c.analysis.max_abandoned_fraction = f->Number();
      if (c.analysis.max_abandoned_fraction < 0 || c.analysis.max_abandoned_fraction > 1) {
        Fail(f->ptr, "must lie in [0, 1]");
      }
    }
    if (auto st = an->Maybe("stratify")) {
      for (std::size_t i = 0; i < st->Array().size(); ++i) {
        const Node s = st->Index(i);
        s.OnlyKeys({"attribute", "cut_points"});
        StratifySpec spec_i{s.At("attribute").String(), {}};
        if (c.agent_spec.Find(spec_i.attribute) == nullptr) Fail(s.ptr + "/attribute", "not an agent_spec attribute");
        if (auto cp = s.Maybe("cut_points")) {
          for (std::size_t k = 0; k < cp->Array().size(); ++k) {
            spec_i.cut_points.push_back(cp->Index(k).Number());
            if (k > 0 && spec_i.cut_points[k] <= spec_i.cut_points[k - 1]) {
              Fail(cp->Index(k).ptr, "cut points must be strictly ascending");
            }
          }
        }
        c.analysis.stratify.push_back(std::move(spec_i));
      }
    }
  }
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(ReadFile(path));
  } catch (const Json::exception& e) {
    throw ValidationError(path.string() + ": not valid JSON: " + e.what());
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  return ParseConfig(doc, path.parent_path());
}

}  // namespace agentab
