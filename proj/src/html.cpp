#include "agentab/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

namespace agentab::html {

namespace {

constexpr std::array<std::string_view, 14> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr"};

bool IsVoid(std::string_view tag) {
  return std::find(kVoidElements.begin(), kVoidElements.end(), tag) != kVoidElements.end();
}

bool IsRawText(std::string_view tag) { return tag == "script" || tag == "style" || tag == "textarea" || tag == "title"; }

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void AppendUtf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x110000) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

void CollectText(const Node& n, std::string& out) {
  if (n.kind == Node::Kind::kText) {
    out += n.text;
    return;
  }
  if (n.IsElement() && (n.tag == "script" || n.tag == "style")) return;
  for (const auto& c : n.children) {
    CollectText(*c, out);
    if (c->IsElement() && c->tag == "br") out.push_back(' ');
  }
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string_view src) : src_(src) {}

  std::unique_ptr<Node> Build() {
    auto root = std::make_unique<Node>();
    root->kind = Node::Kind::kDocument;
    stack_.push_back(root.get());
    while (pos_ < src_.size()) {
      if (src_[pos_] == '<') {
        if (Peek("<!--")) {
          auto end = src_.find("-->", pos_ + 4);
          pos_ = end == std::string_view::npos ? src_.size() : end + 3;
        } else if (Peek("<!") || Peek("<?")) {
          auto end = src_.find('>', pos_);
          pos_ = end == std::string_view::npos ? src_.size() : end + 1;
        } else if (Peek("</")) {
          EndTag();
        } else if (pos_ + 1 < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_ + 1]))) {
          StartTag();
        } else {
          Text(pos_, pos_ + 1);
          ++pos_;
        }
      } else {
        auto next = src_.find('<', pos_);
        if (next == std::string_view::npos) next = src_.size();
        Text(pos_, next);
        pos_ = next;
      }
    }
    return root;
  }

 private:
  bool Peek(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  Node* Current() { return stack_.back(); }

  void Text(std::size_t b, std::size_t e) {
    if (b >= e) return;
    std::string decoded = DecodeEntities(src_.substr(b, e - b));
    auto& kids = Current()->children;
    if (!kids.empty() && kids.back()->kind == Node::Kind::kText) {
      kids.back()->text += decoded;
      return;
    }
    auto t = std::make_unique<Node>();
    t->kind = Node::Kind::kText;
    t->text = std::move(decoded);
    t->parent = Current();
    kids.push_back(std::move(t));
  }

  std::string ReadName() {
    std::size_t b = pos_;
    while (pos_ < src_.size() && !IsSpace(src_[pos_]) && src_[pos_] != '>' && src_[pos_] != '/' &&
           src_[pos_] != '=') {
      ++pos_;
    }
    return Lower(src_.substr(b, pos_ - b));
  }

  void SkipSpace() {
    while (pos_ < src_.size() && IsSpace(src_[pos_])) ++pos_;
  }

  void EndTag() {
    pos_ += 2;
    std::string name = ReadName();
    auto end = src_.find('>', pos_);
    pos_ = end == std::string_view::npos ? src_.size() : end + 1;
    for (std::size_t i = stack_.size(); i > 1; --i) {
      if (stack_[i - 1]->tag == name) {
        stack_.resize(i - 1);
        return;
      }
    }
  }

  void CloseImplied(std::string_view tag) {
    if (tag != "p" && tag != "li" && tag != "option") return;
    for (std::size_t i = stack_.size(); i > 1; --i) {
      const std::string& t = stack_[i - 1]->tag;
      if (t == tag) {
        stack_.resize(i - 1);
        return;
      }
      if (t == "ul" || t == "ol" || t == "select" || t == "div" || t == "table") return;
    }
  }

  void StartTag() {
    ++pos_;
    auto el = std::make_unique<Node>();
    el->kind = Node::Kind::kElement;
    el->tag = ReadName();
    bool self_closing = false;
    while (pos_ < src_.size()) {
      SkipSpace();
      if (pos_ >= src_.size()) break;
      if (src_[pos_] == '>') {
        ++pos_;
        break;
      }
      if (src_[pos_] == '/') {
        self_closing = true;
        ++pos_;
        continue;
      }
      std::string name = ReadName();
      if (name.empty()) {
        ++pos_;
        continue;
      }
      SkipSpace();
      std::string value;
      if (pos_ < src_.size() && src_[pos_] == '=') {
        ++pos_;
        SkipSpace();
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'')) {
          char q = src_[pos_++];
          auto end = src_.find(q, pos_);
          if (end == std::string_view::npos) end = src_.size();
          value = DecodeEntities(src_.substr(pos_, end - pos_));
          pos_ = std::min(end + 1, src_.size());
        } else {
          std::size_t b = pos_;
          while (pos_ < src_.size() && !IsSpace(src_[pos_]) && src_[pos_] != '>') ++pos_;
          value = DecodeEntities(src_.substr(b, pos_ - b));
        }
      }
      if (el->Attr(name) == nullptr) el->attributes.emplace_back(std::move(name), std::move(value));
    }
    CloseImplied(el->tag);
    Node* raw = el.get();
    el->parent = Current();
    Current()->children.push_back(std::move(el));
    if (IsVoid(raw->tag) || self_closing) return;
    if (IsRawText(raw->tag)) {
      const std::string close = "</" + raw->tag;
      std::size_t end = pos_;
      while (true) {
        end = src_.find("</", end);
        if (end == std::string_view::npos) {
          end = src_.size();
          break;
        }
        if (Lower(src_.substr(end, close.size())) == close) break;
        end += 2;
      }
      auto t = std::make_unique<Node>();
      t->kind = Node::Kind::kText;
      std::string_view body = src_.substr(pos_, end - pos_);
      t->text = raw->tag == "script" || raw->tag == "style" ? std::string(body) : DecodeEntities(body);
      t->parent = raw;
      if (!t->text.empty()) raw->children.push_back(std::move(t));
      pos_ = end;
      if (pos_ < src_.size()) {
        auto gt = src_.find('>', pos_);
        pos_ = gt == std::string_view::npos ? src_.size() : gt + 1;
      }
      return;
    }
    stack_.push_back(raw);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Node*> stack_;
};

}  // namespace

std::string DecodeEntities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      try {
        unsigned long cp = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                               ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                               : std::stoul(std::string(name.substr(1)), nullptr, 10);
        AppendUtf8(out, cp);
        i = semi;
        continue;
      } catch (const std::exception&) {
        out.push_back('&');
        continue;
      }
    }
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kNamed = {{
        {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", "\xC2\xA0"}, {"ndash", "\xE2\x80\x93"},
    }};
    auto it = std::find_if(kNamed.begin(), kNamed.end(), [&](const auto& p) { return p.first == name; });
    if (it == kNamed.end()) {
      out.push_back('&');
      continue;
    }
    out += it->second;
    i = semi;
  }
  return out;
}

const std::string* Node::Attr(std::string_view name) const {
  for (const auto& [k, v] : attributes) {
    if (k == name) return &v;
  }
  return nullptr;
}

void Node::SetAttr(std::string_view name, std::string value) {
  for (auto& [k, v] : attributes) {
    if (k == name) {
      v = std::move(value);
      return;
    }
  }
  attributes.emplace_back(std::string(name), std::move(value));
}

bool Node::HasClass(std::string_view cls) const {
  const std::string* c = Attr("class");
  if (c == nullptr) return false;
  std::string_view rest = *c;
  while (!rest.empty()) {
    std::size_t b = 0;
    while (b < rest.size() && IsSpace(rest[b])) ++b;
    std::size_t e = b;
    while (e < rest.size() && !IsSpace(rest[e])) ++e;
    if (e > b && rest.substr(b, e - b) == cls) return true;
    rest.remove_prefix(e);
  }
  return false;
}

std::string Node::TextContent() const {
  std::string raw;
  CollectText(*this, raw);
  // Non-breaking spaces count as whitespace.
  std::string nb;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.compare(i, 2, "\xC2\xA0") == 0) {
      nb.push_back(' ');
      ++i;
    } else {
      nb.push_back(raw[i]);
    }
  }
  std::string out;
  bool pending_space = false;
  for (char c : nb) {
    if (IsSpace(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<const Node*> Node::ElementChildren() const {
  std::vector<const Node*> out;
  for (const auto& c : children) {
    if (c->IsElement()) out.push_back(c.get());
  }
  return out;
}

Document Document::Parse(std::string_view source) {
  Document d;
  d.root_ = TreeBuilder(source).Build();
  return d;
}

std::string Document::Title() const {
  auto title = Selector::Parse("title").QueryFirst(*root_);
  return title ? title->TextContent() : std::string();
}

namespace {

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

}  // namespace

Selector Selector::Parse(std::string_view text) {
  Selector sel;
  sel.text_ = std::string(text);
  std::size_t i = 0;
  auto fail = [&](std::string_view why) {
    throw std::invalid_argument("bad selector '" + std::string(text) + "': " + std::string(why));
  };
  auto ident = [&] {
    std::size_t b = i;
    while (i < text.size() && IsIdentChar(text[i])) ++i;
    if (i == b) fail("expected identifier");
    return std::string(text.substr(b, i - b));
  };
  auto skip_ws = [&] {
    bool any = false;
    while (i < text.size() && IsSpace(text[i])) {
      ++i;
      any = true;
    }
    return any;
  };

  Complex cur;
  auto finish_complex = [&] {
    if (cur.parts.empty()) fail("empty selector");
    if (cur.combinators.size() != cur.parts.size() - 1) fail("dangling combinator");
    sel.alternatives_.push_back(std::move(cur));
    cur = Complex{};
  };

  skip_ws();
  while (i < text.size()) {
    Compound c;
    bool any = false;
    if (text[i] == '*') {
      c.tag = "*";
      ++i;
      any = true;
    } else if (IsIdentChar(text[i])) {
      c.tag = Lower(ident());
      any = true;
    }
    while (i < text.size()) {
      if (text[i] == '#') {
        ++i;
        c.ids.push_back(ident());
      } else if (text[i] == '.') {
        ++i;
        c.classes.push_back(ident());
      } else if (text[i] == '[') {
        ++i;
        skip_ws();
        AttrTest t;
        t.name = Lower(ident());
        skip_ws();
        if (i < text.size() && text[i] != ']') {
          if (text[i] == '=') {
            t.op = '=';
            ++i;
          } else if (i + 1 < text.size() && text[i + 1] == '=' && std::string_view("~^$*").find(text[i]) != std::string_view::npos) {
            t.op = text[i];
            i += 2;
          } else {
            fail("unsupported attribute operator");
          }
          skip_ws();
          if (i < text.size() && (text[i] == '"' || text[i] == '\'')) {
            char q = text[i++];
            auto end = text.find(q, i);
            if (end == std::string_view::npos) fail("unterminated string");
            t.value = std::string(text.substr(i, end - i));
            i = end + 1;
          } else {
            t.value = ident();
          }
          skip_ws();
        }
        if (i >= text.size() || text[i] != ']') fail("expected ]");
        ++i;
        c.attrs.push_back(std::move(t));
      } else if (text[i] == ':') {
        fail("pseudo-classes are not supported");
      } else {
        break;
      }
      any = true;
    }
    if (!any) fail("expected compound selector");
    cur.parts.push_back(std::move(c));

    bool ws = skip_ws();
    if (i >= text.size()) break;
    if (text[i] == ',') {
      ++i;
      finish_complex();
      skip_ws();
      continue;
    }
    if (text[i] == '>') {
      ++i;
      skip_ws();
      cur.combinators.push_back('>');
    } else if (ws) {
      cur.combinators.push_back(' ');
    } else {
      fail("unexpected character");
    }
  }
  finish_complex();
  return sel;
}

bool Selector::MatchCompound(const Compound& c, const Node& n) {
  if (!n.IsElement()) return false;
  if (!c.tag.empty() && c.tag != "*" && c.tag != n.tag) return false;
  for (const auto& id : c.ids) {
    const std::string* v = n.Attr("id");
    if (v == nullptr || *v != id) return false;
  }
  for (const auto& cls : c.classes) {
    if (!n.HasClass(cls)) return false;
  }
  for (const auto& t : c.attrs) {
    const std::string* v = n.Attr(t.name);
    if (v == nullptr) return false;
    switch (t.op) {
      case 0: break;
      case '=':
        if (*v != t.value) return false;
        break;
      case '~': {
        Node probe;
        probe.attributes.emplace_back("class", *v);
        if (!probe.HasClass(t.value)) return false;
        break;
      }
      case '^':
        if (t.value.empty() || !std::string_view(*v).starts_with(t.value)) return false;
        break;
      case '$':
        if (t.value.empty() || !std::string_view(*v).ends_with(t.value)) return false;
        break;
      case '*':
        if (t.value.empty() || v->find(t.value) == std::string::npos) return false;
        break;
      default: return false;
    }
  }
  return true;
}

bool Selector::MatchComplex(const Complex& c, std::size_t idx, const Node& n) {
  if (!MatchCompound(c.parts[idx], n)) return false;
  if (idx == 0) return true;
  const char comb = c.combinators[idx - 1];
  for (const Node* p = n.parent; p != nullptr && p->IsElement(); p = p->parent) {
    if (MatchComplex(c, idx - 1, *p)) return true;
    if (comb == '>') return false;
  }
  return false;
}

bool Selector::Matches(const Node& element) const {
  return std::any_of(alternatives_.begin(), alternatives_.end(),
                     [&](const Complex& c) { return MatchComplex(c, c.parts.size() - 1, element); });
}

std::vector<const Node*> Selector::QueryAll(const Node& scope) const {
  std::vector<const Node*> out;
  std::vector<const Node*> stack;
  for (auto it = scope.children.rbegin(); it != scope.children.rend(); ++it) stack.push_back(it->get());
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!n->IsElement()) continue;
    if (Matches(*n)) out.push_back(n);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(it->get());
  }
  return out;
}

const Node* Selector::QueryFirst(const Node& scope) const {
  auto all = QueryAll(scope);
  return all.empty() ? nullptr : all.front();
}

}  // namespace agentab::html
