#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agentab::html {

struct Node {
  enum class Kind { kDocument, kElement, kText };

  Kind kind = Kind::kElement;
  std::string tag;   // lowercase, elements only
  std::string text;  // text nodes only, entities decoded
  std::vector<std::pair<std::string, std::string>> attributes;  // names lowercase
  std::vector<std::unique_ptr<Node>> children;
  Node* parent = nullptr;

  bool IsElement() const { return kind == Kind::kElement; }
  const std::string* Attr(std::string_view name) const;
  void SetAttr(std::string_view name, std::string value);
  bool HasClass(std::string_view cls) const;
  // Descendant text with runs of whitespace collapsed and ends trimmed.
  std::string TextContent() const;
  std::vector<const Node*> ElementChildren() const;
};

// Tolerant tree builder: unknown or mismatched end tags are ignored, void
// elements never take children, <script>/<style> bodies are opaque text,
// and an open <p>/<li>/<option> is closed by a sibling of the same kind.
class Document {
 public:
  static Document Parse(std::string_view source);

  const Node& root() const { return *root_; }
  Node& mutable_root() { return *root_; }
  std::string Title() const;

 private:
  std::unique_ptr<Node> root_;
};

std::string DecodeEntities(std::string_view s);

// CSS selector subset: type, universal, #id, .class, [attr], [attr=v],
// [attr~=v], [attr^=v], [attr$=v], [attr*=v], descendant and child (>)
// combinators, and comma-separated lists.
class Selector {
 public:
  // Throws std::invalid_argument on syntax the subset does not cover.
  static Selector Parse(std::string_view text);

  bool Matches(const Node& element) const;
  // Matching descendants of `scope` (not scope itself) in document order.
  std::vector<const Node*> QueryAll(const Node& scope) const;
  const Node* QueryFirst(const Node& scope) const;
  const std::string& text() const { return text_; }

 private:
  struct AttrTest {
    std::string name;
    char op = 0;  // 0 = presence, '=', '~', '^', '$', '*'
    std::string value;
  };
  struct Compound {
    std::string tag;  // empty or "*" = any
    std::vector<std::string> ids;
    std::vector<std::string> classes;
    std::vector<AttrTest> attrs;
  };
  struct Complex {
    std::vector<Compound> parts;
    std::vector<char> combinators;  // between parts: ' ' or '>'
  };

  static bool MatchCompound(const Compound& c, const Node& n);
  static bool MatchComplex(const Complex& c, std::size_t idx, const Node& n);

  std::string text_;
  std::vector<Complex> alternatives_;
};

}  // namespace agentab::html
