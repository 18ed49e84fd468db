#include <doctest.h>

#include "agentab/html.hpp"

using namespace agentab::html;

namespace {

std::vector<std::string> Texts(const Document& d, std::string_view css) {
  std::vector<std::string> out;
  for (const Node* n : Selector::Parse(css).QueryAll(d.root())) out.push_back(n->TextContent());
  return out;
}

}  // namespace

TEST_CASE("tolerant parsing of sloppy markup") {
  auto d = Document::Parse(
      "<HTML><Body><p>one<p>two<ul><li>a<li>b</ul><br><img src=x.png><div>x</span>y</div></body>");
  CHECK(Texts(d, "p").size() == 2);
  CHECK(Texts(d, "li") == std::vector<std::string>{"a", "b"});
  CHECK(Texts(d, "div") == std::vector<std::string>{"xy"});
  const Node* img = Selector::Parse("img").QueryFirst(d.root());
  REQUIRE(img != nullptr);
  CHECK(img->children.empty());
  CHECK(*img->Attr("src") == "x.png");
}

TEST_CASE("script, style and comments contribute no text or elements") {
  auto d = Document::Parse(
      "<div id=a><script>if (a < b) { x = '<p>'; }</script><style>p > b {}</style>"
      "<!-- <p>hidden</p> -->shown</div>");
  CHECK(Texts(d, "#a") == std::vector<std::string>{"shown"});
  CHECK(Texts(d, "p").empty());
}

TEST_CASE("entities decode in text and attributes") {
  CHECK(DecodeEntities("&amp;&lt;&gt;&quot;&#39;&#x41;&ndash;") == "&<>\"'A\xE2\x80\x93");
  CHECK(DecodeEntities("&unknown; & x") == "&unknown; & x");
  auto d = Document::Parse("<a title=\"Tom &amp; Jerry\">R&amp;D</a>");
  const Node* a = Selector::Parse("a").QueryFirst(d.root());
  CHECK(*a->Attr("title") == "Tom & Jerry");
  CHECK(a->TextContent() == "R&D");
}

TEST_CASE("text content collapses whitespace") {
  auto d = Document::Parse("<h1>  Solar \n\t filter <b>kit</b>  </h1>");
  CHECK(Texts(d, "h1") == std::vector<std::string>{"Solar filter kit"});
}

TEST_CASE("selector subset") {
  auto d = Document::Parse(
      "<div id=main class='a b'><ul class=list><li data-x=foo-bar>1</li><li data-x=baz>2</li></ul>"
      "<span class=b>3</span></div><span>4</span><input type=checkbox checked>");
  CHECK(Texts(d, "#main") .size() == 1);
  CHECK(Texts(d, ".a.b").size() == 1);
  CHECK(Texts(d, "div span") == std::vector<std::string>{"3"});
  CHECK(Texts(d, "div > span") == std::vector<std::string>{"3"});
  CHECK(Texts(d, "div > li").empty());
  CHECK(Texts(d, "li[data-x=baz]") == std::vector<std::string>{"2"});
  CHECK(Texts(d, "li[data-x^=foo]") == std::vector<std::string>{"1"});
  CHECK(Texts(d, "li[data-x$=bar]") == std::vector<std::string>{"1"});
  CHECK(Texts(d, "li[data-x*=o-b]") == std::vector<std::string>{"1"});
  CHECK(Texts(d, "[class~=b]").size() == 2);
  CHECK(Texts(d, "input[checked]").size() == 1);
  CHECK(Texts(d, "li, span").size() == 4);
  CHECK(Texts(d, "span, li") == std::vector<std::string>{"1", "2", "3", "4"});  // document order
  CHECK(Selector::Parse("*").QueryAll(d.root()).size() >= 6);
}

TEST_CASE("query all excludes the scope itself") {
  auto d = Document::Parse("<div class=c><div class=c>inner</div></div>");
  const Node* outer = Selector::Parse("div.c").QueryFirst(d.root());
  CHECK(Selector::Parse("div.c").QueryAll(*outer).size() == 1);
}

TEST_CASE("unsupported selector syntax is rejected") {
  CHECK_THROWS_AS(Selector::Parse("li:last-child"), std::invalid_argument);
  CHECK_THROWS_AS(Selector::Parse("a + b"), std::invalid_argument);
  CHECK_THROWS_AS(Selector::Parse(""), std::invalid_argument);
}

TEST_CASE("document title") {
  CHECK(Document::Parse("<html><head><title> Hi  there </title></head></html>").Title() == "Hi there");
}
