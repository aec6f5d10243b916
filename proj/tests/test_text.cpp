#include <fstream>

#include "doctest.h"
#include "quim/error.hpp"
#include "quim/html.hpp"
#include "quim/jsonl.hpp"
#include "quim/template.hpp"
#include "quim/text.hpp"
#include "support.hpp"

using namespace quim;

TEST_CASE("whitespace tokenizer reports byte spans") {
    WhitespaceTokenizer tok;
    auto spans = tok.tokenize("  ab  c\td\n");
    REQUIRE(spans.size() == 3);
    CHECK(spans[0] == TokenSpan{2, 4});
    CHECK(spans[1] == TokenSpan{6, 7});
    CHECK(spans[2] == TokenSpan{8, 9});
    CHECK(tok.tokenize("   ").empty());
}

TEST_CASE("words lowercases and keeps utf-8 bytes together") {
    CHECK(words("Hello, World! CS-160") == std::vector<std::string>{"hello", "world", "cs", "160"});
    CHECK(words("café au lait") == std::vector<std::string>{"café", "au", "lait"});
    CHECK(words(" ,. ").empty());
}

TEST_CASE("content words drop stopwords and short words") {
    CHECK(content_words("What is the office of the Dean?") == std::vector<std::string>{"office", "dean"});
    CHECK(is_stopword("the"));
    CHECK_FALSE(is_stopword("robotics"));
}

TEST_CASE("sentence split on terminators followed by space") {
    CHECK(split_sentences("One. Two? Three!") == std::vector<std::string>{"One.", "Two?", "Three!"});
    CHECK(split_sentences("Version 3.5 ships. Done") == std::vector<std::string>{"Version 3.5 ships.", "Done"});
    CHECK(split_sentences("  ").empty());
}

TEST_CASE("normalize_for_match") {
    CHECK(normalize_for_match("  What   IS\tX? ") == "what is x?");
    CHECK(collapse_whitespace(" a \n b ") == "a b");
    CHECK(iequals("ABC", "abc"));
}

TEST_CASE("fnv1a64 known vectors") {
    // Reference values of 64-bit FNV-1a.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("template rendering") {
    CHECK(render_template("Q for: {chunk_text}", {{"chunk_text", "abc"}}) == "Q for: abc");
    CHECK(render_template("{{x}} {x}", {{"x", "{x}"}}) == "{x} {x}");
    CHECK_THROWS_AS(render_template("{nope}", {{"x", "1"}}), Error);
    CHECK_THROWS_AS(render_template("{x", {{"x", "1"}}), Error);
    CHECK(template_placeholders("{a}{b}{a}") == std::map<std::string, int>{{"a", 2}, {"b", 1}});
    try {
        check_template("no placeholder", {"chunk_text"}, {"chunk_text"});
        FAIL("expected TemplateError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TemplateError);
    }
    CHECK_THROWS_AS(check_template("{chunk_text}{chunk_text}", {"chunk_text"}, {"chunk_text"}), Error);
    CHECK_THROWS_AS(check_template("{chunk_text}{other}", {"chunk_text"}, {"chunk_text"}), Error);
    CHECK_NOTHROW(check_template("{chunk_text}", {"chunk_text"}, {"chunk_text"}));
}

TEST_CASE("html visible text") {
    CHECK(html::visible_text("<html><header>Nav</header><p>Hello world</p></html>") == "Hello world");
    CHECK(html::visible_text("<p>A</p><script>x()</script><p>B</p>") == "A B");
    CHECK(html::visible_text("<style>p{}</style><nav>x</nav><aside>y</aside><footer>z</footer>w") == "w");
    CHECK(html::visible_text("a<!-- c -->b") == "ab");
    CHECK(html::visible_text("x &amp; y &lt;z&gt; &#65;&#x42;") == "x & y <z> AB");
    CHECK(html::decode_entities("&bogus; &copy;") == "&bogus; \xC2\xA9");
}

TEST_CASE("html visible text on a page with nested tables matches the golden file") {
    std::ifstream page(qtest::fixtures() / "site" / "faq.html");
    std::ifstream golden(qtest::fixtures() / "faq.golden.txt");
    std::string markup((std::istreambuf_iterator<char>(page)), {});
    std::string expected((std::istreambuf_iterator<char>(golden)), {});
    CHECK(html::visible_text(markup) == std::string(trim(expected)));
}

TEST_CASE("html idempotent on plain text") {
    const std::string plain = "Plain   text with\nno tags.";
    CHECK(html::visible_text(plain) == collapse_whitespace(plain));
}

TEST_CASE("html title, canonical and links") {
    const std::string page =
        "<html><head><title> A\n Title </title><link href=\"https://x.org/a\" rel=\"canonical\"></head>"
        "<body><a href=\"/b\">b</a><a class=x href='c.html'>c</a></body></html>";
    CHECK(html::title(page) == "A Title");
    CHECK(html::canonical_url(page) == "https://x.org/a");
    CHECK(html::links(page) == std::vector<std::string>{"/b", "c.html"});
}

TEST_CASE("jsonl round trip and errors") {
    qtest::TempDir dir;
    const auto path = dir / "x.jsonl";
    write_jsonl(path, "quim-test", 1, {json{{"a", 1}}, json{{"a", 2}}});
    auto recs = read_jsonl(path, "quim-test", 1);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].line == 2);
    CHECK(recs[1].value["a"] == 2);

    CHECK_THROWS_AS(read_jsonl(path, "other", 1), Error);
    try {
        read_jsonl(path, "quim-test", 2);
        FAIL("expected VersionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::VersionMismatch);
    }

    std::ofstream(path, std::ios::app) << "{\"a\": 3\n";
    try {
        read_jsonl(path, "quim-test", 1);
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::FormatError);
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    try {
        read_jsonl(dir / "absent.jsonl", "quim-test", 1);
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IoError);
    }
}

TEST_CASE("error what() carries the class name") {
    Error e(Errc::ChecksumError, "bad");
    CHECK(std::string(e.what()) == "ChecksumError: bad");
    CHECK(to_string(Errc::JudgeHallucination) == "JudgeHallucination");
}
