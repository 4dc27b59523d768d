#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "phishtriage/text.hpp"

using namespace phishtriage;

TEST_CASE("strip_html removes simple markup") {
    CHECK(strip_html("<p>Hello <b>world</b></p>") == "Hello world");
    CHECK(strip_html("<style>a{}</style>Pay &amp; verify") == "Pay & verify");
    CHECK(strip_html("plain text") == "plain text");
    CHECK(strip_html("") == "");
}

TEST_CASE("strip_html drops script, style and head contents") {
    CHECK(strip_html("<script>alert('x')</script>after") == "after");
    CHECK(strip_html("<head><title>Spam</title></head><body>Hi</body>") == "Hi");
    CHECK(strip_html("<SCRIPT>x</SCRIPT>ok") == "ok");
    // unmatched script is text-terminated
    CHECK(strip_html("before<script>lost forever") == "before");
}

TEST_CASE("strip_html decodes entities") {
    CHECK(strip_html("fish &amp; chips") == "fish & chips");
    CHECK(strip_html("&lt;tag&gt;") == "");  // re-formed markup is stripped too
    CHECK(strip_html("a&nbsp;b") == "a b");
    CHECK(strip_html("&#65;&#x42;") == "AB");
    CHECK(strip_html("tea &unknowable; cup") == "tea &unknowable; cup");
    CHECK(strip_html("caf&eacute") == "caf&eacute");  // unterminated
}

TEST_CASE("strip_html block boundaries are sentence-safe") {
    CHECK(strip_html("<p>One</p><p>Two</p>") == "One\n\nTwo");
    CHECK(strip_html("a<br>b") == "a\nb");
    CHECK(strip_html("a<br><br>b") == "a\n\nb");
    CHECK(strip_html("<td>cell1</td><td>cell2</td>") == "cell1\n\ncell2");
    CHECK(strip_html("in<span>line</span>s") == "inlines");
}

TEST_CASE("strip_html flattens a nested phishing table") {
    const char* html =
        "<html><head><style>.x{color:red}</style></head><body>"
        "<table><tr><td>Your account needs attention.</td></tr>"
        "<tr><td><table><tr><td>"
        "<a href=\"http://bad.example\">Click here</a> to verify."
        "</td></tr></table></td></tr></table>"
        "<p>The security desk</p></body></html>";
    CHECK(strip_html(html) ==
          "Your account needs attention.\n\nClick here to verify."
          "\n\nThe security desk");
}

TEST_CASE("strip_html handles malformed markup leniently") {
    CHECK(strip_html("a < b and c > d") == "a < b and c > d");
    CHECK(strip_html("text <a href=\"x>y\">link</a>") == "text link");
    CHECK(strip_html("tail<b") == "tail");
}

TEST_CASE("strip_html is idempotent on randomized markup soup") {
    std::mt19937_64 rng(1234);
    const std::vector<std::string> pieces = {
        "hello",  "world",   "<p>",     "</p>",     "<b>",        "</b>",
        "&amp;",  "&lt;",    "&gt;",    "&amp;amp;", "&#65;",      " ",
        "\n",     "\n\n",    "<br>",    "<script>", "</script>",  "x",
        "<",      ">",       "&",       "&nbsp;",   "<table><tr><td>",
        "</td></tr></table>", "mixed text here", "&#x3C;b&#x3E;"};
    for (int iter = 0; iter < 300; ++iter) {
        std::string input;
        std::size_t n = 1 + rng() % 20;
        for (std::size_t k = 0; k < n; ++k) {
            input += pieces[rng() % pieces.size()];
        }
        std::string once = strip_html(input);
        CHECK(strip_html(once) == once);
    }
}

TEST_CASE("tokenize splits on whitespace and strips punctuation") {
    auto tokens = tokenize("Act now. Offer ends.");
    REQUIRE(tokens.size() == 4);
    CHECK(tokens[0].text == "Act");
    CHECK(tokens[1].text == "now");
    CHECK(tokens[2].text == "Offer");
    CHECK(tokens[3].text == "ends");

    CHECK(tokenize("don't stop").size() == 2);
    CHECK(tokenize("don't stop")[0].text == "don't");
    CHECK(tokenize("... !!! ???").empty());
    CHECK(tokenize("  ").empty());
    CHECK(tokenize("(e.g. this)")[0].text == "e.g");

    auto offsets = tokenize("  hi, world ");
    REQUIRE(offsets.size() == 2);
    CHECK(offsets[0].char_start == 2);
    CHECK(offsets[0].char_end == 4);
    std::string src = "  hi, world ";
    CHECK(src.substr(offsets[1].char_start,
                     offsets[1].char_end - offsets[1].char_start) == "world");
}

TEST_CASE("tokenize handles unicode whitespace and punctuation") {
    auto tokens = tokenize("caf\xC3\xA9\xC2\xA0time");  // NBSP separator
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].text == "caf\xC3\xA9");
    auto quoted = tokenize("\xE2\x80\x9Cquoted\xE2\x80\x9D word");
    REQUIRE(quoted.size() == 2);
    CHECK(quoted[0].text == "quoted");
}

TEST_CASE("segment_sentences splits on terminators") {
    auto s = segment_sentences("Click here. Thanks!");
    REQUIRE(s.size() == 2);
    CHECK(s[0].text == "Click here.");
    CHECK(s[1].text == "Thanks!");
    CHECK(s[0].index == 0);
    CHECK(s[1].index == 1);
}

TEST_CASE("segment_sentences abbreviation guard") {
    auto s = segment_sentences("Dear Mr. Smith, see attached.");
    REQUIRE(s.size() == 1);
    CHECK(s[0].text == "Dear Mr. Smith, see attached.");

    auto s2 = segment_sentences("See examples, e.g. This one.");
    REQUIRE(s2.size() == 1);

    auto s3 = segment_sentences("It ended. Dr. Jones left. 42 remained.");
    REQUIRE(s3.size() == 3);
}

TEST_CASE("segment_sentences empty and degenerate input") {
    CHECK(segment_sentences("").empty());
    CHECK(segment_sentences("   \n\n  ").empty());
    CHECK(segment_sentences("!!! ??? ...").empty());
}

TEST_CASE("segment_sentences paragraph breaks always split") {
    auto s = segment_sentences("no terminator here\n\nnext paragraph");
    REQUIRE(s.size() == 2);
    CHECK(s[0].text == "no terminator here");
    auto single = segment_sentences("one line\nsame sentence");
    REQUIRE(single.size() == 1);
}

TEST_CASE("segment_sentences splits only before uppercase or digit") {
    CHECK(segment_sentences("wait for it. then go").size() == 1);
    CHECK(segment_sentences("wait for it. Then go").size() == 2);
    CHECK(segment_sentences("version 2. 5 is out").size() == 2);
}

TEST_CASE("segment keeps punctuation-only chunks attached") {
    auto s = segment_sentences("Really?! Yes. !!!");
    REQUIRE(s.size() == 2);
    // the trailing bare punctuation belongs to the last sentence
    CHECK(s[1].char_end == std::string("Really?! Yes. !!!").size());
    for (const auto& sent : s) CHECK(!sent.tokens.empty());
}

TEST_CASE("segmentation reconstruction: gaps are whitespace only") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> words = {"alpha", "Beta",  "gamma!", "Delta.",
                                            "Mr.",   "crazy?", "42",     "..."};
    const std::vector<std::string> seps = {" ", "  ", "\n", "\n\n", " \t "};
    for (int iter = 0; iter < 200; ++iter) {
        std::string text;
        std::size_t n = 1 + rng() % 30;
        for (std::size_t k = 0; k < n; ++k) {
            text += words[rng() % words.size()];
            text += seps[rng() % seps.size()];
        }
        auto sentences = segment_sentences(text);
        std::size_t pos = 0;
        for (const auto& sent : sentences) {
            REQUIRE(sent.char_start >= pos);
            for (std::size_t i = pos; i < sent.char_start; ++i) {
                CHECK(std::isspace(static_cast<unsigned char>(text[i])));
            }
            CHECK(text.substr(sent.char_start, sent.char_end - sent.char_start) ==
                  sent.text);
            pos = sent.char_end;
        }
        for (std::size_t i = pos; i < text.size(); ++i) {
            bool ws = std::isspace(static_cast<unsigned char>(text[i]));
            bool all_empty = sentences.empty();
            CHECK((ws || all_empty));
        }
    }
}

TEST_CASE("make_body totals equal per-sentence token counts") {
    EmailBody body = make_body("One two three. Four five.  Six.");
    REQUIRE(body.sentences.size() == 3);
    std::size_t total = 0;
    for (const auto& s : body.sentences) total += s.tokens.size();
    CHECK(body.total_tokens == total);
    CHECK(body.total_tokens == 6);
}

TEST_CASE("extractive fidelity of token offsets") {
    EmailBody body = make_body("Please click the link. Act now!");
    for (const auto& s : body.sentences) {
        for (const auto& t : s.tokens) {
            CHECK(body.text.substr(t.char_start, t.char_end - t.char_start) ==
                  t.text);
        }
    }
}
