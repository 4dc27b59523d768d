#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "phishtriage/errors.hpp"
#include "phishtriage/intents.hpp"
#include "phishtriage/text.hpp"

using namespace phishtriage;

namespace {

Sentence sentence_of(const std::string& text, std::size_t index = 0) {
    Sentence s;
    s.index = index;
    s.char_start = 0;
    s.char_end = text.size();
    s.text = text;
    s.tokens = tokenize(text);
    return s;
}

const char* kClickRule = R"([
  {"tag":"click_link","triggers":["click","follow","visit"],
   "objects":["link","url","here","below"],"gap":4}
])";

struct ScriptedIntentBackend final : IntentBackend {
    std::vector<IntentSpan> spans;
    std::string id() const override { return "scripted"; }
    std::vector<std::vector<IntentSpan>> tag(
        const std::vector<Sentence>& sentences) override {
        return std::vector<std::vector<IntentSpan>>(sentences.size(), spans);
    }
};

}  // namespace

TEST_CASE("registry parsing and closure") {
    const TagRegistry& reg = TagRegistry::builtin();
    CHECK(reg.contains("click_link"));
    CHECK(reg.contains("make_payment"));
    CHECK_FALSE(reg.contains("phone_scam"));
    CHECK(reg.tags().size() == 7);

    CHECK_THROWS_AS(TagRegistry::parse("{}", "t"), SchemaError);
    CHECK_THROWS_AS(TagRegistry::parse(R"(["BadTag"])", "t"), SchemaError);
    CHECK_THROWS_AS(TagRegistry::parse("[]", "t"), SchemaError);
}

TEST_CASE("rule table parsing validates against the registry") {
    TagRegistry reg = TagRegistry::parse(R"(["click_link"])", "t");
    RuleTable ok = RuleTable::parse(kClickRule, reg, "t");
    CHECK(ok.rules().size() == 1);
    CHECK(ok.rules()[0].gap == 4);

    const char* unknown_tag = R"([{"tag":"phone_scam","triggers":["call"],
                                   "objects":["number"],"gap":4}])";
    CHECK_THROWS_AS(RuleTable::parse(unknown_tag, reg, "t"), SchemaError);
    const char* no_objects = R"([{"tag":"click_link","triggers":["click"],
                                  "objects":[],"gap":4}])";
    CHECK_THROWS_AS(RuleTable::parse(no_objects, reg, "t"), SchemaError);
}

TEST_CASE("rule_tag emits the minimal covering span") {
    TagRegistry reg = TagRegistry::parse(R"(["click_link"])", "t");
    RuleTable rules = RuleTable::parse(kClickRule, reg, "t");

    auto spans = rule_tag(sentence_of("please click here"), rules);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].token_start == 1);
    CHECK(spans[0].token_end == 3);
    CHECK(spans[0].tag == "click_link");
    CHECK(spans[0].confidence == 1.0);
}

TEST_CASE("rule_tag respects the token gap") {
    TagRegistry reg = TagRegistry::parse(R"(["click_link"])", "t");
    RuleTable rules = RuleTable::parse(kClickRule, reg, "t");

    // trigger and object six positions apart (five tokens between) at g=4
    auto none = rule_tag(
        sentence_of("click aa bb cc dd ee link"), rules);
    CHECK(none.empty());
    // four tokens between is within the gap
    auto hit = rule_tag(sentence_of("click aa bb cc dd link"), rules);
    REQUIRE(hit.size() == 1);
    CHECK(hit[0].token_start == 0);
    CHECK(hit[0].token_end == 6);
}

TEST_CASE("rule_tag object may precede the trigger") {
    TagRegistry reg = TagRegistry::parse(R"(["click_link"])", "t");
    RuleTable rules = RuleTable::parse(kClickRule, reg, "t");
    auto spans = rule_tag(sentence_of("the link you should click"), rules);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].token_start == 1);
    CHECK(spans[0].token_end == 5);
}

TEST_CASE("rule_tag: two different tags on one sentence") {
    auto spans = rule_tag(
        sentence_of("Click the link below to verify your account"),
        RuleTable::builtin());
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].tag == "click_link");
    CHECK(spans[0].token_start == 0);
    CHECK(spans[0].token_end >= 3);  // covers "Click the link"
    CHECK(spans[1].tag == "provide_credentials");
    CHECK(spans[1].token_start == 5);
    CHECK(spans[1].token_end == 8);  // "verify your account"
}

TEST_CASE("rule_tag: benign sentence yields nothing") {
    CHECK(rule_tag(sentence_of("Hope you had a nice weekend."),
                   RuleTable::builtin())
              .empty());
}

TEST_CASE("merge_spans unions overlapping same-tag spans") {
    std::vector<IntentSpan> spans = {
        {0, 0, 3, "click_link", 0.7},
        {0, 2, 5, "click_link", 0.9},
        {0, 2, 4, "make_payment", 1.0},
        {1, 0, 2, "click_link", 1.0},
    };
    auto merged = merge_spans(spans);
    REQUIRE(merged.size() == 3);
    CHECK(merged[0].sentence_index == 0);
    CHECK(merged[0].token_start == 0);
    CHECK(merged[0].token_end == 5);
    CHECK(merged[0].tag == "click_link");
    CHECK(merged[0].confidence == doctest::Approx(0.9));
    CHECK(merged[1].tag == "make_payment");
    CHECK(merged[2].sentence_index == 1);

    // idempotence
    CHECK(merge_spans(merged) == merged);

    // half-open adjacency does not merge
    std::vector<IntentSpan> touching = {{0, 0, 2, "click_link", 1.0},
                                        {0, 2, 4, "click_link", 1.0}};
    CHECK(merge_spans(touching).size() == 2);
}

TEST_CASE("tag_sentence validates backend spans") {
    ScriptedIntentBackend backend;
    Sentence s = sentence_of("some words to look at", 3);

    backend.spans = {{0, 0, 99, "click_link", 1.0}};
    CHECK_THROWS_AS(tag_sentence(s, backend), BackendViolation);

    backend.spans = {{0, 2, 2, "click_link", 1.0}};
    CHECK_THROWS_AS(tag_sentence(s, backend), BackendViolation);

    backend.spans = {{0, 0, 2, "click_link", 1.5}};
    CHECK_THROWS_AS(tag_sentence(s, backend), BackendViolation);

    backend.spans = {{0, 0, 2, "phone_scam", 1.0}};
    CHECK_THROWS_AS(tag_sentence(s, backend), BackendViolation);

    backend.spans = {{0, 0, 2, "click_link", 1.0}, {0, 1, 3, "click_link", 0.5}};
    auto merged = tag_sentence(s, backend);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].sentence_index == 3);  // rewritten to the real index
    CHECK(merged[0].token_end == 3);
}

TEST_CASE("collect_spans orders by sentence then token") {
    EmailBody body = make_body(
        "Please click the link below. Nothing special here at all. "
        "Pay the invoice and confirm your password.");
    REQUIRE(body.sentences.size() == 3);
    RuleIntentBackend backend;
    auto spans = collect_spans(body, backend);
    REQUIRE(spans.size() >= 3);
    for (std::size_t k = 1; k < spans.size(); ++k) {
        bool ordered =
            spans[k - 1].sentence_index < spans[k].sentence_index ||
            (spans[k - 1].sentence_index == spans[k].sentence_index &&
             spans[k - 1].token_start <= spans[k].token_start);
        CHECK(ordered);
    }
    CHECK(spans.front().sentence_index == 0);
    bool has_payment = std::any_of(spans.begin(), spans.end(), [](const auto& s) {
        return s.tag == "make_payment" && s.sentence_index == 2;
    });
    CHECK(has_payment);
    for (const auto& span : spans) {
        CHECK(span.sentence_index != 1);  // the benign middle sentence
    }
}

TEST_CASE("collect_spans on an empty body") {
    EmailBody body;
    RuleIntentBackend backend;
    CHECK(collect_spans(body, backend).empty());
}

TEST_CASE("collect_spans attaches the sentence index to violations") {
    struct OneBadBackend final : IntentBackend {
        std::string id() const override { return "bad"; }
        std::vector<std::vector<IntentSpan>> tag(
            const std::vector<Sentence>& sentences) override {
            std::vector<std::vector<IntentSpan>> out(sentences.size());
            out.back().push_back({0, 0, 9999, "click_link", 1.0});
            return out;
        }
    };
    EmailBody body = make_body("First sentence here. Second sentence here.");
    OneBadBackend backend;
    try {
        collect_spans(body, backend);
        FAIL("expected BackendViolation");
    } catch (const BackendViolation& e) {
        CHECK(std::string(e.what()).find("sentence 1") != std::string::npos);
    }
}

TEST_CASE("rule locality: editing one sentence leaves others unchanged") {
    EmailBody a = make_body("Click the link now. The garden is green.");
    EmailBody b = make_body("Click the link now. Wire the money today.");
    auto spans_a = rule_tag(a.sentences[0], RuleTable::builtin());
    auto spans_b = rule_tag(b.sentences[0], RuleTable::builtin());
    CHECK(spans_a == spans_b);
}

TEST_CASE("all-benign multi-sentence body produces no spans") {
    EmailBody body = make_body(
        "The garden looked lovely in April. We planted more tomatoes. "
        "A squirrel stole three of them. The fence needs a new coat. "
        "Morning walks start at seven. The kettle finally broke. "
        "We bought a blue one. Rain is forecast for Sunday. "
        "The library extended its hours. Chess night moved to Tuesday.");
    REQUIRE(body.sentences.size() == 10);
    RuleIntentBackend backend;
    CHECK(collect_spans(body, backend).empty());
}
