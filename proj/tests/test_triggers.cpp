#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "phishtriage/errors.hpp"
#include "phishtriage/text.hpp"
#include "phishtriage/triggers.hpp"

using namespace phishtriage;

namespace {

Sentence sentence_of(const std::string& text) {
    Sentence s;
    s.index = 0;
    s.char_start = 0;
    s.char_end = text.size();
    s.text = text;
    s.tokens = tokenize(text);
    return s;
}

constexpr std::size_t idx(TriggerClass c) { return static_cast<std::size_t>(c); }

// Fixed-output backend for contract tests.
struct ScriptedTriggerBackend final : TriggerBackend {
    TriggerVector probs{};
    std::string id() const override { return "scripted"; }
    std::vector<TriggerDistribution> classify(
        const std::vector<Sentence>& sentences) override {
        std::vector<TriggerDistribution> out;
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            out.push_back({i, probs});
        }
        return out;
    }
};

}  // namespace

TEST_CASE("trigger class names round-trip in canonical order") {
    CHECK(trigger_class_name(TriggerClass::SocialProof) == "SocialProof");
    CHECK(trigger_class_from_name("Scarcity") == TriggerClass::Scarcity);
    CHECK_FALSE(trigger_class_from_name("Fear").has_value());
    CHECK(kTriggerClassNames[6] == "None");
}

TEST_CASE("lexicon_classify: zero hits means None") {
    auto dist = lexicon_classify(sentence_of("Hope you had a nice weekend."),
                                 Lexicon::builtin());
    TriggerVector expect{};
    expect[idx(TriggerClass::None)] = 1.0;
    CHECK(dist.probs == expect);
}

TEST_CASE("lexicon_classify: authority example from the shipped lexicon") {
    // "manager" and "comply" are the only hits
    auto dist = lexicon_classify(
        sentence_of("Your manager has approved this; comply immediately"),
        Lexicon::builtin());
    CHECK(argmax_class(dist.probs) == TriggerClass::Authority);
    CHECK(dist.probs[idx(TriggerClass::Authority)] == doctest::Approx(1.0));
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        if (c != idx(TriggerClass::Authority)) CHECK(dist.probs[c] == 0.0);
    }
}

TEST_CASE("lexicon_classify: proportional hit counts") {
    Lexicon lex = Lexicon::parse(
        "Authority\tmanager\nAuthority\tofficial\nScarcity\texpires\n", "test");
    auto dist = lexicon_classify(
        sentence_of("The manager and the official said it expires"), lex);
    CHECK(dist.probs[idx(TriggerClass::Authority)] == doctest::Approx(2.0 / 3));
    CHECK(dist.probs[idx(TriggerClass::Scarcity)] == doctest::Approx(1.0 / 3));
    CHECK(dist.probs[idx(TriggerClass::None)] == 0.0);
}

TEST_CASE("lexicon_classify: one token can hit several classes") {
    Lexicon lex = Lexicon::parse("Authority\tboard\nSocialProof\tboard\n", "t");
    auto dist = lexicon_classify(sentence_of("the board met"), lex);
    CHECK(dist.probs[idx(TriggerClass::Authority)] == doctest::Approx(0.5));
    CHECK(dist.probs[idx(TriggerClass::SocialProof)] == doctest::Approx(0.5));
}

TEST_CASE("lexicon_classify: multi-word terms match token n-grams") {
    Lexicon lex = Lexicon::parse("Scarcity\twithin 24 hours\n", "t");
    auto hit = lexicon_classify(
        sentence_of("Reply within 24 hours or lose access"), lex);
    CHECK(hit.probs[idx(TriggerClass::Scarcity)] == doctest::Approx(1.0));
    auto miss = lexicon_classify(
        sentence_of("Reply within about 24 hours"), lex);
    CHECK(miss.probs[idx(TriggerClass::None)] == doctest::Approx(1.0));
}

TEST_CASE("lexicon argmax invariant under token duplication") {
    const Lexicon& lex = Lexicon::builtin();
    Sentence base = sentence_of("The manager said the deadline expires");
    Sentence doubled = sentence_of(
        "The manager said the deadline expires "
        "The manager said the deadline expires");
    auto d1 = lexicon_classify(base, lex);
    auto d2 = lexicon_classify(doubled, lex);
    CHECK(argmax_class(d1.probs) == argmax_class(d2.probs));
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        CHECK(d1.probs[c] == doctest::Approx(d2.probs[c]).epsilon(1e-12));
    }
}

TEST_CASE("lexicon parser rejects bad lines") {
    CHECK_THROWS_AS(Lexicon::parse("NoTabHere\n", "t"), SchemaError);
    CHECK_THROWS_AS(Lexicon::parse("Fear\tghost\n", "t"), SchemaError);
    CHECK_THROWS_AS(Lexicon::parse("None\tnothing\n", "t"), SchemaError);
    Lexicon ok = Lexicon::parse("# comment\n\nLiking\tfriend\n", "t");
    CHECK_FALSE(ok.empty());
}

TEST_CASE("classify_sentence validates backend output") {
    ScriptedTriggerBackend backend;
    Sentence s = sentence_of("any words at all");

    backend.probs = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9};
    CHECK_THROWS_AS(classify_sentence(s, backend), BackendViolation);

    backend.probs = {0.0, 0.0, 0.0, 0.5005, 0.0, 0.5, 0.0};
    auto renormalized = classify_sentence(s, backend);
    double sum = 0.0;
    for (double p : renormalized.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    backend.probs = {-0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 1.1};
    CHECK_THROWS_AS(classify_sentence(s, backend), BackendViolation);

    Sentence empty;
    empty.text = "...";
    CHECK_THROWS_AS(classify_sentence(empty, backend), EmptySentence);
}

TEST_CASE("distributions always sum to one through any backend") {
    std::mt19937_64 rng(3);
    LexiconTriggerBackend backend;
    const std::vector<std::string> vocab = {
        "manager", "expires",  "friend", "free",  "everyone", "continue",
        "window",  "stapler",  "garden", "hello", "deadline", "urgent"};
    for (int iter = 0; iter < 500; ++iter) {
        std::string text;
        std::size_t n = 1 + rng() % 10;
        for (std::size_t k = 0; k < n; ++k) {
            if (k) text += ' ';
            text += vocab[rng() % vocab.size()];
        }
        auto dist = classify_sentence(sentence_of(text), backend);
        double sum = 0.0;
        for (double p : dist.probs) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("compute_profile: centered intensities give no spikes") {
    CorpusBaseline baseline;
    baseline.corpus_label = "t";
    baseline.n_emails = 10;
    baseline.mean = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.4};
    baseline.stddev = {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.1};

    TriggerDistribution d{0, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.4}};
    auto profile = compute_profile({d}, baseline, 2.0);
    for (double z : profile.z) CHECK(z == 0.0);
    CHECK(profile.spikes.empty());
}

TEST_CASE("compute_profile: 2.5 sigma above the mean spikes at 2.0") {
    CorpusBaseline baseline;
    baseline.corpus_label = "t";
    baseline.n_emails = 10;
    baseline.mean = {0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.9};
    baseline.stddev = {0.1, 0.1, 0.1, 0.1, 0.1, 0.08, 0.1};

    double scarcity = 0.1 + 2.5 * 0.08;
    TriggerDistribution d{0, {0.0, 0.0, 0.0, 0.0, 0.0, scarcity, 1.0 - scarcity}};
    auto profile = compute_profile({d}, baseline, 2.0);
    CHECK(profile.z[idx(TriggerClass::Scarcity)] == doctest::Approx(2.5));
    REQUIRE(profile.spikes.size() == 1);
    CHECK(profile.spikes[0] == TriggerClass::Scarcity);
}

TEST_CASE("compute_profile: zero stddev rule") {
    CorpusBaseline baseline;
    baseline.corpus_label = "t";
    baseline.n_emails = 5;
    baseline.mean = {0.0, 0.0, 0.0, 0.05, 0.0, 0.0, 0.95};
    baseline.stddev = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

    TriggerDistribution above{0, {0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.8}};
    auto profile = compute_profile({above}, baseline, 2.0);
    CHECK(std::isinf(profile.z[idx(TriggerClass::Authority)]));
    CHECK(profile.z[idx(TriggerClass::Authority)] > 0);
    REQUIRE(profile.spikes.size() == 1);
    CHECK(profile.spikes[0] == TriggerClass::Authority);

    TriggerDistribution at_mean{0, {0.0, 0.0, 0.0, 0.05, 0.0, 0.0, 0.95}};
    auto flat = compute_profile({at_mean}, baseline, 2.0);
    CHECK(flat.z[idx(TriggerClass::Authority)] == 0.0);
    CHECK(flat.spikes.empty());
}

TEST_CASE("compute_profile rejects empty input") {
    CHECK_THROWS_AS(compute_profile({}, CorpusBaseline::builtin(), 2.0),
                    NoSentences);
}

TEST_CASE("profile intensity sums to one and serializes deterministically") {
    std::vector<TriggerDistribution> dists = {
        {0, {0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0}},
        {1, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0}},
        {2, {0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.5}},
    };
    auto profile = compute_profile(dists, CorpusBaseline::builtin(), 2.0);
    double sum = 0.0;
    for (double v : profile.intensity) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(profile.to_json() == profile.to_json());
    auto again = compute_profile(dists, CorpusBaseline::builtin(), 2.0);
    CHECK(profile.to_json() == again.to_json());
}

TEST_CASE("spike monotonicity: raising one intensity never drops its spike") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int iter = 0; iter < 300; ++iter) {
        CorpusBaseline baseline;
        baseline.corpus_label = "r";
        baseline.n_emails = 3;
        for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
            baseline.mean[c] = unit(rng) * 0.3;
            baseline.stddev[c] = unit(rng) * 0.2;  // sometimes ~0
        }
        std::size_t c = rng() % kNumTriggers;
        double base_value = unit(rng) * 0.5;
        double bump = unit(rng) * (1.0 - base_value - 0.01);
        double none_low = 1.0 - base_value - bump;

        TriggerVector low{}, high{};
        low[c] = base_value;
        low[idx(TriggerClass::None)] = base_value <= 1.0 ? 1.0 - base_value : 0.0;
        high[c] = base_value + bump;
        high[idx(TriggerClass::None)] = none_low;

        auto p_low = compute_profile({{0, low}}, baseline, 2.0);
        auto p_high = compute_profile({{0, high}}, baseline, 2.0);
        bool low_spikes =
            std::find(p_low.spikes.begin(), p_low.spikes.end(),
                      static_cast<TriggerClass>(c)) != p_low.spikes.end();
        bool high_spikes =
            std::find(p_high.spikes.begin(), p_high.spikes.end(),
                      static_cast<TriggerClass>(c)) != p_high.spikes.end();
        if (low_spikes) CHECK(high_spikes);
    }
}

TEST_CASE("fit_baseline: identical emails give zero variance") {
    LexiconTriggerBackend backend;
    int remaining = 2;
    auto next = [&]() -> std::optional<EmailBody> {
        if (remaining-- <= 0) return std::nullopt;
        return make_body("The deadline expires soon. Plain words follow.");
    };
    CorpusBaseline baseline = fit_baseline(next, backend, "twins");
    CHECK(baseline.n_emails == 2);
    for (double s : baseline.stddev) CHECK(s == doctest::Approx(0.0));
}

TEST_CASE("fit_baseline matches a two-pass oracle") {
    LexiconTriggerBackend backend;
    const std::vector<std::string> texts = {
        "The manager set a deadline. Nothing else happened.",
        "Free coffee for everyone. The garden looks nice.",
        "Plain words only here. Truly nothing to see.",
    };
    std::size_t i = 0;
    auto next = [&]() -> std::optional<EmailBody> {
        if (i >= texts.size()) return std::nullopt;
        return make_body(texts[i++]);
    };
    CorpusBaseline streamed = fit_baseline(next, backend, "oracle");

    // naive two-pass statistics
    std::vector<TriggerVector> intensities;
    for (const std::string& text : texts) {
        EmailBody body = make_body(text);
        auto dists = classify_body(body, backend);
        TriggerVector mean{};
        for (const auto& d : dists) {
            for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
                mean[c] += d.probs[c];
            }
        }
        for (double& v : mean) v /= static_cast<double>(dists.size());
        intensities.push_back(mean);
    }
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        double m = 0.0;
        for (const auto& v : intensities) m += v[c];
        m /= static_cast<double>(intensities.size());
        double var = 0.0;
        for (const auto& v : intensities) var += (v[c] - m) * (v[c] - m);
        var /= static_cast<double>(intensities.size() - 1);
        CHECK(streamed.mean[c] == doctest::Approx(m).epsilon(1e-9));
        CHECK(streamed.stddev[c] ==
              doctest::Approx(std::sqrt(var)).epsilon(1e-9));
    }
}

TEST_CASE("fit_baseline requires two usable emails") {
    LexiconTriggerBackend backend;
    int remaining = 1;
    auto next = [&]() -> std::optional<EmailBody> {
        if (remaining-- <= 0) return std::nullopt;
        return make_body("Single email only.");
    };
    CHECK_THROWS_AS(fit_baseline(next, backend, "one"), InsufficientCorpus);
}

TEST_CASE("baseline JSON round-trip") {
    CorpusBaseline b;
    b.corpus_label = "demo";
    b.n_emails = 4;
    b.mean = {0.1, 0.0, 0.0, 0.05, 0.0, 0.25, 0.6};
    b.stddev = {0.01, 0.0, 0.0, 0.02, 0.0, 0.05, 0.1};
    CorpusBaseline parsed = CorpusBaseline::from_json(b.to_json());
    CHECK(parsed == b);
    CHECK(parsed.to_json() == b.to_json());

    CHECK_THROWS_AS(CorpusBaseline::from_json("[]"), SchemaError);
    CHECK_THROWS_AS(
        CorpusBaseline::from_json(
            R"({"corpus_label":"x","n_emails":1,"mean":[0,0,0,0,0,0,1],)"
            R"("stddev":[0,0,0,0,0,0,0]})"),
        SchemaError);
}
