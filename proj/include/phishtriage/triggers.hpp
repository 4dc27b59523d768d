#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishtriage/email.hpp"

namespace phishtriage {

// Canonical order; serialization depends on it.
enum class TriggerClass : int {
    Reciprocity = 0,
    Consistency,
    SocialProof,
    Authority,
    Liking,
    Scarcity,
    None,
};

inline constexpr std::size_t kNumTriggerClasses = 7;
inline constexpr std::size_t kNumTriggers = 6;  // without None

inline constexpr std::array<std::string_view, kNumTriggerClasses>
    kTriggerClassNames = {"Reciprocity", "Consistency", "SocialProof",
                          "Authority",   "Liking",      "Scarcity",
                          "None"};

std::string_view trigger_class_name(TriggerClass c);
std::optional<TriggerClass> trigger_class_from_name(std::string_view name);

using TriggerVector = std::array<double, kNumTriggerClasses>;

struct TriggerDistribution {
    std::size_t sentence_index = 0;
    TriggerVector probs{};  // each in [0,1], sums to 1 (+-1e-9)

    bool operator==(const TriggerDistribution&) const = default;
};

TriggerClass argmax_class(const TriggerVector& probs);

// Per-class term lists; multi-word terms match token n-grams.
class Lexicon {
public:
    using Term = std::vector<std::string>;  // lowercased tokens

    // Line format "<class>\t<term>"; blank lines and '#' comments ignored.
    static Lexicon parse(std::string_view tsv, std::string version);
    static const Lexicon& builtin();

    const std::vector<Term>& terms(TriggerClass c) const;
    const std::string& version() const { return version_; }
    bool empty() const;

private:
    std::array<std::vector<Term>, kNumTriggers> terms_;
    std::string version_ = "empty";
};

// Reference classification: per-class hit counts over lowercased tokens;
// zero hits everywhere means None=1, otherwise probabilities proportional
// to hits with None=0.
TriggerDistribution lexicon_classify(const Sentence& sentence,
                                     const Lexicon& lexicon);

class TriggerBackend {
public:
    virtual ~TriggerBackend() = default;
    virtual std::string id() const = 0;
    // One distribution per input sentence, sentence_index = position in
    // the input. Outputs are validated (and renormalized) by the caller.
    virtual std::vector<TriggerDistribution> classify(
        const std::vector<Sentence>& sentences) = 0;
};

class LexiconTriggerBackend final : public TriggerBackend {
public:
    explicit LexiconTriggerBackend(const Lexicon& lexicon = Lexicon::builtin())
        : lexicon_(&lexicon) {}
    std::string id() const override { return "reference-lexicon-v1"; }
    std::vector<TriggerDistribution> classify(
        const std::vector<Sentence>& sentences) override;

private:
    const Lexicon* lexicon_;
};

// Validates probs: non-negative, sum within 1e-3 of 1 (then renormalized).
// Throws BackendViolation otherwise.
TriggerVector validate_distribution(const TriggerVector& probs);

TriggerDistribution classify_sentence(const Sentence& sentence,
                                      TriggerBackend& backend);

// Classifies every sentence of a body (validated distributions, indices
// matching the body's sentence indices).
std::vector<TriggerDistribution> classify_body(const EmailBody& body,
                                               TriggerBackend& backend);

struct CorpusBaseline {
    std::string corpus_label;
    std::size_t n_emails = 0;  // >= 2
    TriggerVector mean{};
    TriggerVector stddev{};  // sample stddev (n-1), elementwise >= 0

    std::string to_json() const;  // canonical
    static CorpusBaseline from_json(std::string_view text);
    static const CorpusBaseline& builtin();

    bool operator==(const CorpusBaseline&) const = default;
};

struct TriggerProfile {
    TriggerVector intensity{};           // mean of per-sentence probs
    std::array<double, kNumTriggers> z{};  // vs baseline; +inf possible
    std::vector<TriggerClass> spikes;    // canonical order, triggers only

    std::string to_json() const;  // canonical

    bool operator==(const TriggerProfile&) const = default;
};

inline constexpr double kDefaultZSpike = 2.0;

// intensity = elementwise mean; z_c = (intensity_c - mean_c)/stddev_c,
// with the zero-stddev rule (+inf above the mean, 0 otherwise);
// spikes = {c : z_c >= z_spike}.
TriggerProfile compute_profile(const std::vector<TriggerDistribution>& dists,
                               const CorpusBaseline& baseline,
                               double z_spike = kDefaultZSpike);

// Streaming (Welford) per-email intensity statistics over a corpus of
// bodies. Bodies without sentences are skipped. Throws InsufficientCorpus
// when fewer than two usable emails arrive.
CorpusBaseline fit_baseline(
    const std::function<std::optional<EmailBody>()>& next_body,
    TriggerBackend& backend, std::string corpus_label);

}  // namespace phishtriage
