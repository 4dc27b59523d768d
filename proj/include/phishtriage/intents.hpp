#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "phishtriage/email.hpp"

namespace phishtriage {

// Closed set of intent labels for one run. Unknown labels are rejected
// wherever spans or reports are deserialized.
class TagRegistry {
public:
    // JSON array of lowercase snake_case strings.
    static TagRegistry parse(std::string_view json_text, std::string version);
    static const TagRegistry& builtin();

    bool contains(std::string_view tag) const;
    const std::vector<std::string>& tags() const { return tags_; }
    const std::string& version() const { return version_; }

private:
    std::vector<std::string> tags_;
    std::string version_ = "empty";
};

struct IntentSpan {
    std::size_t sentence_index = 0;
    std::size_t token_start = 0;  // half-open token range in the sentence
    std::size_t token_end = 0;
    std::string tag;
    double confidence = 1.0;

    bool operator==(const IntentSpan&) const = default;
};

inline constexpr std::size_t kDefaultTokenGap = 4;

// A rule fires when a trigger term and an object term co-occur with at
// most `gap` tokens strictly between them.
struct IntentRule {
    std::string tag;
    std::vector<std::vector<std::string>> triggers;  // lowercased token seqs
    std::vector<std::vector<std::string>> objects;
    std::size_t gap = kDefaultTokenGap;
};

class RuleTable {
public:
    // JSON list of {"tag","triggers":[...],"objects":[...],"gap":int}.
    static RuleTable parse(std::string_view json_text, const TagRegistry& registry,
                           std::string version);
    static const RuleTable& builtin();

    const std::vector<IntentRule>& rules() const { return rules_; }
    const std::string& version() const { return version_; }
    bool empty() const { return rules_.empty(); }

private:
    std::vector<IntentRule> rules_;
    std::string version_ = "empty";
};

class IntentBackend {
public:
    virtual ~IntentBackend() = default;
    virtual std::string id() const = 0;
    // Per-sentence span lists, aligned with the input. sentence_index in
    // the returned spans is relative (position in the input vector).
    virtual std::vector<std::vector<IntentSpan>> tag(
        const std::vector<Sentence>& sentences) = 0;
};

class RuleIntentBackend final : public IntentBackend {
public:
    explicit RuleIntentBackend(const RuleTable& table = RuleTable::builtin())
        : table_(&table) {}
    std::string id() const override { return "reference-rules-v1"; }
    std::vector<std::vector<IntentSpan>> tag(
        const std::vector<Sentence>& sentences) override;

private:
    const RuleTable* table_;
};

// Deterministic reference tagging: each (trigger, object) co-occurrence
// within the gap emits the minimal covering span with confidence 1.0;
// overlapping same-tag spans are merged.
std::vector<IntentSpan> rule_tag(const Sentence& sentence,
                                 const RuleTable& rules);

// Merges overlapping spans of equal (sentence_index, tag): union of the
// ranges, max confidence. Idempotent.
std::vector<IntentSpan> merge_spans(std::vector<IntentSpan> spans);

// Runs the backend on one sentence and enforces the span invariants
// (bounds, confidence range, registered tag); merges same-tag overlaps;
// sorts by (token_start, tag).
std::vector<IntentSpan> tag_sentence(
    const Sentence& sentence, IntentBackend& backend,
    const TagRegistry& registry = TagRegistry::builtin());

// Whole-body tagging ordered by (sentence_index, token_start).
std::vector<IntentSpan> collect_spans(
    const EmailBody& body, IntentBackend& backend,
    const TagRegistry& registry = TagRegistry::builtin());

}  // namespace phishtriage
