#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phishtriage/email.hpp"
#include "phishtriage/intents.hpp"
#include "phishtriage/summarize.hpp"
#include "phishtriage/triggers.hpp"

namespace phishtriage {

struct DensityMetrics {
    double trigger_density = 0.0;   // tokens of argmax!=None sentences / total
    double intent_density = 0.0;    // tokens covered by intent spans / total
    double combined_density = 0.0;  // union of both token sets / total

    bool operator==(const DensityMetrics&) const = default;
};

// Everything needed to reproduce a report (reproducibility contract).
struct ReportMeta {
    std::string email_id;
    std::optional<std::size_t> policy_cap;
    std::string policy_fraction = "1/5";
    double z_spike = kDefaultZSpike;
    std::string summarizer_backend;
    std::string trigger_backend;
    std::string intent_backend;
    std::string stopwords_version;
    std::string lexicon_version;
    std::string rules_version;
    std::string registry_version;
    std::string baseline_label;

    bool operator==(const ReportMeta&) const = default;
};

struct SentenceTrigger {
    std::size_t sentence_index = 0;
    TriggerClass top = TriggerClass::None;
    double prob = 0.0;

    bool operator==(const SentenceTrigger&) const = default;
};

struct ResolvedSpan {
    IntentSpan span;
    std::string text;  // verbatim substring of the email

    bool operator==(const ResolvedSpan&) const = default;
};

struct PhishReport {
    std::string email_id;
    Summary summary;
    std::vector<std::string> summary_texts;  // aligned with summary.selected
    TriggerProfile profile;
    TriggerVector max_intensity{};  // per-class max over sentences
    std::vector<SentenceTrigger> sentence_triggers;  // one per sentence
    std::vector<ResolvedSpan> spans;
    DensityMetrics densities;
    ReportMeta meta;

    bool operator==(const PhishReport&) const = default;
};

// Combines the three pipeline outputs, computing densities from the
// per-sentence trigger distributions and the intent spans. Throws
// IndexMismatch when anything does not resolve against the body.
PhishReport aggregate(const EmailBody& body, const Summary& summary,
                      const TriggerProfile& profile,
                      const std::vector<TriggerDistribution>& distributions,
                      const std::vector<IntentSpan>& spans,
                      const ReportMeta& meta);

// Canonical bytes: sorted keys, fixed class order, reals at 6 significant
// digits; byte-identical across runs and platforms. Schema "report_v1".
std::string render_json(const PhishReport& report);

// Inverse of render_json. Rejects unregistered intent tags.
PhishReport parse_report(std::string_view bytes,
                         const TagRegistry& registry = TagRegistry::builtin());

// Fixed section order: summary, trigger spikes, suspicious intents,
// densities, one advisory line. Never renders a verdict.
std::string render_text(const PhishReport& report);

// Self-contained HTML: full body with intent spans highlighted, spiking
// sentences outlined, summary sentences badged. All email-derived text is
// entity-escaped.
std::string render_html(const PhishReport& report, const EmailBody& body);

}  // namespace phishtriage
