#include "phishtriage/pipeline.hpp"

namespace phishtriage {

Analyzer::Analyzer(AnalyzerConfig config) : config_(std::move(config)) {
    summarizer_ = std::make_unique<CentralitySummarizer>(config_.stopwords);
    trigger_backend_ = std::make_unique<LexiconTriggerBackend>(config_.lexicon);
    intent_backend_ = std::make_unique<RuleIntentBackend>(config_.rules);
}

void Analyzer::use_external_summarizer(BackendConnection& conn) {
    summarizer_ = std::make_unique<ExternalSummarizer>(conn);
}

void Analyzer::use_external_triggers(BackendConnection& conn) {
    trigger_backend_ = std::make_unique<ExternalTriggerBackend>(conn);
}

void Analyzer::use_external_intents(BackendConnection& conn) {
    intent_backend_ = std::make_unique<ExternalIntentBackend>(conn, config_.registry);
}

AnalysisResult Analyzer::analyze(const RawEmail& email) {
    AnalysisResult r;
    r.body = extract_body(email);
    r.summary = summarize(r.body, config_.policy, *summarizer_);
    r.distributions = classify_body(r.body, *trigger_backend_);
    r.profile = compute_profile(r.distributions, config_.baseline, config_.z_spike);
    r.spans = collect_spans(r.body, *intent_backend_, config_.registry);

    ReportMeta meta;
    meta.email_id = email.id;
    meta.policy_cap = config_.policy.hard_cap_words;
    meta.policy_fraction = config_.policy.fraction.str();
    meta.z_spike = config_.z_spike;
    meta.summarizer_backend = summarizer_->id();
    meta.trigger_backend = trigger_backend_->id();
    meta.intent_backend = intent_backend_->id();
    meta.stopwords_version = config_.stopwords.version();
    meta.lexicon_version = config_.lexicon.version();
    meta.rules_version = config_.rules.version();
    meta.registry_version = config_.registry.version();
    meta.baseline_label = config_.baseline.corpus_label;

    r.report = aggregate(r.body, r.summary, r.profile, r.distributions, r.spans,
                         meta);
    return r;
}

}  // namespace phishtriage
