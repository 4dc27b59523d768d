#pragma once

#include <memory>

#include "phishtriage/backend_client.hpp"
#include "phishtriage/email.hpp"
#include "phishtriage/ingest.hpp"
#include "phishtriage/intents.hpp"
#include "phishtriage/report.hpp"
#include "phishtriage/summarize.hpp"
#include "phishtriage/triggers.hpp"

namespace phishtriage {

struct AnalyzerConfig {
    LengthPolicy policy;
    double z_spike = kDefaultZSpike;
    StopwordSet stopwords = StopwordSet::builtin();
    Lexicon lexicon = Lexicon::builtin();
    RuleTable rules = RuleTable::builtin();
    TagRegistry registry = TagRegistry::builtin();
    CorpusBaseline baseline = CorpusBaseline::builtin();
};

struct AnalysisResult {
    EmailBody body;
    Summary summary;
    std::vector<TriggerDistribution> distributions;
    TriggerProfile profile;
    std::vector<IntentSpan> spans;
    PhishReport report;
};

// Wires the three pipelines behind one entry point. Reference backends by
// default; any seam can be switched to an external protocol connection.
// analyze() holds no mutable state, so concurrent calls are fine
// (external connections serialize internally).
class Analyzer {
public:
    explicit Analyzer(AnalyzerConfig config);
    Analyzer(const Analyzer&) = delete;
    Analyzer& operator=(const Analyzer&) = delete;

    void use_external_summarizer(BackendConnection& conn);
    void use_external_triggers(BackendConnection& conn);
    void use_external_intents(BackendConnection& conn);

    AnalysisResult analyze(const RawEmail& email);

    const AnalyzerConfig& config() const { return config_; }
    TriggerBackend& trigger_backend() { return *trigger_backend_; }
    IntentBackend& intent_backend() { return *intent_backend_; }

private:
    AnalyzerConfig config_;
    std::unique_ptr<SummarizerBackend> summarizer_;
    std::unique_ptr<TriggerBackend> trigger_backend_;
    std::unique_ptr<IntentBackend> intent_backend_;
};

}  // namespace phishtriage
