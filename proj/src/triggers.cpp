#include "phishtriage/triggers.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "phishtriage/defaults.hpp"
#include "phishtriage/errors.hpp"
#include "phishtriage/jsonfmt.hpp"
#include "phishtriage/text.hpp"

namespace phishtriage {

std::string_view trigger_class_name(TriggerClass c) {
    return kTriggerClassNames[static_cast<std::size_t>(c)];
}

std::optional<TriggerClass> trigger_class_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumTriggerClasses; ++i) {
        if (kTriggerClassNames[i] == name) return static_cast<TriggerClass>(i);
    }
    return std::nullopt;
}

TriggerClass argmax_class(const TriggerVector& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;  // ties keep canonical order
    }
    return static_cast<TriggerClass>(best);
}

Lexicon Lexicon::parse(std::string_view tsv, std::string version) {
    Lexicon lex;
    lex.version_ = std::move(version);
    std::size_t i = 0;
    std::size_t line_no = 0;
    while (i <= tsv.size()) {
        std::size_t eol = tsv.find('\n', i);
        std::string_view line =
            tsv.substr(i, (eol == std::string_view::npos ? tsv.size() : eol) - i);
        i = eol == std::string_view::npos ? tsv.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw SchemaError("lexicon line " + std::to_string(line_no) +
                              ": expected <class>\\t<term>");
        }
        auto cls = trigger_class_from_name(line.substr(0, tab));
        if (!cls || *cls == TriggerClass::None) {
            throw SchemaError("lexicon line " + std::to_string(line_no) +
                              ": unknown trigger class \"" +
                              std::string(line.substr(0, tab)) + "\"");
        }
        Term term;
        for (const Token& t : tokenize(line.substr(tab + 1))) {
            term.push_back(ascii_lower(t.text));
        }
        if (term.empty()) {
            throw SchemaError("lexicon line " + std::to_string(line_no) +
                              ": empty term");
        }
        lex.terms_[static_cast<std::size_t>(*cls)].push_back(std::move(term));
    }
    return lex;
}

const Lexicon& Lexicon::builtin() {
    static const Lexicon lex = parse(defaults::trigger_lexicon_tsv(),
                                     std::string(defaults::kLexiconVersion));
    return lex;
}

const std::vector<Lexicon::Term>& Lexicon::terms(TriggerClass c) const {
    return terms_[static_cast<std::size_t>(c)];
}

bool Lexicon::empty() const {
    for (const auto& t : terms_) {
        if (!t.empty()) return false;
    }
    return true;
}

namespace {

// Occurrences of `term` as a token n-gram (overlapping occurrences count).
std::size_t count_occurrences(const std::vector<std::string>& tokens,
                              const Lexicon::Term& term) {
    if (term.empty() || term.size() > tokens.size()) return 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + term.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < term.size(); ++k) {
            if (tokens[i + k] != term[k]) { match = false; break; }
        }
        if (match) ++count;
    }
    return count;
}

std::vector<std::string> lowercase_tokens(const Sentence& sentence) {
    std::vector<std::string> out;
    out.reserve(sentence.tokens.size());
    for (const Token& t : sentence.tokens) out.push_back(ascii_lower(t.text));
    return out;
}

}  // namespace

TriggerDistribution lexicon_classify(const Sentence& sentence,
                                     const Lexicon& lexicon) {
    std::vector<std::string> tokens = lowercase_tokens(sentence);
    TriggerDistribution dist;
    dist.sentence_index = sentence.index;

    std::array<std::size_t, kNumTriggers> hits{};
    std::size_t total = 0;
    for (std::size_t c = 0; c < kNumTriggers; ++c) {
        for (const Lexicon::Term& term :
             lexicon.terms(static_cast<TriggerClass>(c))) {
            hits[c] += count_occurrences(tokens, term);
        }
        total += hits[c];
    }
    if (total == 0) {
        dist.probs[static_cast<std::size_t>(TriggerClass::None)] = 1.0;
        return dist;
    }
    for (std::size_t c = 0; c < kNumTriggers; ++c) {
        dist.probs[c] =
            static_cast<double>(hits[c]) / static_cast<double>(total);
    }
    return dist;
}

std::vector<TriggerDistribution> LexiconTriggerBackend::classify(
    const std::vector<Sentence>& sentences) {
    std::vector<TriggerDistribution> out;
    out.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        TriggerDistribution d = lexicon_classify(sentences[i], *lexicon_);
        d.sentence_index = i;
        out.push_back(std::move(d));
    }
    return out;
}

TriggerVector validate_distribution(const TriggerVector& probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw BackendViolation("prob_out_of_range",
                                   "probability " + std::to_string(p));
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-3) {
        throw BackendViolation("sum_out_of_tolerance",
                               "probabilities sum to " + std::to_string(sum));
    }
    TriggerVector out = probs;
    for (double& p : out) p /= sum;
    return out;
}

TriggerDistribution classify_sentence(const Sentence& sentence,
                                      TriggerBackend& backend) {
    if (sentence.tokens.empty()) {
        throw EmptySentence("sentence " + std::to_string(sentence.index) +
                            " has no tokens");
    }
    std::vector<TriggerDistribution> dists = backend.classify({sentence});
    if (dists.size() != 1) {
        throw BackendViolation("result_count_mismatch",
                               "expected 1 distribution, got " +
                                   std::to_string(dists.size()));
    }
    TriggerDistribution out;
    out.sentence_index = sentence.index;
    out.probs = validate_distribution(dists[0].probs);
    return out;
}

std::vector<TriggerDistribution> classify_body(const EmailBody& body,
                                               TriggerBackend& backend) {
    std::vector<TriggerDistribution> dists = backend.classify(body.sentences);
    if (dists.size() != body.sentences.size()) {
        throw BackendViolation("result_count_mismatch",
                               "expected " +
                                   std::to_string(body.sentences.size()) +
                                   " distributions, got " +
                                   std::to_string(dists.size()));
    }
    for (std::size_t i = 0; i < dists.size(); ++i) {
        dists[i].sentence_index = i;
        dists[i].probs = validate_distribution(dists[i].probs);
    }
    return dists;
}

// ---------------------------------------------------------------------------
// Profiles and baselines
// ---------------------------------------------------------------------------

namespace {

TriggerVector mean_intensity(const std::vector<TriggerDistribution>& dists) {
    TriggerVector intensity{};
    for (const TriggerDistribution& d : dists) {
        for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
            intensity[c] += d.probs[c];
        }
    }
    for (double& v : intensity) v /= static_cast<double>(dists.size());
    return intensity;
}

}  // namespace

TriggerProfile compute_profile(const std::vector<TriggerDistribution>& dists,
                               const CorpusBaseline& baseline, double z_spike) {
    if (dists.empty()) throw NoSentences("no distributions to profile");
    if (z_spike <= 0.0) throw InputError("z_spike must be positive");

    TriggerProfile profile;
    profile.intensity = mean_intensity(dists);
    for (std::size_t c = 0; c < kNumTriggers; ++c) {
        double diff = profile.intensity[c] - baseline.mean[c];
        if (baseline.stddev[c] > 0.0) {
            profile.z[c] = diff / baseline.stddev[c];
        } else {
            profile.z[c] =
                diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
        if (profile.z[c] >= z_spike) {
            profile.spikes.push_back(static_cast<TriggerClass>(c));
        }
    }
    return profile;
}

CorpusBaseline fit_baseline(
    const std::function<std::optional<EmailBody>()>& next_body,
    TriggerBackend& backend, std::string corpus_label) {
    std::size_t n = 0;
    TriggerVector mean{};
    TriggerVector m2{};

    while (auto body = next_body()) {
        if (body->sentences.empty()) continue;
        TriggerVector intensity =
            mean_intensity(classify_body(*body, backend));
        ++n;
        for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
            double delta = intensity[c] - mean[c];
            mean[c] += delta / static_cast<double>(n);
            m2[c] += delta * (intensity[c] - mean[c]);
        }
    }
    if (n < 2) {
        throw InsufficientCorpus("baseline needs >= 2 emails, got " +
                                 std::to_string(n));
    }
    CorpusBaseline baseline;
    baseline.corpus_label = std::move(corpus_label);
    baseline.n_emails = n;
    baseline.mean = mean;
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        baseline.stddev[c] = std::sqrt(m2[c] / static_cast<double>(n - 1));
    }
    return baseline;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json classes_json() {
    nlohmann::json arr = nlohmann::json::array();
    for (std::string_view name : kTriggerClassNames) arr.push_back(name);
    return arr;
}

nlohmann::json reals_json(const double* values, std::size_t count) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < count; ++i) arr.push_back(real_to_json(values[i]));
    return arr;
}

void read_reals(const nlohmann::json& arr, double* out, std::size_t count,
                const char* what) {
    if (!arr.is_array() || arr.size() != count) {
        throw SchemaError(std::string(what) + " must be an array of " +
                          std::to_string(count) + " reals");
    }
    for (std::size_t i = 0; i < count; ++i) out[i] = real_from_json(arr[i]);
}

}  // namespace

std::string CorpusBaseline::to_json() const {
    nlohmann::json j;
    j["classes"] = classes_json();
    j["corpus_label"] = corpus_label;
    j["mean"] = reals_json(mean.data(), kNumTriggerClasses);
    j["n_emails"] = n_emails;
    j["stddev"] = reals_json(stddev.data(), kNumTriggerClasses);
    return canonical_dump(j);
}

CorpusBaseline CorpusBaseline::from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError("baseline is not a JSON object");
    }
    CorpusBaseline b;
    b.corpus_label = j.value("corpus_label", std::string{});
    if (!j.contains("n_emails") || !j["n_emails"].is_number_unsigned()) {
        throw SchemaError("baseline n_emails missing");
    }
    b.n_emails = j["n_emails"].get<std::size_t>();
    if (b.n_emails < 2) throw SchemaError("baseline n_emails must be >= 2");
    read_reals(j.at("mean"), b.mean.data(), kNumTriggerClasses, "mean");
    read_reals(j.at("stddev"), b.stddev.data(), kNumTriggerClasses, "stddev");
    for (double s : b.stddev) {
        if (!(s >= 0.0)) throw SchemaError("baseline stddev must be >= 0");
    }
    return b;
}

const CorpusBaseline& CorpusBaseline::builtin() {
    static const CorpusBaseline baseline = from_json(defaults::baseline_json());
    return baseline;
}

std::string TriggerProfile::to_json() const {
    nlohmann::json j;
    j["intensity"] = reals_json(intensity.data(), kNumTriggerClasses);
    j["z"] = reals_json(z.data(), kNumTriggers);
    nlohmann::json spikes_arr = nlohmann::json::array();
    for (TriggerClass c : spikes) spikes_arr.push_back(trigger_class_name(c));
    j["spikes"] = spikes_arr;
    return canonical_dump(j);
}

}  // namespace phishtriage
