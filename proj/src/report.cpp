#include "phishtriage/report.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishtriage/errors.hpp"
#include "phishtriage/jsonfmt.hpp"

namespace phishtriage {

namespace {

constexpr std::string_view kSchemaId = "report_v1";

void check_span_bounds(const IntentSpan& span, const EmailBody& body) {
    if (span.sentence_index >= body.sentences.size()) {
        throw IndexMismatch("span references sentence " +
                            std::to_string(span.sentence_index) + " of " +
                            std::to_string(body.sentences.size()));
    }
    const Sentence& s = body.sentences[span.sentence_index];
    if (span.token_start >= span.token_end ||
        span.token_end > s.tokens.size()) {
        throw IndexMismatch("span token range out of bounds");
    }
}

std::string span_text(const IntentSpan& span, const EmailBody& body) {
    const Sentence& s = body.sentences[span.sentence_index];
    std::size_t from = s.tokens[span.token_start].char_start;
    std::size_t to = s.tokens[span.token_end - 1].char_end;
    return body.text.substr(from, to - from);
}

}  // namespace

PhishReport aggregate(const EmailBody& body, const Summary& summary,
                      const TriggerProfile& profile,
                      const std::vector<TriggerDistribution>& distributions,
                      const std::vector<IntentSpan>& spans,
                      const ReportMeta& meta) {
    const std::size_t n = body.sentences.size();
    if (distributions.size() != n) {
        throw IndexMismatch("expected " + std::to_string(n) +
                            " distributions, got " +
                            std::to_string(distributions.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (distributions[i].sentence_index != i) {
            throw IndexMismatch("distribution order does not match sentences");
        }
    }
    for (std::size_t idx : summary.selected) {
        if (idx >= n) throw IndexMismatch("summary references sentence " +
                                          std::to_string(idx));
    }

    PhishReport report;
    report.email_id = meta.email_id;
    report.summary = summary;
    for (std::size_t idx : summary.selected) {
        report.summary_texts.push_back(body.sentences[idx].text);
    }
    report.profile = profile;
    report.meta = meta;

    for (std::size_t i = 0; i < n; ++i) {
        TriggerClass top = argmax_class(distributions[i].probs);
        report.sentence_triggers.push_back(
            {i, top, distributions[i].probs[static_cast<std::size_t>(top)]});
        for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
            report.max_intensity[c] =
                std::max(report.max_intensity[c], distributions[i].probs[c]);
        }
    }

    // Density bookkeeping over (sentence, token) marks.
    std::vector<std::vector<char>> intent_marks(n);
    for (std::size_t i = 0; i < n; ++i) {
        intent_marks[i].assign(body.sentences[i].tokens.size(), 0);
    }
    for (const IntentSpan& span : spans) {
        check_span_bounds(span, body);
        report.spans.push_back({span, span_text(span, body)});
        for (std::size_t t = span.token_start; t < span.token_end; ++t) {
            intent_marks[span.sentence_index][t] = 1;
        }
    }

    std::size_t trigger_tokens = 0, intent_tokens = 0, combined_tokens = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool trigger_sentence = report.sentence_triggers[i].top != TriggerClass::None;
        std::size_t sent_tokens = body.sentences[i].tokens.size();
        std::size_t covered = 0;
        for (char m : intent_marks[i]) covered += m;
        intent_tokens += covered;
        if (trigger_sentence) {
            trigger_tokens += sent_tokens;
            combined_tokens += sent_tokens;
        } else {
            combined_tokens += covered;
        }
    }
    if (body.total_tokens > 0) {
        double total = static_cast<double>(body.total_tokens);
        report.densities.trigger_density = trigger_tokens / total;
        report.densities.intent_density = intent_tokens / total;
        report.densities.combined_density = combined_tokens / total;
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

nlohmann::json class_names_json() {
    nlohmann::json arr = nlohmann::json::array();
    for (std::string_view name : kTriggerClassNames) arr.push_back(name);
    return arr;
}

nlohmann::json reals_json(const double* values, std::size_t count) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < count; ++i) arr.push_back(real_to_json(values[i]));
    return arr;
}

}  // namespace

std::string render_json(const PhishReport& report) {
    nlohmann::json j;
    j["schema"] = kSchemaId;
    j["email_id"] = report.email_id;

    nlohmann::json summary;
    summary["selected"] = report.summary.selected;
    summary["sentences"] = report.summary_texts;
    summary["word_count"] = report.summary.word_count;
    summary["budget"] = report.summary.budget;
    summary["budget_exceeded"] = report.summary.budget_exceeded;
    j["summary"] = std::move(summary);

    nlohmann::json triggers;
    triggers["classes"] = class_names_json();
    triggers["intensity"] =
        reals_json(report.profile.intensity.data(), kNumTriggerClasses);
    triggers["max"] = reals_json(report.max_intensity.data(), kNumTriggerClasses);
    triggers["z"] = reals_json(report.profile.z.data(), kNumTriggers);
    nlohmann::json spikes = nlohmann::json::array();
    for (TriggerClass c : report.profile.spikes) {
        spikes.push_back(trigger_class_name(c));
    }
    triggers["spikes"] = std::move(spikes);
    j["triggers"] = std::move(triggers);

    nlohmann::json sentence_triggers = nlohmann::json::array();
    for (const SentenceTrigger& st : report.sentence_triggers) {
        nlohmann::json item;
        item["sentence_index"] = st.sentence_index;
        item["class"] = trigger_class_name(st.top);
        item["prob"] = real_to_json(st.prob);
        sentence_triggers.push_back(std::move(item));
    }
    j["sentence_triggers"] = std::move(sentence_triggers);

    nlohmann::json intents = nlohmann::json::array();
    for (const ResolvedSpan& rs : report.spans) {
        nlohmann::json item;
        item["sentence_index"] = rs.span.sentence_index;
        item["token_start"] = rs.span.token_start;
        item["token_end"] = rs.span.token_end;
        item["tag"] = rs.span.tag;
        item["confidence"] = real_to_json(rs.span.confidence);
        item["text"] = rs.text;
        intents.push_back(std::move(item));
    }
    j["intents"] = std::move(intents);

    nlohmann::json densities;
    densities["trigger"] = real_to_json(report.densities.trigger_density);
    densities["intent"] = real_to_json(report.densities.intent_density);
    densities["combined"] = real_to_json(report.densities.combined_density);
    j["densities"] = std::move(densities);

    nlohmann::json meta;
    meta["policy"] = {{"cap", report.meta.policy_cap
                                  ? nlohmann::json(*report.meta.policy_cap)
                                  : nlohmann::json(nullptr)},
                      {"fraction", report.meta.policy_fraction}};
    meta["z_spike"] = real_to_json(report.meta.z_spike);
    meta["backends"] = {{"summarize", report.meta.summarizer_backend},
                        {"triggers", report.meta.trigger_backend},
                        {"intents", report.meta.intent_backend}};
    meta["stopwords_version"] = report.meta.stopwords_version;
    meta["lexicon_version"] = report.meta.lexicon_version;
    meta["rules_version"] = report.meta.rules_version;
    meta["registry_version"] = report.meta.registry_version;
    meta["baseline"] = report.meta.baseline_label;
    j["meta"] = std::move(meta);

    return canonical_dump(j);
}

PhishReport parse_report(std::string_view bytes, const TagRegistry& registry) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError("report is not a JSON object");
    }
    if (j.value("schema", std::string{}) != kSchemaId) {
        throw SchemaError("unsupported report schema");
    }
    PhishReport report;
    report.email_id = j.value("email_id", std::string{});

    const auto& summary = j.at("summary");
    report.summary.selected =
        summary.at("selected").get<std::vector<std::size_t>>();
    report.summary_texts =
        summary.at("sentences").get<std::vector<std::string>>();
    report.summary.word_count = summary.at("word_count").get<std::size_t>();
    report.summary.budget = summary.at("budget").get<std::size_t>();
    report.summary.budget_exceeded = summary.at("budget_exceeded").get<bool>();

    const auto& triggers = j.at("triggers");
    const auto& intensity = triggers.at("intensity");
    const auto& maxv = triggers.at("max");
    if (intensity.size() != kNumTriggerClasses ||
        maxv.size() != kNumTriggerClasses) {
        throw SchemaError("trigger vectors must have 7 entries");
    }
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        report.profile.intensity[c] = real_from_json(intensity[c]);
        report.max_intensity[c] = real_from_json(maxv[c]);
    }
    const auto& z = triggers.at("z");
    if (z.size() != kNumTriggers) throw SchemaError("z must have 6 entries");
    for (std::size_t c = 0; c < kNumTriggers; ++c) {
        report.profile.z[c] = real_from_json(z[c]);
    }
    for (const auto& name : triggers.at("spikes")) {
        auto cls = trigger_class_from_name(name.get<std::string>());
        if (!cls || *cls == TriggerClass::None) {
            throw SchemaError("invalid spike class in report");
        }
        report.profile.spikes.push_back(*cls);
    }

    for (const auto& item : j.at("sentence_triggers")) {
        auto cls = trigger_class_from_name(item.at("class").get<std::string>());
        if (!cls) throw SchemaError("invalid sentence trigger class");
        report.sentence_triggers.push_back(
            {item.at("sentence_index").get<std::size_t>(), *cls,
             real_from_json(item.at("prob"))});
    }

    for (const auto& item : j.at("intents")) {
        ResolvedSpan rs;
        rs.span.sentence_index = item.at("sentence_index").get<std::size_t>();
        rs.span.token_start = item.at("token_start").get<std::size_t>();
        rs.span.token_end = item.at("token_end").get<std::size_t>();
        rs.span.tag = item.at("tag").get<std::string>();
        rs.span.confidence = real_from_json(item.at("confidence"));
        rs.text = item.at("text").get<std::string>();
        if (!registry.contains(rs.span.tag)) {
            throw SchemaError("unregistered intent tag: " + rs.span.tag);
        }
        report.spans.push_back(std::move(rs));
    }

    const auto& densities = j.at("densities");
    report.densities.trigger_density = real_from_json(densities.at("trigger"));
    report.densities.intent_density = real_from_json(densities.at("intent"));
    report.densities.combined_density =
        real_from_json(densities.at("combined"));

    const auto& meta = j.at("meta");
    const auto& policy = meta.at("policy");
    if (!policy.at("cap").is_null()) {
        report.meta.policy_cap = policy.at("cap").get<std::size_t>();
    }
    report.meta.policy_fraction = policy.at("fraction").get<std::string>();
    report.meta.z_spike = real_from_json(meta.at("z_spike"));
    const auto& backends = meta.at("backends");
    report.meta.summarizer_backend = backends.at("summarize").get<std::string>();
    report.meta.trigger_backend = backends.at("triggers").get<std::string>();
    report.meta.intent_backend = backends.at("intents").get<std::string>();
    report.meta.stopwords_version =
        meta.at("stopwords_version").get<std::string>();
    report.meta.lexicon_version = meta.at("lexicon_version").get<std::string>();
    report.meta.rules_version = meta.at("rules_version").get<std::string>();
    report.meta.registry_version =
        meta.at("registry_version").get<std::string>();
    report.meta.baseline_label = meta.at("baseline").get<std::string>();
    report.meta.email_id = report.email_id;
    return report;
}

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

namespace {

std::string fmt_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string render_text(const PhishReport& report) {
    std::ostringstream out;
    out << "Email: " << report.email_id << "\n";

    out << "\n== Summary (" << report.summary.word_count << " words, budget "
        << report.summary.budget;
    if (report.summary.budget_exceeded) out << ", budget exceeded";
    out << ") ==\n";
    for (const std::string& text : report.summary_texts) {
        out << "  - " << text << "\n";
    }

    out << "\n== Trigger spikes ==\n";
    if (report.profile.spikes.empty()) {
        out << "  (none)\n";
    } else {
        for (TriggerClass c : report.profile.spikes) {
            out << "  - " << trigger_class_name(c)
                << " (z=" << fmt_real(report.profile.z[static_cast<std::size_t>(c)])
                << ")\n";
        }
    }

    out << "\n== Suspicious intents ==\n";
    if (report.spans.empty()) {
        out << "  (none)\n";
    } else {
        for (const ResolvedSpan& rs : report.spans) {
            out << "  - [" << rs.span.tag << "] \"" << rs.text << "\" (sentence "
                << rs.span.sentence_index << ")\n";
        }
    }

    out << "\n== Densities ==\n";
    out << "  trigger=" << fmt_real(report.densities.trigger_density)
        << " intent=" << fmt_real(report.densities.intent_density)
        << " combined=" << fmt_real(report.densities.combined_density) << "\n";

    out << "\nAdvisory: ";
    if (report.profile.spikes.empty() && report.spans.empty()) {
        out << "no spikes or intent cues detected";
    } else {
        if (!report.profile.spikes.empty()) {
            out << "spikes in ";
            for (std::size_t i = 0; i < report.profile.spikes.size(); ++i) {
                if (i) out << ", ";
                out << trigger_class_name(report.profile.spikes[i]);
            }
        } else {
            out << "no spikes";
        }
        out << "; " << report.spans.size() << " intent cue"
            << (report.spans.size() == 1 ? "" : "s") << " detected";
    }
    out << ". Review the highlighted evidence and decide for yourself.\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// HTML
// ---------------------------------------------------------------------------

namespace {

std::string escape_html(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

constexpr std::string_view kStyles = R"(
body{font-family:system-ui,sans-serif;max-width:46rem;margin:2rem auto;padding:0 1rem;color:#222}
h1{font-size:1.4rem}h2{font-size:1.1rem;margin-top:1.6rem}
.meta{color:#666;font-size:.85rem}
.email-body{white-space:pre-wrap;border:1px solid #ccc;border-radius:4px;padding:1rem;background:#fafafa}
.sentence.spike{outline:2px solid #c0392b;outline-offset:1px}
.sentence.summary-pick{background:#eaf5ee}
mark.intent{background:#ffe08a;border-bottom:2px solid #d35400}
table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:.2rem .6rem;text-align:left}
.badge{display:inline-block;background:#2c6e49;color:#fff;border-radius:3px;padding:0 .3rem;font-size:.75rem;margin-right:.3rem}
)";

}  // namespace

std::string render_html(const PhishReport& report, const EmailBody& body) {
    const std::size_t n = body.sentences.size();
    for (const SentenceTrigger& st : report.sentence_triggers) {
        if (st.sentence_index >= n) throw IndexMismatch("sentence trigger index");
    }
    for (const ResolvedSpan& rs : report.spans) {
        check_span_bounds(rs.span, body);
    }
    for (std::size_t idx : report.summary.selected) {
        if (idx >= n) throw IndexMismatch("summary index");
    }

    std::set<std::size_t> summary_set(report.summary.selected.begin(),
                                      report.summary.selected.end());
    std::set<int> spike_set;
    for (TriggerClass c : report.profile.spikes) {
        spike_set.insert(static_cast<int>(c));
    }

    // tag sets per (sentence, token)
    std::vector<std::vector<std::set<std::string>>> marks(n);
    for (std::size_t i = 0; i < n; ++i) {
        marks[i].resize(body.sentences[i].tokens.size());
    }
    for (const ResolvedSpan& rs : report.spans) {
        for (std::size_t t = rs.span.token_start; t < rs.span.token_end; ++t) {
            marks[rs.span.sentence_index][t].insert(rs.span.tag);
        }
    }

    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n"
           "<meta charset=\"utf-8\">\n<title>Email triage report</title>\n"
           "<style>" << kStyles << "</style>\n</head>\n<body>\n";
    out << "<h1>Email triage report</h1>\n";
    out << "<p class=\"meta\">Email ID: " << escape_html(report.email_id)
        << " &middot; backends: " << escape_html(report.meta.summarizer_backend)
        << ", " << escape_html(report.meta.trigger_backend) << ", "
        << escape_html(report.meta.intent_backend) << " &middot; baseline: "
        << escape_html(report.meta.baseline_label) << "</p>\n";

    out << "<h2>Summary</h2>\n<ul>\n";
    for (const std::string& text : report.summary_texts) {
        out << "<li>" << escape_html(text) << "</li>\n";
    }
    out << "</ul>\n";

    out << "<h2>Email body</h2>\n<div class=\"email-body\">";
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Sentence& s = body.sentences[i];
        out << escape_html(
            std::string_view(body.text).substr(pos, s.char_start - pos));
        bool spiking =
            report.sentence_triggers.size() == n &&
            spike_set.count(static_cast<int>(report.sentence_triggers[i].top)) > 0;
        std::string cls = "sentence";
        if (spiking) cls += " spike";
        if (summary_set.count(i)) cls += " summary-pick";
        out << "<span class=\"" << cls << "\"";
        if (spiking) {
            out << " data-trigger=\""
                << escape_html(
                       trigger_class_name(report.sentence_triggers[i].top))
                << "\"";
        }
        out << ">";
        if (summary_set.count(i)) out << "<span class=\"badge\">summary</span>";

        // Emit the sentence, wrapping runs of intent-covered tokens.
        std::size_t cursor = s.char_start;
        std::size_t t = 0;
        const auto& token_marks = marks[i];
        while (t < s.tokens.size()) {
            if (token_marks[t].empty()) {
                ++t;
                continue;
            }
            std::size_t run_end = t + 1;
            while (run_end < s.tokens.size() &&
                   token_marks[run_end] == token_marks[t]) {
                ++run_end;
            }
            std::size_t from = s.tokens[t].char_start;
            std::size_t to = s.tokens[run_end - 1].char_end;
            out << escape_html(
                std::string_view(body.text).substr(cursor, from - cursor));
            out << "<mark class=\"intent\" data-tags=\"";
            bool first = true;
            for (const std::string& tag : token_marks[t]) {
                if (!first) out << " ";
                out << escape_html(tag);
                first = false;
            }
            out << "\">"
                << escape_html(std::string_view(body.text).substr(from, to - from))
                << "</mark>";
            cursor = to;
            t = run_end;
        }
        out << escape_html(
            std::string_view(body.text).substr(cursor, s.char_end - cursor));
        out << "</span>";
        pos = s.char_end;
    }
    out << escape_html(std::string_view(body.text).substr(pos));
    out << "</div>\n";

    out << "<h2>Trigger profile</h2>\n<table>\n<tr><th>Class</th>"
           "<th>Intensity</th><th>Max</th><th>z</th><th>Spike</th></tr>\n";
    for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
        out << "<tr><td>" << kTriggerClassNames[c] << "</td><td>"
            << fmt_real(report.profile.intensity[c]) << "</td><td>"
            << fmt_real(report.max_intensity[c]) << "</td><td>";
        if (c < kNumTriggers) {
            out << fmt_real(report.profile.z[c]) << "</td><td>"
                << (spike_set.count(static_cast<int>(c)) ? "yes" : "") << "</td>";
        } else {
            out << "&mdash;</td><td></td>";
        }
        out << "</tr>\n";
    }
    out << "</table>\n";

    out << "<h2>Intent cues</h2>\n";
    if (report.spans.empty()) {
        out << "<p>(none)</p>\n";
    } else {
        out << "<ul>\n";
        for (const ResolvedSpan& rs : report.spans) {
            out << "<li><code>" << escape_html(rs.span.tag) << "</code> &ldquo;"
                << escape_html(rs.text) << "&rdquo; (sentence "
                << rs.span.sentence_index << ")</li>\n";
        }
        out << "</ul>\n";
    }

    out << "<h2>Densities</h2>\n<p>trigger "
        << fmt_real(report.densities.trigger_density) << " &middot; intent "
        << fmt_real(report.densities.intent_density) << " &middot; combined "
        << fmt_real(report.densities.combined_density) << "</p>\n";

    out << "</body>\n</html>\n";
    return out.str();
}

}  // namespace phishtriage
