#include "phishtriage/intents.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "phishtriage/defaults.hpp"
#include "phishtriage/errors.hpp"
#include "phishtriage/text.hpp"

namespace phishtriage {

namespace {

bool valid_tag_name(std::string_view tag) {
    if (tag.empty()) return false;
    for (char c : tag) {
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> term_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (const Token& t : tokenize(text)) out.push_back(ascii_lower(t.text));
    return out;
}

}  // namespace

TagRegistry TagRegistry::parse(std::string_view json_text, std::string version) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw SchemaError("tag registry must be a JSON array");
    }
    TagRegistry reg;
    reg.version_ = std::move(version);
    for (const auto& item : j) {
        if (!item.is_string() || !valid_tag_name(item.get<std::string>())) {
            throw SchemaError("tag registry entries must be lowercase "
                              "snake_case strings");
        }
        reg.tags_.push_back(item.get<std::string>());
    }
    if (reg.tags_.empty()) throw SchemaError("tag registry is empty");
    return reg;
}

const TagRegistry& TagRegistry::builtin() {
    static const TagRegistry reg = parse(defaults::intent_tags_json(),
                                         std::string(defaults::kRegistryVersion));
    return reg;
}

bool TagRegistry::contains(std::string_view tag) const {
    return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
}

RuleTable RuleTable::parse(std::string_view json_text,
                           const TagRegistry& registry, std::string version) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw SchemaError("rule table must be a JSON array");
    }
    RuleTable table;
    table.version_ = std::move(version);
    for (const auto& item : j) {
        if (!item.is_object()) throw SchemaError("rule must be a JSON object");
        IntentRule rule;
        rule.tag = item.value("tag", std::string{});
        if (!registry.contains(rule.tag)) {
            throw SchemaError("rule tag not in registry: " + rule.tag);
        }
        rule.gap = item.value("gap", kDefaultTokenGap);
        auto read_terms = [&](const char* key,
                              std::vector<std::vector<std::string>>& out) {
            if (!item.contains(key) || !item[key].is_array()) {
                throw SchemaError("rule \"" + rule.tag + "\" missing " + key);
            }
            for (const auto& term : item[key]) {
                if (!term.is_string()) {
                    throw SchemaError("rule terms must be strings");
                }
                std::vector<std::string> toks =
                    term_tokens(term.get<std::string>());
                if (!toks.empty()) out.push_back(std::move(toks));
            }
            if (out.empty()) {
                throw SchemaError("rule \"" + rule.tag + "\" has no " +
                                  std::string(key));
            }
        };
        read_terms("triggers", rule.triggers);
        read_terms("objects", rule.objects);
        table.rules_.push_back(std::move(rule));
    }
    return table;
}

const RuleTable& RuleTable::builtin() {
    static const RuleTable table =
        parse(defaults::intent_rules_json(), TagRegistry::builtin(),
              std::string(defaults::kRulesVersion));
    return table;
}

namespace {

struct Occurrence {
    std::size_t start, end;  // token range
};

std::vector<Occurrence> find_occurrences(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& term) {
    std::vector<Occurrence> out;
    if (term.empty() || term.size() > tokens.size()) return out;
    for (std::size_t i = 0; i + term.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < term.size(); ++k) {
            if (tokens[i + k] != term[k]) { match = false; break; }
        }
        if (match) out.push_back({i, i + term.size()});
    }
    return out;
}

// Tokens strictly between two occurrences (0 when they touch or overlap).
std::size_t tokens_between(const Occurrence& a, const Occurrence& b) {
    if (a.end <= b.start) return b.start - a.end;
    if (b.end <= a.start) return a.start - b.end;
    return 0;
}

}  // namespace

std::vector<IntentSpan> merge_spans(std::vector<IntentSpan> spans) {
    std::sort(spans.begin(), spans.end(), [](const IntentSpan& a,
                                             const IntentSpan& b) {
        return std::tie(a.sentence_index, a.tag, a.token_start, a.token_end) <
               std::tie(b.sentence_index, b.tag, b.token_start, b.token_end);
    });
    std::vector<IntentSpan> merged;
    for (IntentSpan& span : spans) {
        if (!merged.empty()) {
            IntentSpan& last = merged.back();
            if (last.sentence_index == span.sentence_index &&
                last.tag == span.tag && span.token_start < last.token_end) {
                last.token_end = std::max(last.token_end, span.token_end);
                last.confidence = std::max(last.confidence, span.confidence);
                continue;
            }
        }
        merged.push_back(std::move(span));
    }
    std::sort(merged.begin(), merged.end(), [](const IntentSpan& a,
                                               const IntentSpan& b) {
        return std::tie(a.sentence_index, a.token_start, a.tag) <
               std::tie(b.sentence_index, b.token_start, b.tag);
    });
    return merged;
}

std::vector<IntentSpan> rule_tag(const Sentence& sentence,
                                 const RuleTable& rules) {
    if (rules.empty()) throw SchemaError("rule table is empty");
    std::vector<std::string> tokens;
    tokens.reserve(sentence.tokens.size());
    for (const Token& t : sentence.tokens) tokens.push_back(ascii_lower(t.text));

    std::vector<IntentSpan> spans;
    for (const IntentRule& rule : rules.rules()) {
        std::vector<Occurrence> trig_occs, obj_occs;
        for (const auto& term : rule.triggers) {
            for (Occurrence o : find_occurrences(tokens, term)) {
                trig_occs.push_back(o);
            }
        }
        if (trig_occs.empty()) continue;
        for (const auto& term : rule.objects) {
            for (Occurrence o : find_occurrences(tokens, term)) {
                obj_occs.push_back(o);
            }
        }
        for (const Occurrence& t : trig_occs) {
            for (const Occurrence& o : obj_occs) {
                if (tokens_between(t, o) > rule.gap) continue;
                IntentSpan span;
                span.sentence_index = sentence.index;
                span.token_start = std::min(t.start, o.start);
                span.token_end = std::max(t.end, o.end);
                span.tag = rule.tag;
                span.confidence = 1.0;
                spans.push_back(std::move(span));
            }
        }
    }
    return merge_spans(std::move(spans));
}

std::vector<std::vector<IntentSpan>> RuleIntentBackend::tag(
    const std::vector<Sentence>& sentences) {
    std::vector<std::vector<IntentSpan>> out;
    out.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        std::vector<IntentSpan> spans = rule_tag(sentences[i], *table_);
        for (IntentSpan& s : spans) s.sentence_index = i;
        out.push_back(std::move(spans));
    }
    return out;
}

namespace {

std::vector<IntentSpan> validate_spans(std::vector<IntentSpan> spans,
                                       const Sentence& sentence,
                                       const TagRegistry& registry) {
    for (IntentSpan& span : spans) {
        if (span.token_start >= span.token_end ||
            span.token_end > sentence.tokens.size()) {
            throw BackendViolation(
                "span_out_of_bounds",
                "[" + std::to_string(span.token_start) + "," +
                    std::to_string(span.token_end) + ") in sentence of " +
                    std::to_string(sentence.tokens.size()) + " tokens");
        }
        if (!(span.confidence >= 0.0 && span.confidence <= 1.0)) {
            throw BackendViolation("confidence_out_of_range",
                                   std::to_string(span.confidence));
        }
        if (!registry.contains(span.tag)) {
            throw BackendViolation("unregistered_tag", span.tag);
        }
        span.sentence_index = sentence.index;
    }
    return merge_spans(std::move(spans));
}

}  // namespace

std::vector<IntentSpan> tag_sentence(const Sentence& sentence,
                                     IntentBackend& backend,
                                     const TagRegistry& registry) {
    std::vector<std::vector<IntentSpan>> results = backend.tag({sentence});
    if (results.size() != 1) {
        throw BackendViolation("result_count_mismatch",
                               "expected spans for 1 sentence, got " +
                                   std::to_string(results.size()));
    }
    return validate_spans(std::move(results[0]), sentence, registry);
}

std::vector<IntentSpan> collect_spans(const EmailBody& body,
                                      IntentBackend& backend,
                                      const TagRegistry& registry) {
    if (body.sentences.empty()) return {};
    std::vector<std::vector<IntentSpan>> results = backend.tag(body.sentences);
    if (results.size() != body.sentences.size()) {
        throw BackendViolation("result_count_mismatch",
                               "expected spans for " +
                                   std::to_string(body.sentences.size()) +
                                   " sentences, got " +
                                   std::to_string(results.size()));
    }
    std::vector<IntentSpan> out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::vector<IntentSpan> spans;
        try {
            spans = validate_spans(std::move(results[i]), body.sentences[i],
                                   registry);
        } catch (const BackendViolation& e) {
            throw BackendViolation(e.reason(), "sentence " + std::to_string(i) +
                                                   ": " + e.what());
        }
        out.insert(out.end(), std::make_move_iterator(spans.begin()),
                   std::make_move_iterator(spans.end()));
    }
    // per-sentence results are already sorted; sentences arrive in order
    return out;
}

}  // namespace phishtriage
