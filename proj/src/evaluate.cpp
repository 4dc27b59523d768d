#include "phishtriage/evaluate.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "phishtriage/errors.hpp"
#include "phishtriage/jsonfmt.hpp"
#include "phishtriage/text.hpp"

namespace phishtriage {

std::vector<LabeledExample> load_labeled_jsonl(std::string_view content) {
    std::vector<LabeledExample> out;
    std::size_t i = 0;
    std::size_t line_no = 0;
    while (i <= content.size()) {
        std::size_t eol = content.find('\n', i);
        std::string_view line = content.substr(
            i, (eol == std::string_view::npos ? content.size() : eol) - i);
        i = eol == std::string_view::npos ? content.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
        if (blank) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
            !j["text"].is_string()) {
            throw SchemaError("label file line " + std::to_string(line_no) +
                              ": expected {\"text\", \"labels\"}");
        }
        LabeledExample ex;
        ex.text = j["text"].get<std::string>();
        if (j.contains("labels")) {
            if (!j["labels"].is_array()) {
                throw SchemaError("label file line " + std::to_string(line_no) +
                                  ": labels must be an array");
            }
            for (const auto& l : j["labels"]) {
                if (!l.is_string()) {
                    throw SchemaError("label file line " +
                                      std::to_string(line_no) +
                                      ": labels must be strings");
                }
                ex.truth.insert(l.get<std::string>());
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double precision, double recall) {
    double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

}  // namespace

ClassMetrics evaluate_classification(const std::vector<LabeledExample>& examples,
                                     const std::vector<std::string>& registry) {
    if (examples.empty()) {
        throw UnpopulatedPredictions("no examples to evaluate");
    }
    auto registered = [&](const std::string& label) {
        return std::find(registry.begin(), registry.end(), label) !=
               registry.end();
    };

    ClassMetrics metrics;
    metrics.n_examples = examples.size();
    for (const LabeledExample& ex : examples) {
        if (!ex.predicted) {
            throw UnpopulatedPredictions("example without predictions: \"" +
                                         ex.text + "\"");
        }
        for (const std::string& label : ex.truth) {
            if (!registered(label)) throw UnknownLabel(label);
        }
        for (const std::string& label : *ex.predicted) {
            if (!registered(label)) throw UnknownLabel(label);
        }
        for (const std::string& label : ex.truth) {
            PerClassMetrics& pc = metrics.per_class[label];
            ++pc.support;
            if (ex.predicted->count(label)) {
                ++pc.tp;
            } else {
                ++pc.fn;
            }
        }
        for (const std::string& label : *ex.predicted) {
            if (!ex.truth.count(label)) ++metrics.per_class[label].fp;
        }
    }

    std::size_t tp = 0, fp = 0, fn = 0;
    double sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
    for (auto& [label, pc] : metrics.per_class) {
        pc.precision = safe_div(static_cast<double>(pc.tp),
                                static_cast<double>(pc.tp + pc.fp));
        pc.recall = safe_div(static_cast<double>(pc.tp),
                             static_cast<double>(pc.tp + pc.fn));
        pc.f1 = f1_of(pc.precision, pc.recall);
        tp += pc.tp;
        fp += pc.fp;
        fn += pc.fn;
        sum_p += pc.precision;
        sum_r += pc.recall;
        sum_f1 += pc.f1;
    }
    std::size_t n_classes = metrics.per_class.size();
    if (n_classes > 0) {
        metrics.macro_precision = sum_p / static_cast<double>(n_classes);
        metrics.macro_recall = sum_r / static_cast<double>(n_classes);
        metrics.macro_f1 = sum_f1 / static_cast<double>(n_classes);
    }
    metrics.micro_precision =
        safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
    metrics.micro_recall =
        safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
    metrics.micro_f1 = f1_of(metrics.micro_precision, metrics.micro_recall);
    return metrics;
}

std::string ClassMetrics::to_json() const {
    nlohmann::json j;
    nlohmann::json classes;
    for (const auto& [label, pc] : per_class) {
        nlohmann::json entry;
        entry["precision"] = real_to_json(pc.precision);
        entry["recall"] = real_to_json(pc.recall);
        entry["f1"] = real_to_json(pc.f1);
        entry["support"] = pc.support;
        classes[label] = std::move(entry);
    }
    j["classes"] = std::move(classes);
    j["macro"] = {{"precision", real_to_json(macro_precision)},
                  {"recall", real_to_json(macro_recall)},
                  {"f1", real_to_json(macro_f1)}};
    j["micro"] = {{"precision", real_to_json(micro_precision)},
                  {"recall", real_to_json(micro_recall)},
                  {"f1", real_to_json(micro_f1)}};
    j["n_examples"] = n_examples;
    return canonical_dump(j);
}

namespace {

Sentence example_sentence(const std::string& text) {
    Sentence s;
    s.index = 0;
    s.char_start = 0;
    s.char_end = text.size();
    s.text = text;
    s.tokens = tokenize(text);
    return s;
}

}  // namespace

void run_backend_on_labels(std::vector<LabeledExample>& examples,
                           TriggerBackend& backend) {
    for (LabeledExample& ex : examples) {
        Sentence s = example_sentence(ex.text);
        std::set<std::string> predicted;
        if (s.tokens.empty()) {
            predicted.insert(std::string(trigger_class_name(TriggerClass::None)));
        } else {
            TriggerDistribution dist = classify_sentence(s, backend);
            predicted.insert(
                std::string(trigger_class_name(argmax_class(dist.probs))));
        }
        ex.predicted = std::move(predicted);
    }
}

void run_backend_on_labels(std::vector<LabeledExample>& examples,
                           IntentBackend& backend, const TagRegistry& registry) {
    for (LabeledExample& ex : examples) {
        Sentence s = example_sentence(ex.text);
        std::set<std::string> predicted;
        if (!s.tokens.empty()) {
            for (const IntentSpan& span : tag_sentence(s, backend, registry)) {
                predicted.insert(span.tag);
            }
        }
        ex.predicted = std::move(predicted);
    }
}

}  // namespace phishtriage
