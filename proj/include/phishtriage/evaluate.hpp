#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phishtriage/intents.hpp"
#include "phishtriage/triggers.hpp"

namespace phishtriage {

struct LabeledExample {
    std::string text;
    std::set<std::string> truth;
    std::optional<std::set<std::string>> predicted;

    bool operator==(const LabeledExample&) const = default;
};

struct PerClassMetrics {
    std::size_t tp = 0, fp = 0, fn = 0;
    std::size_t support = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;

    bool operator==(const PerClassMetrics&) const = default;
};

struct ClassMetrics {
    std::map<std::string, PerClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
    std::size_t n_examples = 0;

    std::string to_json() const;  // canonical
};

// JSONL lines {"text": "...", "labels": [...]}; extra keys ignored.
std::vector<LabeledExample> load_labeled_jsonl(std::string_view content);

// Multi-label precision/recall/F1 per class plus macro (over classes that
// occur in truth or predictions) and micro (pooled counts) aggregates.
// All labels must belong to the registry.
ClassMetrics evaluate_classification(const std::vector<LabeledExample>& examples,
                                     const std::vector<std::string>& registry);

// Fills predictions: argmax trigger class per example.
void run_backend_on_labels(std::vector<LabeledExample>& examples,
                           TriggerBackend& backend);

// Fills predictions: set of emitted intent tags per example.
void run_backend_on_labels(std::vector<LabeledExample>& examples,
                           IntentBackend& backend, const TagRegistry& registry);

}  // namespace phishtriage
