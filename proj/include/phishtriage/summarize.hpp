#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "phishtriage/email.hpp"

namespace phishtriage {

// Exact rational so budget arithmetic never suffers float rounding.
struct Fraction {
    std::int64_t num = 1;
    std::int64_t den = 5;

    // Accepts "1/5" or a plain decimal like "0.2".
    static Fraction parse(std::string_view text);
    std::string str() const;

    bool operator==(const Fraction&) const = default;
};

struct LengthPolicy {
    std::optional<std::size_t> hard_cap_words;
    Fraction fraction{1, 5};

    bool operator==(const LengthPolicy&) const = default;
};

struct Summary {
    std::vector<std::size_t> selected;  // strictly ascending sentence indices
    std::size_t word_count = 0;
    std::size_t budget = 1;
    bool budget_exceeded = false;

    bool operator==(const Summary&) const = default;
};

// min(hard_cap, floor(total_words * fraction)), never below 1.
std::size_t compute_budget(std::size_t total_words, const LengthPolicy& policy);

class StopwordSet {
public:
    StopwordSet() = default;
    // One token per line; blank lines and '#' comments ignored.
    static StopwordSet parse(std::string_view text, std::string version);
    static const StopwordSet& builtin();

    bool contains(std::string_view lowercased_token) const;
    const std::string& version() const { return version_; }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
    std::string version_ = "empty";
};

using SimilarityMatrix = std::vector<std::vector<double>>;

// Cosine similarity of term-frequency vectors (lowercased tokens minus
// stop words); zero diagonal; symmetric; entries in [0,1].
SimilarityMatrix build_similarity_matrix(
    const EmailBody& body, const StopwordSet& stopwords = StopwordSet::builtin());

struct RankOptions {
    double damping = 0.85;
    double tolerance = 1e-6;  // L1
    int max_iterations = 200;
};

struct RankResult {
    std::vector<double> scores;  // sums to 1
    bool converged = true;
    int iterations = 0;
};

// Stationary scores of the damped random walk over the similarity graph,
// by power iteration. Rows with zero out-weight act as uniform. On
// non-convergence the best iterate is returned with converged=false.
RankResult rank_sentences(const SimilarityMatrix& sim,
                          const RankOptions& options = {});

// Greedy selection in descending score order (ties to the earlier
// sentence), skipping sentences that do not fit. When nothing fits, the
// top-scored sentence is taken alone and budget_exceeded is set.
Summary select_summary(const EmailBody& body, const std::vector<double>& scores,
                       std::size_t budget);

class SummarizerBackend {
public:
    virtual ~SummarizerBackend() = default;
    virtual std::string id() const = 0;
    // Proposed sentence indices for the given word budget.
    virtual std::vector<std::size_t> select(const EmailBody& body,
                                            std::size_t budget) = 0;
};

// In-repo deterministic backend: centrality ranking + greedy selection.
class CentralitySummarizer final : public SummarizerBackend {
public:
    explicit CentralitySummarizer(
        const StopwordSet& stopwords = StopwordSet::builtin(),
        RankOptions options = {})
        : stopwords_(&stopwords), options_(options) {}

    std::string id() const override { return "reference-centrality-v1"; }
    std::vector<std::size_t> select(const EmailBody& body,
                                    std::size_t budget) override;

private:
    const StopwordSet* stopwords_;
    RankOptions options_;
};

// Full pipeline: budget, backend selection, and validation of the
// selection against the Summary invariants (any backend).
Summary summarize(const EmailBody& body, const LengthPolicy& policy,
                  SummarizerBackend& backend);

}  // namespace phishtriage
