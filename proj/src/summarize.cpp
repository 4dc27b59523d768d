#include "phishtriage/summarize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <unordered_map>

#include "phishtriage/defaults.hpp"
#include "phishtriage/errors.hpp"
#include "phishtriage/text.hpp"

namespace phishtriage {

Fraction Fraction::parse(std::string_view text) {
    auto parse_int = [](std::string_view s) -> std::optional<std::int64_t> {
        if (s.empty() || s.size() > 18) return std::nullopt;
        std::int64_t v = 0;
        for (char c : s) {
            if (c < '0' || c > '9') return std::nullopt;
            v = v * 10 + (c - '0');
        }
        return v;
    };
    std::size_t slash = text.find('/');
    if (slash != std::string_view::npos) {
        auto num = parse_int(text.substr(0, slash));
        auto den = parse_int(text.substr(slash + 1));
        if (!num || !den || *den == 0) {
            throw InvalidPolicy("cannot parse fraction: " + std::string(text));
        }
        return Fraction{*num, *den};
    }
    std::size_t dot = text.find('.');
    if (dot == std::string_view::npos) {
        auto num = parse_int(text);
        if (!num) throw InvalidPolicy("cannot parse fraction: " + std::string(text));
        return Fraction{*num, 1};
    }
    std::string_view ip = text.substr(0, dot);
    std::string_view fp = text.substr(dot + 1);
    auto iv = parse_int(ip.empty() ? "0" : ip);
    auto fv = parse_int(fp.empty() ? "0" : fp);
    if (!iv || !fv || fp.size() > 12) {
        throw InvalidPolicy("cannot parse fraction: " + std::string(text));
    }
    std::int64_t den = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) den *= 10;
    return Fraction{*iv * den + *fv, den};
}

std::string Fraction::str() const {
    std::int64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    return std::to_string(num / g) + "/" + std::to_string(den / g);
}

std::size_t compute_budget(std::size_t total_words, const LengthPolicy& policy) {
    if (total_words < 1) throw InvalidPolicy("total_words must be >= 1");
    const Fraction& f = policy.fraction;
    if (f.den <= 0 || f.num <= 0 || f.num > f.den) {
        throw InvalidPolicy("fraction must lie in (0,1]: " + f.str());
    }
    std::size_t budget = static_cast<std::size_t>(
        static_cast<std::uint64_t>(total_words) *
        static_cast<std::uint64_t>(f.num) / static_cast<std::uint64_t>(f.den));
    if (budget < 1) budget = 1;
    if (policy.hard_cap_words) budget = std::min(budget, *policy.hard_cap_words);
    if (budget < 1) budget = 1;
    return budget;
}

StopwordSet StopwordSet::parse(std::string_view text, std::string version) {
    StopwordSet set;
    set.version_ = std::move(version);
    std::size_t i = 0;
    while (i <= text.size()) {
        std::size_t eol = text.find('\n', i);
        std::string_view line =
            text.substr(i, (eol == std::string_view::npos ? text.size() : eol) - i);
        i = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') continue;
        set.words_.insert(ascii_lower(line));
    }
    return set;
}

const StopwordSet& StopwordSet::builtin() {
    static const StopwordSet set =
        parse(defaults::stopwords_text(), std::string(defaults::kStopwordsVersion));
    return set;
}

bool StopwordSet::contains(std::string_view token) const {
    return words_.count(std::string(token)) > 0;
}

SimilarityMatrix build_similarity_matrix(const EmailBody& body,
                                         const StopwordSet& stopwords) {
    const std::size_t n = body.sentences.size();
    std::vector<std::unordered_map<std::string, double>> tf(n);
    std::vector<double> norm(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const Token& tok : body.sentences[i].tokens) {
            std::string w = ascii_lower(tok.text);
            if (stopwords.contains(w)) continue;
            tf[i][w] += 1.0;
        }
        for (const auto& [w, c] : tf[i]) norm[i] += c * c;
        norm[i] = std::sqrt(norm[i]);
    }
    SimilarityMatrix sim(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (norm[i] == 0.0 || norm[j] == 0.0) continue;
            const auto& a = tf[i].size() <= tf[j].size() ? tf[i] : tf[j];
            const auto& b = tf[i].size() <= tf[j].size() ? tf[j] : tf[i];
            double dot = 0.0;
            for (const auto& [w, c] : a) {
                auto it = b.find(w);
                if (it != b.end()) dot += c * it->second;
            }
            double s = dot / (norm[i] * norm[j]);
            s = std::clamp(s, 0.0, 1.0);
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    return sim;
}

RankResult rank_sentences(const SimilarityMatrix& sim, const RankOptions& opt) {
    const std::size_t n = sim.size();
    RankResult result;
    if (n == 0) return result;

    std::vector<double> row_sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (sim[i].size() != n) throw IndexMismatch("similarity matrix not square");
        for (double v : sim[i]) row_sum[i] += v;
    }

    const double d = opt.damping;
    const double teleport = (1.0 - d) / static_cast<double>(n);
    std::vector<double> score(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n, 0.0);

    result.converged = false;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        std::fill(next.begin(), next.end(), teleport);
        for (std::size_t i = 0; i < n; ++i) {
            if (row_sum[i] > 0.0) {
                double w = d * score[i] / row_sum[i];
                const auto& row = sim[i];
                for (std::size_t j = 0; j < n; ++j) {
                    if (row[j] > 0.0) next[j] += w * row[j];
                }
            } else {
                double w = d * score[i] / static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) next[j] += w;
            }
        }
        double delta = 0.0;
        for (std::size_t j = 0; j < n; ++j) delta += std::abs(next[j] - score[j]);
        score.swap(next);
        result.iterations = iter + 1;
        if (delta < opt.tolerance) {
            result.converged = true;
            break;
        }
    }

    double total = std::accumulate(score.begin(), score.end(), 0.0);
    if (total > 0.0) {
        for (double& s : score) s /= total;
    }
    result.scores = std::move(score);
    return result;
}

Summary select_summary(const EmailBody& body, const std::vector<double>& scores,
                       std::size_t budget) {
    const std::size_t n = body.sentences.size();
    if (scores.size() != n) {
        throw IndexMismatch("scores length does not match sentence count");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    Summary summary;
    summary.budget = budget;
    for (std::size_t idx : order) {
        std::size_t words = body.sentences[idx].tokens.size();
        if (summary.word_count + words <= budget) {
            summary.selected.push_back(idx);
            summary.word_count += words;
        }
    }
    if (summary.selected.empty() && n > 0) {
        std::size_t top = order.front();
        summary.selected.push_back(top);
        summary.word_count = body.sentences[top].tokens.size();
        summary.budget_exceeded = summary.word_count > budget;
    }
    std::sort(summary.selected.begin(), summary.selected.end());
    return summary;
}

std::vector<std::size_t> CentralitySummarizer::select(const EmailBody& body,
                                                      std::size_t budget) {
    RankResult ranked = rank_sentences(build_similarity_matrix(body, *stopwords_),
                                       options_);
    return select_summary(body, ranked.scores, budget).selected;
}

Summary summarize(const EmailBody& body, const LengthPolicy& policy,
                  SummarizerBackend& backend) {
    if (body.sentences.empty()) throw EmptyBody("body has no sentences");
    const std::size_t n = body.sentences.size();
    std::size_t budget = compute_budget(body.total_tokens, policy);

    std::vector<std::size_t> selected = backend.select(body, budget);
    if (selected.empty()) {
        throw BackendViolation("empty_selection", backend.id());
    }
    std::sort(selected.begin(), selected.end());
    for (std::size_t k = 0; k < selected.size(); ++k) {
        if (selected[k] >= n) {
            throw BackendViolation("index_out_of_range",
                                   "sentence " + std::to_string(selected[k]));
        }
        if (k > 0 && selected[k] == selected[k - 1]) {
            throw BackendViolation("duplicate_index",
                                   "sentence " + std::to_string(selected[k]));
        }
    }

    Summary summary;
    summary.budget = budget;
    summary.selected = std::move(selected);
    for (std::size_t idx : summary.selected) {
        summary.word_count += body.sentences[idx].tokens.size();
    }
    if (summary.word_count > budget) {
        // Legal only as the single-sentence fallback.
        if (summary.selected.size() != 1) {
            throw BackendViolation("over_budget",
                                   std::to_string(summary.word_count) + " > " +
                                       std::to_string(budget));
        }
        summary.budget_exceeded = true;
    }
    return summary;
}

}  // namespace phishtriage
