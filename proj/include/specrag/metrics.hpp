#pragma once

// Lexical and embedding-based response metrics. All lexical metrics share
// one tokenizer: lowercase, split on non-alphanumeric characters.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "specrag/embedder.hpp"
#include "specrag/text.hpp"

namespace specrag::metrics {

inline constexpr double kBleuEpsilon = 1e-9;

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline Tokens tokens(std::string_view s) { return text::tokenize(s); }

inline NgramCounts ngram_counts(const Tokens& toks, std::size_t n) {
    NgramCounts counts;
    if (n == 0 || toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}

/// Sum over candidate n-grams of min(count in candidate, count in reference).
inline std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t m = 0;
    for (const auto& [g, c] : cand) {
        auto it = ref.find(g);
        if (it != ref.end()) m += std::min(c, it->second);
    }
    return m;
}

// ---- BLEU -----------------------------------------------------------------

struct BleuScore {
    double score = 0.0;
    double brevity_penalty = 0.0;
    std::vector<double> precisions;  // one per order actually used
    bool warning = false;            // empty token list on either side
};

/// Sentence-level BLEU. Orders for which the candidate has no n-grams at all
/// (candidate shorter than n) are left out of the geometric mean; a zero
/// match count is smoothed to eps / (total + eps). Brevity penalty
/// exp(1 - r/c) when c < r.
inline BleuScore bleu_detail(std::string_view candidate, std::string_view reference, std::size_t max_n = 4) {
    BleuScore out;
    auto cand = tokens(candidate);
    auto ref = tokens(reference);
    if (cand.empty() || ref.empty() || max_n == 0) {
        out.warning = true;
        return out;
    }
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (cand.size() < n) break;
        auto cc = ngram_counts(cand, n);
        std::size_t total = cand.size() - n + 1;
        std::size_t matches = clipped_overlap(cc, ngram_counts(ref, n));
        double p = matches > 0 ? static_cast<double>(matches) / static_cast<double>(total)
                               : kBleuEpsilon / (static_cast<double>(total) + kBleuEpsilon);
        out.precisions.push_back(p);
        log_sum += std::log(p);
    }
    double c = static_cast<double>(cand.size()), r = static_cast<double>(ref.size());
    out.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
    out.score = out.brevity_penalty * std::exp(log_sum / static_cast<double>(out.precisions.size()));
    out.score = std::clamp(out.score, 0.0, 1.0);
    return out;
}

inline double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4) {
    return bleu_detail(candidate, reference, max_n).score;
}

/// Corpus-level BLEU: clipped counts and lengths summed over all pairs before
/// forming precisions. Offered as an alternative to the mean of sentence BLEU.
inline double corpus_bleu(const std::vector<std::pair<std::string, std::string>>& pairs, std::size_t max_n = 4) {
    std::vector<double> matches(max_n + 1, 0.0), totals(max_n + 1, 0.0);
    double c = 0.0, r = 0.0;
    for (const auto& [cand_s, ref_s] : pairs) {
        auto cand = tokens(cand_s);
        auto ref = tokens(ref_s);
        c += static_cast<double>(cand.size());
        r += static_cast<double>(ref.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            if (cand.size() < n) continue;
            totals[n] += static_cast<double>(cand.size() - n + 1);
            matches[n] += static_cast<double>(clipped_overlap(ngram_counts(cand, n), ngram_counts(ref, n)));
        }
    }
    if (c == 0.0 || r == 0.0) return 0.0;
    double log_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        if (totals[n] == 0.0) continue;
        double p = matches[n] > 0 ? matches[n] / totals[n] : kBleuEpsilon / (totals[n] + kBleuEpsilon);
        log_sum += std::log(p);
        ++used;
    }
    double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return std::clamp(bp * std::exp(log_sum / static_cast<double>(used)), 0.0, 1.0);
}

// ---- ROUGE ----------------------------------------------------------------

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool warning = false;
};

inline double harmonic(double p, double r) noexcept { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline PRF rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    PRF out;
    auto cand = tokens(candidate);
    auto ref = tokens(reference);
    if (cand.empty() || ref.empty() || n == 0 || ref.size() < n) {
        out.warning = true;
        return out;
    }
    auto rc = ngram_counts(ref, n);
    auto cc = ngram_counts(cand, n);
    double overlap = static_cast<double>(clipped_overlap(cc, rc));
    double ref_total = static_cast<double>(ref.size() - n + 1);
    double cand_total = cand.size() >= n ? static_cast<double>(cand.size() - n + 1) : 0.0;
    out.recall = overlap / ref_total;
    out.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline PRF rouge_l(std::string_view candidate, std::string_view reference) {
    PRF out;
    auto cand = tokens(candidate);
    auto ref = tokens(reference);
    if (cand.empty() || ref.empty()) {
        out.warning = true;
        return out;
    }
    double l = static_cast<double>(lcs_length(cand, ref));
    out.recall = l / static_cast<double>(ref.size());
    out.precision = l / static_cast<double>(cand.size());
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

// ---- embedding-based --------------------------------------------------------

/// Maps tokens to one vector each.
using TokenEmbedder = std::function<std::vector<EmbeddingVector>(const Tokens&)>;

/// Per-token local hashed embedding: each token embedded on its own.
inline TokenEmbedder local_token_embedder(std::size_t dim = 384) {
    return [dim](const Tokens& toks) {
        EmbedderConfig cfg;
        cfg.backend = EmbedderBackend::local_hashed;
        cfg.dim = dim;
        std::vector<EmbeddingVector> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(detail::embed_local(t, cfg));
        return out;
    };
}

/// Greedy matching: recall averages, over reference tokens, the best cosine
/// to any candidate token; precision is the mirror image. F1 is clamped to
/// [0, 1] (negative similarities can only arise from signed hash collisions).
inline PRF bertscore(std::string_view candidate, std::string_view reference, const TokenEmbedder& embed) {
    PRF out;
    auto cand = tokens(candidate);
    auto ref = tokens(reference);
    if (cand.empty() || ref.empty()) {
        out.warning = true;
        return out;
    }
    auto ce = embed(cand);
    auto re = embed(ref);
    std::vector<double> best_for_ref(ref.size(), -1.0), best_for_cand(cand.size(), -1.0);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        for (std::size_t j = 0; j < cand.size(); ++j) {
            double s = cosine(re[i], ce[j]);
            best_for_ref[i] = std::max(best_for_ref[i], s);
            best_for_cand[j] = std::max(best_for_cand[j], s);
        }
    }
    double r = 0.0, p = 0.0;
    for (double s : best_for_ref) r += s;
    for (double s : best_for_cand) p += s;
    out.recall = r / static_cast<double>(ref.size());
    out.precision = p / static_cast<double>(cand.size());
    out.f1 = (out.precision <= 0.0 || out.recall <= 0.0) ? 0.0 : std::clamp(harmonic(out.precision, out.recall), 0.0, 1.0);
    return out;
}

inline double bertscore_f1(std::string_view candidate, std::string_view reference, const TokenEmbedder& embed) {
    return bertscore(candidate, reference, embed).f1;
}

/// Cosine of whole-response embeddings. Throws on unembeddable text.
inline double response_cosine(const std::string& candidate, const std::string& reference,
                              const EmbedderConfig& cfg) {
    auto v = embed_batch({candidate, reference}, cfg);
    return std::clamp(cosine(v[0], v[1]), -1.0, 1.0);
}

}  // namespace specrag::metrics
