// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "opad/decode.hpp"
#include "opad/distribution.hpp"
#include "opad/lm.hpp"

namespace opad {

struct MetricReport {
    double distinct_1 = 0.0;
    double distinct_2 = 0.0;
    std::optional<double> ppl;
    std::optional<double> rouge_1;
    std::optional<double> rouge_2;
    std::optional<double> rouge_l;
    std::size_t n_samples = 0;
};

namespace detail {

using Ngram = std::vector<std::string>;

inline std::vector<Ngram> ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    std::vector<Ngram> out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    return out;
}

inline std::vector<std::string> words(std::string_view text, bool fold_case) {
    std::vector<std::string> out;
    for (std::string_view w : split_whitespace(text)) {
        std::string s(w);
        if (fold_case) {
            std::transform(s.begin(), s.end(), s.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace detail

// Unique n-grams over total n-grams, pooled across all texts.
inline double distinct_n(std::span<const std::string> texts, std::size_t n) {
    if (n < 1) {
        throw InputError("distinct-n needs n >= 1");
    }
    std::map<detail::Ngram, std::size_t> seen;
    std::size_t total = 0;
    for (const std::string& text : texts) {
        for (auto& g : detail::ngrams(detail::words(text, false), n)) {
            ++seen[std::move(g)];
            ++total;
        }
    }
    if (total == 0) {
        throw UndefinedMetricError("no " + std::to_string(n) + "-grams in the texts");
    }
    return static_cast<double>(seen.size()) / static_cast<double>(total);
}

// Mean of distinct-n computed per text; texts shorter than n are skipped.
inline double distinct_n_per_sample(std::span<const std::string> texts, std::size_t n) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const std::string& text : texts) {
        if (detail::words(text, false).size() >= n) {
            sum += distinct_n(std::span<const std::string>(&text, 1), n);
            ++counted;
        }
    }
    if (counted == 0) {
        throw UndefinedMetricError("no text has " + std::to_string(n) + " tokens");
    }
    return sum / static_cast<double>(counted);
}

// exp(-mean log p(token_t | context, prefix)). +inf when any token has zero probability.
inline double perplexity(const LanguageModel& oracle, std::string_view text, TokenSequence context = {}) {
    const TokenSequence tokens = oracle.tokenize(text);
    if (tokens.empty()) {
        throw InputError("perplexity needs at least one token");
    }
    double log_likelihood = 0.0;
    for (TokenId tok : tokens) {
        const double lp = oracle.next_logprobs(context)[tok];
        if (lp == kNegInf) {
            return kPosInf;
        }
        log_likelihood += lp;
        context.push_back(tok);
    }
    return std::exp(-log_likelihood / static_cast<double>(tokens.size()));
}

struct RougeScores {
    double rouge_1 = 0.0;
    double rouge_2 = 0.0;
    double rouge_l = 0.0;
};

namespace detail {

inline double f1(double overlap, std::size_t candidate_total, std::size_t reference_total) {
    if (overlap == 0.0 || candidate_total == 0 || reference_total == 0) {
        return 0.0;
    }
    const double p = overlap / static_cast<double>(candidate_total);
    const double r = overlap / static_cast<double>(reference_total);
    return 2.0 * p * r / (p + r);
}

inline double rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t n) {
    std::map<Ngram, std::size_t> ref_counts;
    const auto ref_grams = ngrams(ref, n);
    for (const auto& g : ref_grams) {
        ++ref_counts[g];
    }
    const auto cand_grams = ngrams(cand, n);
    std::map<Ngram, std::size_t> cand_counts;
    for (const auto& g : cand_grams) {
        ++cand_counts[g];
    }
    std::size_t overlap = 0;
    for (const auto& [g, c] : cand_counts) {
        auto it = ref_counts.find(g);
        if (it != ref_counts.end()) {
            overlap += std::min(c, it->second);
        }
    }
    return f1(static_cast<double>(overlap), cand_grams.size(), ref_grams.size());
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace detail

// ROUGE-1/2 (clipped n-gram overlap) and ROUGE-L (LCS) F1 scores over
// case-folded whitespace tokens, no stemming.
inline RougeScores rouge(std::string_view candidate, std::string_view reference) {
    const auto cand = detail::words(candidate, true);
    const auto ref = detail::words(reference, true);
    if (cand.empty() || ref.empty()) {
        throw InputError("rouge needs non-empty candidate and reference");
    }
    RougeScores s;
    s.rouge_1 = detail::rouge_n(cand, ref, 1);
    s.rouge_2 = detail::rouge_n(cand, ref, 2);
    s.rouge_l = detail::f1(static_cast<double>(detail::lcs_length(cand, ref)), cand.size(), ref.size());
    return s;
}

struct KlPoint {
    std::size_t position = 0; // 1-based decoding step
    double mean_kl = 0.0;
    std::size_t count = 0;
};

using KlCurve = std::vector<KlPoint>;

namespace detail {

inline KlCurve kl_curve_from_values(const std::vector<std::vector<double>>& per_sample, std::size_t max_position) {
    if (per_sample.empty()) {
        throw InputError("token KL curve needs at least one sample");
    }
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    for (const auto& sample : per_sample) {
        const std::size_t len = std::min(sample.size(), max_position);
        if (sums.size() < len) {
            sums.resize(len, 0.0);
            counts.resize(len, 0);
        }
        for (std::size_t t = 0; t < len; ++t) {
            sums[t] += sample[t];
            ++counts[t];
        }
    }
    KlCurve curve;
    for (std::size_t t = 0; t < sums.size(); ++t) {
        curve.push_back({t + 1, sums[t] / static_cast<double>(counts[t]), counts[t]});
    }
    return curve;
}

} // namespace detail

using PolicyPair = std::pair<LogDistribution, LogDistribution>;

// Per position, mean over samples of KL(first || second).
inline KlCurve token_kl_curve(const std::vector<std::vector<PolicyPair>>& samples, std::size_t max_position) {
    std::vector<std::vector<double>> values;
    values.reserve(samples.size());
    for (const auto& sample : samples) {
        std::vector<double>& v = values.emplace_back();
        for (const auto& [a, b] : sample) {
            v.push_back(kl_divergence(a, b));
        }
    }
    return detail::kl_curve_from_values(values, max_position);
}

// Uses the recorded KL between the decoding policy and the unconstrained policy.
inline KlCurve token_kl_curve(const std::vector<std::vector<StepTrace>>& traces, std::size_t max_position) {
    std::vector<std::vector<double>> values;
    values.reserve(traces.size());
    for (const auto& trace : traces) {
        std::vector<double>& v = values.emplace_back();
        for (const StepTrace& step : trace) {
            if (!step.kl_vs_unconstrained) {
                throw UnsupportedAnalysisError("trace has no per-step KL; decode with a two-pass method");
            }
            v.push_back(*step.kl_vs_unconstrained);
        }
    }
    return detail::kl_curve_from_values(values, max_position);
}

struct RewardLandscape {
    std::vector<double> edges; // bins + 1 edges
    std::vector<std::size_t> counts;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t steps = 0;
};

// Histogram of realized scaled rewards r / beta for every step of every
// trace. The range defaults to the data range; values outside an explicit
// range land in the edge bins so counts always sum to the step count.
inline RewardLandscape reward_landscape(const std::vector<std::vector<StepTrace>>& traces, double beta,
                                        std::size_t bins,
                                        std::optional<std::pair<double, double>> range = std::nullopt) {
    if (bins < 1) {
        throw InputError("reward landscape needs at least one bin");
    }
    if (!(beta > 0.0)) {
        throw ConfigError("beta must be > 0");
    }
    std::vector<double> values;
    for (const auto& trace : traces) {
        for (const StepTrace& step : trace) {
            if (!step.reward) {
                throw UnsupportedAnalysisError("trace has no reward values; decode with opad");
            }
            values.push_back(*step.reward / beta);
        }
    }
    if (values.empty()) {
        throw InputError("reward landscape needs at least one step");
    }

    RewardLandscape out;
    out.steps = values.size();
    out.min = *std::min_element(values.begin(), values.end());
    out.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        sq += (v - out.mean) * (v - out.mean);
    }
    out.stddev = std::sqrt(sq / static_cast<double>(values.size()));

    auto [lo, hi] = range.value_or(std::pair{out.min, out.max});
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) {
        out.edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
    }
    out.counts.assign(bins, 0);
    for (double v : values) {
        std::size_t b = 0;
        if (v >= hi) {
            b = bins - 1;
        } else if (v > lo) {
            b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
        }
        ++out.counts[b];
    }
    return out;
}

// Floats with 9 significant digits.
inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const KlCurve& curve) {
    out << "position,mean_kl,count\n";
    for (const KlPoint& p : curve) {
        out << p.position << ',' << format_float(p.mean_kl) << ',' << p.count << '\n';
    }
}

inline void write_csv(std::ostream& out, const RewardLandscape& landscape) {
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < landscape.counts.size(); ++b) {
        out << format_float(landscape.edges[b]) << ',' << format_float(landscape.edges[b + 1]) << ','
            << landscape.counts[b] << '\n';
    }
}

} // namespace opad
