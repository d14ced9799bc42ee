// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opad/decode.hpp"
#include "opad/lm.hpp"
#include "opad/prompt.hpp"

namespace opad {

enum class MethodKind { DP, PP, ICL, BoN, SelfCD, OPAD };

inline constexpr std::size_t kDefaultShots = 5;
inline constexpr std::size_t kDefaultBestOfN = 16;
inline constexpr double kDefaultSelfCdAlpha = 1.0;

struct MethodSpec {
    MethodKind kind = MethodKind::OPAD;
    std::size_t shots = kDefaultShots;  // ICL
    std::size_t n = kDefaultBestOfN;    // BoN
    double alpha = kDefaultSelfCdAlpha; // SelfCD

    void validate() const {
        if (kind == MethodKind::BoN && n < 1) {
            throw ConfigError("best-of-n needs N >= 1");
        }
        if (kind == MethodKind::SelfCD && !(alpha >= 0.0)) {
            throw ConfigError("self-contrastive alpha must be >= 0");
        }
    }

    friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

inline std::string_view method_name(MethodKind kind) {
    switch (kind) {
    case MethodKind::DP: return "dp";
    case MethodKind::PP: return "pp";
    case MethodKind::ICL: return "icl";
    case MethodKind::BoN: return "bon";
    case MethodKind::SelfCD: return "selfcd";
    case MethodKind::OPAD: return "opad";
    }
    return "unknown";
}

inline MethodKind parse_method(std::string_view name) {
    for (MethodKind k : {MethodKind::DP, MethodKind::PP, MethodKind::ICL, MethodKind::BoN, MethodKind::SelfCD,
                         MethodKind::OPAD}) {
        if (method_name(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

// Plain autoregressive sampling from a single context; one forward pass per token.
class PlainPolicy {
public:
    PlainPolicy(const LanguageModel& lm, TokenSequence context) : m_lm(lm), m_ctx(std::move(context)) {}

    StepDistribution next(std::size_t& forward_calls) {
        StepDistribution step{m_lm.next_logprobs(m_ctx), {}};
        ++forward_calls;
        return step;
    }

    void accept(TokenId token, StepTrace&) { m_ctx.push_back(token); }

private:
    const LanguageModel& m_lm;
    TokenSequence m_ctx;
};

inline DecodeResult decode_from_context(const LanguageModel& lm, TokenSequence context, const DecodeConfig& config) {
    PlainPolicy policy(lm, std::move(context));
    return decode_loop(lm, config, policy);
}

// Direct prompting when `principle` is null, principle prompting otherwise.
inline DecodeResult decode_plain(const LanguageModel& lm, std::string_view query, const PromptTemplate& tmpl,
                                 const DecodeConfig& config, const PrincipleSpec* principle = nullptr) {
    config.validate();
    return decode_from_context(lm, build_context(lm, tmpl, query, principle), config);
}

// q(v) = p_c(v) + alpha * (p_c(v) - p_u(v)) in probability space, negative
// mass clamped to zero, then renormalized.
inline LogDistribution self_cd_distribution(const LogDistribution& p_c, const LogDistribution& p_u, double alpha) {
    require_same_size(p_c, p_u);
    if (!(alpha >= 0.0)) {
        throw ConfigError("self-contrastive alpha must be >= 0");
    }
    if (alpha == 0.0) {
        return p_c;
    }
    std::vector<double> q(p_c.size());
    for (std::size_t v = 0; v < q.size(); ++v) {
        const double pc = std::exp(p_c[v]);
        const double pu = std::exp(p_u[v]);
        q[v] = std::max(0.0, pc + alpha * (pc - pu));
    }
    return LogDistribution::from_probs(q);
}

class SelfContrastivePolicy {
public:
    SelfContrastivePolicy(const LanguageModel& lm, TokenSequence constrained, TokenSequence unconstrained,
                          double alpha)
        : m_lm(lm), m_ctx_c(std::move(constrained)), m_ctx_u(std::move(unconstrained)), m_alpha(alpha) {}

    StepDistribution next(std::size_t& forward_calls) {
        const LogDistribution pc = m_lm.next_logprobs(m_ctx_c);
        ++forward_calls;
        const LogDistribution pu = m_lm.next_logprobs(m_ctx_u);
        ++forward_calls;
        StepDistribution step{self_cd_distribution(pc, pu, m_alpha), {}};
        step.trace.kl_vs_unconstrained = kl_divergence(step.policy, pu);
        step.trace.kl_vs_constrained = kl_divergence(step.policy, pc);
        m_last_c = pc;
        m_last_u = pu;
        return step;
    }

    void accept(TokenId token, StepTrace& trace) {
        trace.realized_log_ratio = m_last_c[token] == kNegInf ? kNegInf
                                   : m_last_u[token] == kNegInf
                                       ? kPosInf
                                       : m_last_c[token] - m_last_u[token];
        m_ctx_c.push_back(token);
        m_ctx_u.push_back(token);
    }

private:
    const LanguageModel& m_lm;
    TokenSequence m_ctx_c;
    TokenSequence m_ctx_u;
    double m_alpha;
    LogDistribution m_last_c;
    LogDistribution m_last_u;
};

inline DecodeResult self_cd_decode(const LanguageModel& lm, std::string_view query, const PrincipleSpec& principle,
                                   const PromptTemplate& tmpl, const DecodeConfig& config, double alpha) {
    config.validate();
    SelfContrastivePolicy policy(lm, build_context(lm, tmpl, query, &principle), build_context(lm, tmpl, query),
                                 alpha);
    return decode_loop(lm, config, policy);
}

// Uses the first `n_shots` shots (all of them if fewer are supplied).
inline DecodeResult icl_decode(const LanguageModel& lm, std::string_view query, std::span<const Shot> shots,
                               const PromptTemplate& tmpl, const DecodeConfig& config,
                               std::size_t n_shots = kDefaultShots) {
    config.validate();
    const auto used = shots.first(std::min(n_shots, shots.size()));
    return decode_from_context(lm, build_context(lm, tmpl, query, nullptr, used), config);
}

// Response scorer for best-of-n; higher is better, deterministic per input.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(std::string_view query, std::string_view response) const = 0;
};

// Sum of log pi(response | constrained context) under the model itself.
class LogLikelihoodScorer final : public Scorer {
public:
    LogLikelihoodScorer(const LanguageModel& lm, const PromptTemplate& tmpl, std::optional<PrincipleSpec> principle)
        : m_lm(lm), m_tmpl(tmpl), m_principle(std::move(principle)) {}

    double score(std::string_view query, std::string_view response) const override {
        TokenSequence ctx = build_context(m_lm, m_tmpl, query, m_principle ? &*m_principle : nullptr);
        double total = 0.0;
        for (TokenId tok : m_lm.tokenize(response)) {
            total += m_lm.next_logprobs(ctx)[tok];
            ctx.push_back(tok);
        }
        return total;
    }

private:
    const LanguageModel& m_lm;
    PromptTemplate m_tmpl;
    std::optional<PrincipleSpec> m_principle;
};

// Draws N principle-prompted samples with seeds derived from the root seed and
// keeps the best under `scorer`; ties go to the lowest index. forward_calls
// totals all N samples.
inline DecodeResult best_of_n(const LanguageModel& lm, std::string_view query, const PromptTemplate& tmpl,
                              const DecodeConfig& config, std::size_t n, const Scorer& scorer,
                              const PrincipleSpec* principle = nullptr) {
    config.validate();
    if (n < 1) {
        throw ConfigError("best-of-n needs N >= 1");
    }
    if (config.sampling.mode != SamplingMode::temperature) {
        throw ConfigError("best-of-n needs stochastic (temperature) sampling");
    }
    std::vector<double> scores;
    std::optional<DecodeResult> best;
    std::size_t best_index = 0;
    std::size_t total_calls = 0;
    std::chrono::nanoseconds total_time{0};
    for (std::size_t i = 0; i < n; ++i) {
        DecodeConfig sample_config = config;
        sample_config.sampling.seed = derive_seed(config.sampling.seed, i);
        DecodeResult sample = decode_plain(lm, query, tmpl, sample_config, principle);
        total_calls += sample.forward_calls;
        total_time += sample.wall_time;
        double s = 0.0;
        try {
            s = scorer.score(query, sample.text);
        } catch (const std::exception& e) {
            throw EvaluationError(std::string("scorer failed on sample ") + std::to_string(i) + ": " + e.what(),
                                  scores);
        }
        if (std::isnan(s)) {
            throw EvaluationError("scorer returned NaN on sample " + std::to_string(i), scores);
        }
        scores.push_back(s);
        if (!best || s > scores[best_index]) {
            best = std::move(sample);
            best_index = i;
        }
    }
    DecodeResult result = std::move(*best);
    result.forward_calls = total_calls;
    result.wall_time = total_time;
    result.candidate_scores = std::move(scores);
    result.selected_candidate = best_index;
    return result;
}

} // namespace opad
