// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * Principle-guided decoding.
 *
 * At every step the model is queried twice: once with the principle in the
 * context (constrained policy pi_c) and once without it (unconstrained policy
 * pi_u). Each candidate v is rewarded by the residual log-ratio
 *
 *   r(v) = log pi_c(v) - log pi_u(v) + sum_{k=1}^{W-1} gamma^k * h[-k]
 *
 * where h holds the realized log-ratios of already decoded tokens. The step
 * policy is pi_c tilted by exp(r / beta) and renormalized:
 *
 *   p(v) = pi_c(v) * exp(r(v) / beta) / Z
 *
 * The history sum is the same for every candidate, so it cancels in Z; the
 * normalized policy reduces to
 *
 *   log p(v) = (1 + 1/beta) log pi_c(v) - (1/beta) log pi_u(v) - log Z'
 *
 * With W = 2 and gamma = 1 the reward is the two-step sum over t-1 and t.
 */

#include <cmath>
#include <span>
#include <vector>

#include "opad/decode.hpp"
#include "opad/distribution.hpp"
#include "opad/lm.hpp"
#include "opad/prompt.hpp"

namespace opad {

// Discounted sum of the most recent min(W-1, |history|) realized log-ratios,
// most recent weighted by gamma, the one before by gamma^2, ...
inline double reward_history_term(std::span<const double> history, std::size_t window, double discount) {
    if (window < 1) {
        throw ConfigError("reward window must be >= 1");
    }
    const std::size_t terms = std::min(window - 1, history.size());
    double sum = 0.0;
    double weight = 1.0;
    for (std::size_t k = 1; k <= terms; ++k) {
        weight *= discount;
        sum += weight * history[history.size() - k];
    }
    return sum;
}

// Per-candidate log-ratio. Candidates impossible under pi_c get -inf; those
// possible under pi_c but not under pi_u get +inf.
inline double candidate_log_ratio(double logp_c, double logp_u) {
    if (logp_c == kNegInf) {
        return kNegInf;
    }
    if (logp_u == kNegInf) {
        return kPosInf;
    }
    return logp_c - logp_u;
}

inline std::vector<double> step_reward(const LogDistribution& logp_c, const LogDistribution& logp_u,
                                       std::span<const double> history, std::size_t window, double discount) {
    require_same_size(logp_c, logp_u);
    const double history_term = reward_history_term(history, window, discount);
    std::vector<double> reward(logp_c.size());
    for (std::size_t v = 0; v < reward.size(); ++v) {
        reward[v] = candidate_log_ratio(logp_c[v], logp_u[v]) + history_term;
    }
    return reward;
}

struct TiltResult {
    LogDistribution policy;
    double log_partition = 0.0;
};

namespace detail {

// Normalizes log-space scores. If some candidates score +inf they share all
// the mass in proportion to their base probability (the infinite-reward limit).
inline TiltResult normalize_scores(std::vector<double> scores, const LogDistribution& base) {
    bool any_inf = false;
    for (std::size_t v = 0; v < scores.size(); ++v) {
        if (std::isnan(scores[v])) {
            throw InputError("reward is NaN");
        }
        any_inf = any_inf || scores[v] == kPosInf;
    }
    if (any_inf) {
        std::vector<double> restricted(scores.size(), kNegInf);
        for (std::size_t v = 0; v < scores.size(); ++v) {
            if (scores[v] == kPosInf) {
                restricted[v] = base[v];
            }
        }
        return {LogDistribution::from_logits(std::move(restricted)), kPosInf};
    }
    const double log_z = log_sum_exp(scores);
    if (log_z == kNegInf) {
        throw DegenerateDistributionError("all candidates have zero probability after tilting");
    }
    return {LogDistribution::from_logits(std::move(scores)), log_z};
}

} // namespace detail

// log p(v) = log pi_c(v) + reward(v) / beta - log Z, with log Z returned.
inline TiltResult tilt_with_partition(const LogDistribution& logp_c, std::span<const double> reward, double beta) {
    if (!(beta > 0.0)) {
        throw ConfigError("beta must be > 0");
    }
    if (reward.size() != logp_c.size()) {
        throw InputError("reward length does not match the distribution");
    }
    std::vector<double> scores(logp_c.size());
    for (std::size_t v = 0; v < scores.size(); ++v) {
        scores[v] = logp_c[v] == kNegInf ? kNegInf : logp_c[v] + reward[v] / beta;
    }
    return detail::normalize_scores(std::move(scores), logp_c);
}

inline LogDistribution tilt_distribution(const LogDistribution& logp_c, std::span<const double> reward, double beta) {
    return tilt_with_partition(logp_c, reward, beta).policy;
}

// Probability-space evaluation: w(v) = pi_c(v) * exp(reward(v) / beta), p = w / sum(w).
// Fails when the weights overflow or all underflow.
inline TiltResult tilt_literal(const LogDistribution& logp_c, std::span<const double> reward, double beta) {
    if (!(beta > 0.0)) {
        throw ConfigError("beta must be > 0");
    }
    if (reward.size() != logp_c.size()) {
        throw InputError("reward length does not match the distribution");
    }
    std::vector<double> weights(logp_c.size());
    double z = 0.0;
    for (std::size_t v = 0; v < weights.size(); ++v) {
        const double pc = std::exp(logp_c[v]);
        weights[v] = pc == 0.0 ? 0.0 : pc * std::exp(reward[v] / beta);
        z += weights[v];
    }
    if (!(z > 0.0) || !std::isfinite(z)) {
        throw DegenerateDistributionError("probability-space partition function is not finite and positive");
    }
    std::vector<double> logs(weights.size());
    for (std::size_t v = 0; v < weights.size(); ++v) {
        logs[v] = weights[v] == 0.0 ? kNegInf : std::log(weights[v] / z);
    }
    return {LogDistribution::from_log_probs(std::move(logs), 1e-9), std::log(z)};
}

// (1 + 1/beta) log pi_c - (1/beta) log pi_u, renormalized. Equal to the tilt of
// any reward that differs from the current log-ratio by a candidate constant.
inline LogDistribution closed_form_tilt(const LogDistribution& logp_c, const LogDistribution& logp_u, double beta) {
    require_same_size(logp_c, logp_u);
    if (!(beta > 0.0)) {
        throw ConfigError("beta must be > 0");
    }
    const double inv_beta = 1.0 / beta;
    std::vector<double> scores(logp_c.size());
    for (std::size_t v = 0; v < scores.size(); ++v) {
        if (logp_c[v] == kNegInf) {
            scores[v] = kNegInf;
        } else if (logp_u[v] == kNegInf) {
            scores[v] = kPosInf;
        } else {
            scores[v] = (1.0 + inv_beta) * logp_c[v] - inv_beta * logp_u[v];
        }
    }
    return detail::normalize_scores(std::move(scores), logp_c).policy;
}

// Two forward passes per step; see the file comment.
class PrincipleGuidedPolicy {
public:
    PrincipleGuidedPolicy(const LanguageModel& lm, TokenSequence constrained, TokenSequence unconstrained,
                          const DecodeConfig& config)
        : m_lm(lm), m_ctx_c(std::move(constrained)), m_ctx_u(std::move(unconstrained)), m_config(config) {}

    StepDistribution next(std::size_t& forward_calls) {
        m_logp_c = m_lm.next_logprobs(m_ctx_c);
        ++forward_calls;
        m_logp_u = m_lm.next_logprobs(m_ctx_u);
        ++forward_calls;
        require_same_size(m_logp_c, m_logp_u);

        m_reward_const = reward_history_term(m_history, m_config.reward_window, m_config.discount);
        const std::vector<double> reward =
            step_reward(m_logp_c, m_logp_u, m_history, m_config.reward_window, m_config.discount);
        TiltResult tilt = m_config.tilt_path == TiltPath::literal ? tilt_literal(m_logp_c, reward, m_config.beta)
                                                                  : tilt_with_partition(m_logp_c, reward, m_config.beta);

        StepDistribution step{std::move(tilt.policy), {}};
        step.trace.reward_const = m_reward_const;
        step.trace.log_partition = tilt.log_partition;
        step.trace.kl_vs_unconstrained = kl_divergence(step.policy, m_logp_u);
        step.trace.kl_vs_constrained = kl_divergence(step.policy, m_logp_c);
        if (m_config.record_candidates) {
            step.trace.candidate_kl = kl_contributions(step.policy, m_logp_u);
        }
        return step;
    }

    void accept(TokenId token, StepTrace& trace) {
        const double ratio = candidate_log_ratio(m_logp_c[token], m_logp_u[token]);
        const double clamped = std::clamp(ratio, -m_config.log_ratio_clamp, m_config.log_ratio_clamp);
        trace.realized_log_ratio = ratio;
        trace.reward = clamped + m_reward_const;
        m_history.push_back(clamped);
        m_ctx_c.push_back(token);
        m_ctx_u.push_back(token);
    }

private:
    const LanguageModel& m_lm;
    TokenSequence m_ctx_c;
    TokenSequence m_ctx_u;
    const DecodeConfig& m_config;
    std::vector<double> m_history;
    LogDistribution m_logp_c;
    LogDistribution m_logp_u;
    double m_reward_const = 0.0;
};

// Decodes from explicit constrained / unconstrained prompt contexts.
inline DecodeResult opad_decode_contexts(const LanguageModel& lm, TokenSequence constrained,
                                         TokenSequence unconstrained, const DecodeConfig& config) {
    PrincipleGuidedPolicy policy(lm, std::move(constrained), std::move(unconstrained), config);
    return decode_loop(lm, config, policy);
}

inline DecodeResult opad_decode(const LanguageModel& lm, std::string_view query, const PrincipleSpec& principle,
                                const PromptTemplate& tmpl, const DecodeConfig& config) {
    if (principle.text.empty()) {
        throw InputError("principle text is empty");
    }
    config.validate();
    return opad_decode_contexts(lm, build_context(lm, tmpl, query, &principle), build_context(lm, tmpl, query),
                                config);
}

struct SequenceKl {
    // Sum over all length-T sequences of pi_c(y) log(pi_c(y) / pi_u(y)).
    double enumerated = 0.0;
    // Sum over steps t of E_{pi_c}[log pi_c(y_t | .) - log pi_u(y_t | .)].
    double decomposed = 0.0;
};

namespace detail {

inline double checked_sequence_count(std::size_t vocab, std::size_t horizon, double cap) {
    double count = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        count *= static_cast<double>(vocab);
        if (count > cap) {
            throw ResourceError("V^T = " + std::to_string(vocab) + "^" + std::to_string(horizon) +
                                " sequences exceeds the enumeration cap");
        }
    }
    return count;
}

inline void accumulate_stepwise(const LanguageModel& lm, TokenSequence& ctx_c, TokenSequence& ctx_u,
                                double log_prefix_prob, std::size_t remaining, double& total) {
    if (remaining == 0 || log_prefix_prob == kNegInf) {
        return;
    }
    const LogDistribution pc = lm.next_logprobs(ctx_c);
    const LogDistribution pu = lm.next_logprobs(ctx_u);
    const double prefix_prob = std::exp(log_prefix_prob);
    for (std::size_t v = 0; v < pc.size(); ++v) {
        if (pc[v] == kNegInf) {
            continue;
        }
        total += prefix_prob * std::exp(pc[v]) * candidate_log_ratio(pc[v], pu[v]);
        ctx_c.push_back(static_cast<TokenId>(v));
        ctx_u.push_back(static_cast<TokenId>(v));
        accumulate_stepwise(lm, ctx_c, ctx_u, log_prefix_prob + pc[v], remaining - 1, total);
        ctx_c.pop_back();
        ctx_u.pop_back();
    }
}

} // namespace detail

// Sequence-level KL between the constrained and unconstrained policies over a
// fixed horizon, computed twice: by enumerating all V^T sequences and by the
// per-step expectation decomposition. Only for small enumerable models.
inline SequenceKl sequence_kl(const LanguageModel& lm, const TokenSequence& constrained_ctx,
                              const TokenSequence& unconstrained_ctx, std::size_t horizon,
                              double enumeration_cap = 1e6) {
    const std::size_t V = lm.vocab_size();
    detail::checked_sequence_count(V, horizon, enumeration_cap);
    SequenceKl out;

    // Odometer over all sequences; each sequence scored from scratch.
    std::vector<std::size_t> digits(horizon, 0);
    while (true) {
        TokenSequence ctx_c = constrained_ctx;
        TokenSequence ctx_u = unconstrained_ctx;
        double log_pc = 0.0;
        double log_pu = 0.0;
        for (std::size_t t = 0; t < horizon && log_pc != kNegInf; ++t) {
            const auto tok = static_cast<TokenId>(digits[t]);
            log_pc += lm.next_logprobs(ctx_c)[tok];
            log_pu += lm.next_logprobs(ctx_u)[tok];
            ctx_c.push_back(tok);
            ctx_u.push_back(tok);
        }
        if (log_pc != kNegInf) {
            out.enumerated += std::exp(log_pc) * (log_pu == kNegInf ? kPosInf : log_pc - log_pu);
        }
        std::size_t pos = horizon;
        while (pos > 0 && ++digits[pos - 1] == V) {
            digits[pos - 1] = 0;
            --pos;
        }
        if (pos == 0) {
            break;
        }
    }

    TokenSequence ctx_c = constrained_ctx;
    TokenSequence ctx_u = unconstrained_ctx;
    detail::accumulate_stepwise(lm, ctx_c, ctx_u, 0.0, horizon, out.decomposed);
    return out;
}

} // namespace opad
