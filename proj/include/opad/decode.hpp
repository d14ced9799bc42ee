// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "opad/distribution.hpp"
#include "opad/errors.hpp"
#include "opad/lm.hpp"

namespace opad {

enum class SamplingMode { greedy, temperature };

struct SamplingConfig {
    SamplingMode mode = SamplingMode::greedy;
    double temperature = 1.0;
    std::uint64_t seed = 0;

    friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

// How the tilted step policy is evaluated. log_space is the stable production
// path; literal multiplies probabilities by exp(reward / beta) directly and
// overflows for large |reward| / small beta.
enum class TiltPath { log_space, literal };

struct DecodeConfig {
    double beta = 1.0;
    std::size_t reward_window = 2;
    double discount = 1.0;
    std::size_t max_tokens = 64;
    SamplingConfig sampling;
    std::set<TokenId> stop_tokens;
    TiltPath tilt_path = TiltPath::log_space;
    // Realized log-ratios enter the reward history clamped to +-this bound.
    double log_ratio_clamp = 30.0;
    // Store per-candidate KL contributions in the trace (V doubles per step).
    bool record_candidates = false;

    void validate() const {
        if (!(beta > 0.0) || std::isinf(beta)) {
            throw ConfigError("beta must be a positive finite number");
        }
        if (reward_window < 1) {
            throw ConfigError("reward window must be >= 1");
        }
        if (!(discount >= 0.0 && discount <= 1.0)) {
            throw ConfigError("discount must lie in [0, 1]");
        }
        if (max_tokens < 1) {
            throw ConfigError("max_tokens must be >= 1");
        }
        if (sampling.mode == SamplingMode::temperature && !(sampling.temperature > 0.0)) {
            throw ConfigError("sampling temperature must be > 0");
        }
        if (!(log_ratio_clamp > 0.0)) {
            throw ConfigError("log-ratio clamp must be > 0");
        }
    }

    friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

// One decoding step. Fields a method does not compute stay empty.
struct StepTrace {
    TokenId token = 0;
    // Log-probability of `token` under the policy it was drawn from.
    double log_prob = 0.0;
    // log pi_c(token) - log pi_u(token), unclamped.
    std::optional<double> realized_log_ratio;
    // Candidate-independent history part of the reward.
    std::optional<double> reward_const;
    // Reward realized at `token`: clamped log-ratio plus reward_const.
    std::optional<double> reward;
    std::optional<double> log_partition;
    std::optional<double> kl_vs_unconstrained;
    std::optional<double> kl_vs_constrained;
    std::vector<double> candidate_kl;

    friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct DecodeResult {
    // Generated tokens; a terminating stop token is included here but not in text.
    TokenSequence tokens;
    std::string text;
    std::vector<StepTrace> trace;
    std::size_t forward_calls = 0;
    std::chrono::nanoseconds wall_time{0};
    bool stopped = false;
    // Best-of-n bookkeeping.
    std::vector<double> candidate_scores;
    std::optional<std::size_t> selected_candidate;
};

// A transport failure part-way through a decode; the steps completed so far
// are attached.
class PartialDecodeError : public TransportError {
public:
    PartialDecodeError(const TransportError& cause, DecodeResult partial)
        : TransportError(cause.what(), cause.status(), cause.retriable()), m_partial(std::move(partial)) {}

    const DecodeResult& partial() const noexcept { return m_partial; }

private:
    DecodeResult m_partial;
};

// splitmix64 finalizer; derives independent per-sample seeds from a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class TokenSampler {
public:
    explicit TokenSampler(std::uint64_t seed) : m_rng(seed) {}

    TokenId select(const LogDistribution& dist, const SamplingConfig& cfg) {
        if (cfg.mode == SamplingMode::greedy) {
            return static_cast<TokenId>(argmax(dist.values()));
        }
        std::vector<double> scaled(dist.begin(), dist.end());
        for (double& v : scaled) {
            v /= cfg.temperature;
        }
        const double lse = log_sum_exp(scaled);
        // 53 random bits -> uniform double in [0, 1).
        const double u = static_cast<double>(m_rng() >> 11) * 0x1.0p-53;
        double cumulative = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            const double p = std::exp(scaled[i] - lse);
            if (p > 0.0) {
                last_positive = i;
            }
            cumulative += p;
            if (u < cumulative) {
                return static_cast<TokenId>(i);
            }
        }
        return static_cast<TokenId>(last_positive);
    }

private:
    std::mt19937_64 m_rng;
};

struct StepDistribution {
    LogDistribution policy;
    StepTrace trace;
};

// Shared autoregressive loop. A Policy provides
//   StepDistribution next(std::size_t& forward_calls);
//   void accept(TokenId token, StepTrace& trace);
// where next() adds the number of model calls it made.
template <typename Policy>
DecodeResult decode_loop(const LanguageModel& lm, const DecodeConfig& config, Policy& policy) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    TokenSampler sampler(config.sampling.seed);
    DecodeResult result;
    try {
        for (std::size_t t = 0; t < config.max_tokens; ++t) {
            StepDistribution step = policy.next(result.forward_calls);
            const TokenId token = sampler.select(step.policy, config.sampling);
            step.trace.token = token;
            step.trace.log_prob = step.policy[token];
            policy.accept(token, step.trace);
            result.trace.push_back(std::move(step.trace));
            result.tokens.push_back(token);
            if (config.stop_tokens.count(token)) {
                result.stopped = true;
                break;
            }
        }
    } catch (const TransportError& e) {
        result.wall_time = std::chrono::steady_clock::now() - started;
        // Best effort: a remote backend that just failed may not detokenize either.
        try {
            result.text = lm.detokenize(result.tokens);
        } catch (const std::exception&) {
        }
        throw PartialDecodeError(e, std::move(result));
    }
    std::span<const TokenId> emitted(result.tokens);
    if (result.stopped) {
        emitted = emitted.first(emitted.size() - 1);
    }
    result.text = lm.detokenize(emitted);
    result.wall_time = std::chrono::steady_clock::now() - started;
    return result;
}

} // namespace opad
