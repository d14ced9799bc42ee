// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "opad/errors.hpp"

namespace opad {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// log(sum_i exp(x_i)), shifted by the max so large magnitudes stay finite.
// Empty input and all -inf give -inf; any +inf gives +inf.
template <typename Range>
double log_sum_exp(const Range& values) {
    double max_value = kNegInf;
    for (double v : values) {
        max_value = std::max(max_value, v);
    }
    if (max_value == kNegInf || max_value == kPosInf) {
        return max_value;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - max_value);
    }
    return max_value + std::log(sum);
}

// Normalized next-token log-probabilities over a full vocabulary.
class LogDistribution {
public:
    static constexpr double kNormTolerance = 1e-9;

    LogDistribution() = default;

    // Takes values that must already be normalized within `tolerance`.
    static LogDistribution from_log_probs(std::vector<double> values, double tolerance = kNormTolerance) {
        check_no_nan(values);
        const double lse = log_sum_exp(values);
        if (!(std::abs(lse) <= tolerance)) {
            throw InputError("log-probabilities are not normalized (logsumexp = " + std::to_string(lse) + ")");
        }
        return LogDistribution(std::move(values));
    }

    // Log-softmax of arbitrary scores; -inf entries stay at zero probability.
    static LogDistribution from_logits(std::vector<double> logits) {
        check_no_nan(logits);
        const double lse = log_sum_exp(logits);
        if (lse == kNegInf) {
            throw DegenerateDistributionError("all candidates have zero probability");
        }
        if (lse == kPosInf) {
            throw InputError("logits contain +inf");
        }
        for (double& v : logits) {
            v -= lse;
        }
        return LogDistribution(std::move(logits));
    }

    // Non-negative weights, normalized here.
    static LogDistribution from_probs(std::span<const double> probs) {
        std::vector<double> logs;
        logs.reserve(probs.size());
        for (double p : probs) {
            if (std::isnan(p) || p < 0.0) {
                throw InputError("probabilities must be non-negative");
            }
            logs.push_back(p == 0.0 ? kNegInf : std::log(p));
        }
        return from_logits(std::move(logs));
    }

    static LogDistribution uniform(std::size_t vocab_size) {
        if (vocab_size == 0) {
            throw InputError("vocabulary is empty");
        }
        return LogDistribution(std::vector<double>(vocab_size, -std::log(static_cast<double>(vocab_size))));
    }

    std::size_t size() const noexcept { return m_values.size(); }
    bool empty() const noexcept { return m_values.empty(); }
    double operator[](std::size_t i) const { return m_values[i]; }
    double prob(std::size_t i) const { return std::exp(m_values[i]); }
    std::span<const double> values() const noexcept { return m_values; }
    auto begin() const noexcept { return m_values.begin(); }
    auto end() const noexcept { return m_values.end(); }

    std::vector<double> probs() const {
        std::vector<double> out(m_values.size());
        std::transform(m_values.begin(), m_values.end(), out.begin(), [](double v) { return std::exp(v); });
        return out;
    }

    friend bool operator==(const LogDistribution&, const LogDistribution&) = default;

private:
    explicit LogDistribution(std::vector<double> values) : m_values(std::move(values)) {}

    static void check_no_nan(const std::vector<double>& values) {
        for (double v : values) {
            if (std::isnan(v)) {
                throw InputError("distribution contains NaN");
            }
        }
    }

    std::vector<double> m_values;
};

inline void require_same_size(const LogDistribution& a, const LogDistribution& b) {
    if (a.size() != b.size()) {
        throw InputError("distribution length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
}

// KL(a || b) in nats. Zero-probability entries of `a` contribute nothing.
inline double kl_divergence(const LogDistribution& a, const LogDistribution& b) {
    require_same_size(a, b);
    double kl = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == kNegInf) {
            continue;
        }
        if (b[i] == kNegInf) {
            return kPosInf;
        }
        kl += std::exp(a[i]) * (a[i] - b[i]);
    }
    return std::max(kl, 0.0);
}

// Per-candidate terms a(v) * (log a(v) - log b(v)); they sum to KL(a || b).
inline std::vector<double> kl_contributions(const LogDistribution& a, const LogDistribution& b) {
    require_same_size(a, b);
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == kNegInf) {
            continue;
        }
        out[i] = b[i] == kNegInf ? kPosInf : std::exp(a[i]) * (a[i] - b[i]);
    }
    return out;
}

// Max absolute difference of the probabilities.
inline double linf_prob_distance(const LogDistribution& a, const LogDistribution& b) {
    require_same_size(a, b);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(std::exp(a[i]) - std::exp(b[i])));
    }
    return d;
}

// Lowest index among the maxima.
inline std::size_t argmax(std::span<const double> values) {
    if (values.empty()) {
        throw InputError("argmax of empty vector");
    }
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

} // namespace opad
