// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "opad/baselines.hpp"
#include "opad/http.hpp"
#include "opad/lm.hpp"

namespace opad {

// Client for a logit server:
//   GET  /v1/meta         -> {"vocab_size": int}
//   POST /v1/logprobs     {"tokens": [int...]} -> {"logprobs": [float x V]}
//   POST /v1/tokenize     {"text": str}        -> {"tokens": [int...]}
//   POST /v1/detokenize   {"tokens": [int...]} -> {"text": str}
// Full-vocabulary log-probabilities are required; they are renormalized on
// arrival to absorb float32 rounding on the server side.
class HttpLanguageModel final : public LanguageModel {
public:
    struct Options {
        std::chrono::milliseconds timeout{30000};
        int max_retries = 2;
        std::chrono::milliseconds initial_backoff{200};
    };

    explicit HttpLanguageModel(const std::string& url) : HttpLanguageModel(url, Options{}) {}

    HttpLanguageModel(const std::string& url, Options options) : m_url(http::parse_url(url)), m_options(options) {
        const auto meta = call([&] { return http::get_json(m_url.origin, m_url.path + "/v1/meta", request_options()); });
        if (!meta.contains("vocab_size") || !meta["vocab_size"].is_number_integer() || meta["vocab_size"] <= 0) {
            throw ParseError("logit server meta has no positive vocab_size", meta.dump());
        }
        m_vocab_size = meta["vocab_size"].get<std::size_t>();
    }

    std::size_t vocab_size() const override { return m_vocab_size; }

    LogDistribution next_logprobs(std::span<const TokenId> context) const override {
        check_tokens_in_range(context, m_vocab_size);
        const http::json body{{"tokens", std::vector<TokenId>(context.begin(), context.end())}};
        const auto reply = call([&] { return post("/v1/logprobs", body); });
        if (!reply.contains("logprobs") || !reply["logprobs"].is_array()) {
            throw ParseError("logit server reply has no logprobs array", reply.dump());
        }
        std::vector<double> values;
        values.reserve(m_vocab_size);
        for (const auto& v : reply["logprobs"]) {
            values.push_back(v.is_null() ? kNegInf : v.get<double>());
        }
        if (values.size() != m_vocab_size) {
            throw ParseError("logit server returned " + std::to_string(values.size()) + " values for vocabulary of " +
                                 std::to_string(m_vocab_size),
                             reply.dump());
        }
        return LogDistribution::from_logits(std::move(values));
    }

    TokenSequence tokenize(std::string_view text) const override {
        const auto reply = call([&] { return post("/v1/tokenize", {{"text", std::string(text)}}); });
        TokenSequence tokens = reply.at("tokens").get<TokenSequence>();
        check_tokens_in_range(tokens, m_vocab_size);
        return tokens;
    }

    std::string detokenize(std::span<const TokenId> tokens) const override {
        const http::json body{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}};
        return call([&] { return post("/v1/detokenize", body); }).at("text").get<std::string>();
    }

private:
    http::RequestOptions request_options() const { return {m_options.timeout, {}}; }

    http::json post(const std::string& path, const http::json& body) const {
        return http::post_json(m_url.origin, m_url.path + path, body, request_options());
    }

    template <typename Fn>
    http::json call(Fn&& fn) const {
        return http::with_retries(std::forward<Fn>(fn), m_options.max_retries, m_options.initial_backoff);
    }

    http::Url m_url;
    Options m_options;
    std::size_t m_vocab_size = 0;
};

// Reward-model scorer behind HTTP: POST {"query": str, "response": str} -> {"score": float}.
class HttpRewardScorer final : public Scorer {
public:
    HttpRewardScorer(const std::string& url, std::chrono::milliseconds timeout = std::chrono::seconds(30),
                     int max_retries = 2)
        : m_url(http::parse_url(url)), m_timeout(timeout), m_max_retries(max_retries) {}

    double score(std::string_view query, std::string_view response) const override {
        const http::json body{{"query", std::string(query)}, {"response", std::string(response)}};
        const auto reply = http::with_retries(
            [&] { return http::post_json(m_url.origin, m_url.path, body, {m_timeout, {}}); }, m_max_retries,
            std::chrono::milliseconds(200));
        if (!reply.contains("score") || !reply["score"].is_number()) {
            throw ParseError("reward server reply has no numeric score", reply.dump());
        }
        return reply["score"].get<double>();
    }

private:
    http::Url m_url;
    std::chrono::milliseconds m_timeout;
    int m_max_retries;
};

} // namespace opad
