// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "opad/baselines.hpp"
#include "opad/opad.hpp"
#include "oracle.hpp"

using namespace opad;

namespace {

LogDistribution P(std::vector<double> p) { return LogDistribution::from_probs(p); }

// Vocabulary: q, p, x, y, z. "q" is the query, "p" the principle; the next
// token distribution depends on the last prompt token.
TableLM prompt_table() {
    TableLM lm(Vocabulary({"q", "p", "x", "y", "z"}), 1);
    lm.set_probs({0}, std::vector<double>{0, 0, 0.5, 0.3, 0.2}); // after the query alone
    lm.set_probs({1}, std::vector<double>{0, 0, 0.2, 0.7, 0.1}); // after the principle
    lm.set_probs({2}, std::vector<double>{0, 0, 0.1, 0.1, 0.8});
    lm.set_probs({3}, std::vector<double>{0, 0, 0.6, 0.1, 0.3});
    lm.set_probs({4}, std::vector<double>{0, 0, 0.3, 0.3, 0.4});
    return lm;
}

const PromptTemplate kTmpl{"t", "{shots}{query} {principle}", "{query} {response} "};
const PrincipleSpec kPrinciple{"p", "p", ""};

class FixedScorer final : public Scorer {
public:
    explicit FixedScorer(std::vector<double> scores) : m_scores(std::move(scores)) {}
    double score(std::string_view, std::string_view) const override { return m_scores[m_next++ % m_scores.size()]; }

private:
    std::vector<double> m_scores;
    mutable std::size_t m_next = 0;
};

class FailingScorer final : public Scorer {
public:
    explicit FailingScorer(std::size_t ok) : m_ok(ok) {}
    double score(std::string_view, std::string_view) const override {
        if (m_calls++ >= m_ok) throw TransportError("scorer down");
        return double(m_calls);
    }

private:
    std::size_t m_ok;
    mutable std::size_t m_calls = 0;
};

DecodeConfig sampled(std::size_t max_tokens, std::uint64_t seed = 7) {
    DecodeConfig c;
    c.max_tokens = max_tokens;
    c.sampling = {SamplingMode::temperature, 1.0, seed};
    return c;
}

} // namespace

TEST(MethodSpec, NamesRoundTrip) {
    for (auto k : {MethodKind::DP, MethodKind::PP, MethodKind::ICL, MethodKind::BoN, MethodKind::SelfCD,
                   MethodKind::OPAD}) {
        EXPECT_EQ(parse_method(method_name(k)), k);
    }
    EXPECT_THROW(parse_method("beam"), ConfigError);
}

TEST(MethodSpec, DefaultsAndValidation) {
    MethodSpec m;
    EXPECT_EQ(m.shots, 5u);
    EXPECT_EQ(m.n, 16u);
    EXPECT_EQ(m.alpha, 1.0);
    MethodSpec bon{MethodKind::BoN, 5, 0, 1.0};
    EXPECT_THROW(bon.validate(), ConfigError);
    MethodSpec cd{MethodKind::SelfCD, 5, 16, -0.5};
    EXPECT_THROW(cd.validate(), ConfigError);
}

TEST(PlainDecode, DirectAndPrincipleContexts) {
    const auto lm = prompt_table();
    DecodeConfig cfg;
    cfg.max_tokens = 1;
    const auto dp = decode_plain(lm, "q", kTmpl, cfg);
    const auto pp = decode_plain(lm, "q", kTmpl, cfg, &kPrinciple);
    EXPECT_EQ(dp.text, "x");
    EXPECT_EQ(pp.text, "y");
    EXPECT_EQ(dp.forward_calls, 1u);
    EXPECT_EQ(pp.forward_calls, 1u);
    EXPECT_FALSE(dp.trace[0].kl_vs_unconstrained.has_value());
}

TEST(PlainDecode, OneForwardCallPerToken) {
    const auto lm = prompt_table();
    CountingLM counting(lm);
    DecodeConfig cfg;
    cfg.max_tokens = 9;
    const auto r = decode_plain(counting, "q", kTmpl, cfg, &kPrinciple);
    EXPECT_EQ(r.tokens.size(), 9u);
    EXPECT_EQ(counting.calls(), 9u);
}

TEST(PlainDecode, OpadWithHugeBetaEqualsPrinciplePrompting) {
    const auto lm = prompt_table();
    DecodeConfig cfg;
    cfg.max_tokens = 8;
    cfg.beta = 1e9;
    EXPECT_EQ(opad_decode(lm, "q", kPrinciple, kTmpl, cfg).tokens, decode_plain(lm, "q", kTmpl, cfg, &kPrinciple).tokens);
}

TEST(SelfCd, ClampAndRenormalize) {
    // 0.8 + (0.8 - 0.5) = 1.1, 0.2 + (0.2 - 0.5) = -0.1 -> 0
    const auto q = self_cd_distribution(P({0.8, 0.2}), P({0.5, 0.5}), 1.0);
    EXPECT_NEAR(q.prob(0), 1.0, 1e-15);
    EXPECT_EQ(q[1], kNegInf);
    // alpha = 0.5: 0.95, 0.05
    const auto h = self_cd_distribution(P({0.8, 0.2}), P({0.5, 0.5}), 0.5);
    EXPECT_NEAR(h.prob(0), 0.95, 1e-12);
    EXPECT_NEAR(h.prob(1), 0.05, 1e-12);
}

TEST(SelfCd, AlphaZeroIsPrinciplePrompting) {
    test::Rng rng(3);
    const auto pc = P(rng.probs(9));
    const auto q = self_cd_distribution(pc, P(rng.probs(9)), 0.0);
    for (std::size_t v = 0; v < 9; ++v) {
        EXPECT_EQ(q[v], pc[v]);
    }
    const auto lm = prompt_table();
    DecodeConfig cfg;
    cfg.max_tokens = 6;
    EXPECT_EQ(self_cd_decode(lm, "q", kPrinciple, kTmpl, cfg, 0.0).tokens,
              decode_plain(lm, "q", kTmpl, cfg, &kPrinciple).tokens);
}

TEST(SelfCd, DecodeUsesTwoCallsPerToken) {
    const auto lm = prompt_table();
    DecodeConfig cfg;
    cfg.max_tokens = 5;
    const auto r = self_cd_decode(lm, "q", kPrinciple, kTmpl, cfg, 1.0);
    EXPECT_EQ(r.forward_calls, 10u);
    EXPECT_TRUE(r.trace[0].kl_vs_unconstrained.has_value());
    // Step 1: (0.2,0.7,0.1) vs (0.5,0.3,0.2) -> (0, 1.1, 0) -> y
    EXPECT_EQ(r.tokens[0], 3u);
    EXPECT_THROW(self_cd_distribution(P({0.5, 0.5}), P({0.5, 0.5}), -1.0), ConfigError);
}

TEST(SelfCd, ClampingNeverEmptiesTheDistribution) {
    // Before clamping the weights sum to 1 + alpha * (1 - 1) = 1, so some mass always survives.
    const auto q = self_cd_distribution(P({1.0, 0.0}), P({0.0, 1.0}), 50.0);
    EXPECT_NEAR(q.prob(0), 1.0, 1e-15);
    EXPECT_NO_THROW(self_cd_distribution(P({0.5, 0.5}), P({0.5, 0.5}), 5.0));
}

TEST(Icl, ZeroShotsEqualsDirectPrompting) {
    const auto lm = prompt_table();
    DecodeConfig cfg;
    cfg.max_tokens = 4;
    const std::vector<Shot> shots{{"q", "z"}, {"q", "y"}};
    EXPECT_EQ(icl_decode(lm, "q", shots, kTmpl, cfg, 0).tokens, decode_plain(lm, "q", kTmpl, cfg).tokens);
}

TEST(Icl, ShotsLengthenTheContextAndCountOneCall) {
    const test::HashedRandomLM inner(5, 11);
    CountingLM lm(inner);
    const PromptTemplate t{"t", "{shots}{query}", "{query} {response} "};
    DecodeConfig cfg;
    cfg.max_tokens = 3;
    std::vector<Shot> shots;
    for (int i = 0; i < 7; ++i) {
        shots.push_back({"t1", "t" + std::to_string(i % 5)});
    }
    const auto r = icl_decode(lm, "t0", shots, t, cfg);
    EXPECT_EQ(r.forward_calls, 3u);
    EXPECT_EQ(lm.calls(), 3u);
    // Default is five shots: 5 * 2 tokens + the query.
    EXPECT_EQ(build_context(lm, t, "t0", nullptr, std::span<const Shot>(shots).first(5)).size(), 11u);
    EXPECT_EQ(icl_decode(lm, "t0", shots, t, cfg).tokens,
              decode_from_context(lm, build_context(lm, t, "t0", nullptr, std::span<const Shot>(shots).first(5)), cfg)
                  .tokens);
}

TEST(BestOfN, RequiresTemperatureSampling) {
    const auto lm = prompt_table();
    DecodeConfig cfg;
    FixedScorer s({1.0});
    EXPECT_THROW(best_of_n(lm, "q", kTmpl, cfg, 4, s, &kPrinciple), ConfigError);
    EXPECT_THROW(best_of_n(lm, "q", kTmpl, sampled(3), 0, s, &kPrinciple), ConfigError);
}

TEST(BestOfN, SingleSampleEqualsPrinciplePromptingSample) {
    const auto lm = prompt_table();
    FixedScorer s({0.0});
    const auto cfg = sampled(6, 99);
    const auto bon = best_of_n(lm, "q", kTmpl, cfg, 1, s, &kPrinciple);
    DecodeConfig single = cfg;
    single.sampling.seed = derive_seed(99, 0);
    EXPECT_EQ(bon.tokens, decode_plain(lm, "q", kTmpl, single, &kPrinciple).tokens);
    EXPECT_EQ(bon.selected_candidate, 0u);
}

TEST(BestOfN, PicksArgmaxAndRecordsScores) {
    const auto lm = prompt_table();
    FixedScorer s({0.1, 0.9, -2.0, 0.3});
    const auto cfg = sampled(5);
    const auto r = best_of_n(lm, "q", kTmpl, cfg, 4, s, &kPrinciple);
    EXPECT_EQ(r.candidate_scores, (std::vector<double>{0.1, 0.9, -2.0, 0.3}));
    EXPECT_EQ(r.selected_candidate, 1u);
    DecodeConfig second = cfg;
    second.sampling.seed = derive_seed(cfg.sampling.seed, 1);
    EXPECT_EQ(r.tokens, decode_plain(lm, "q", kTmpl, second, &kPrinciple).tokens);
    EXPECT_EQ(r.forward_calls, 4u * 5u);
}

TEST(BestOfN, TiesGoToLowestIndex) {
    const auto lm = prompt_table();
    FixedScorer s({0.5, 2.0, 2.0, 2.0});
    EXPECT_EQ(best_of_n(lm, "q", kTmpl, sampled(3), 4, s).selected_candidate, 1u);
}

TEST(BestOfN, ScorerFailureKeepsPartialScores) {
    const auto lm = prompt_table();
    FailingScorer s(3);
    try {
        best_of_n(lm, "q", kTmpl, sampled(3), 8, s, &kPrinciple);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.partial_scores(), (std::vector<double>{1.0, 2.0, 3.0}));
    }
}

TEST(BestOfN, NanScoreIsAnError) {
    const auto lm = prompt_table();
    FixedScorer s({1.0, std::nan("")});
    EXPECT_THROW(best_of_n(lm, "q", kTmpl, sampled(3), 4, s), EvaluationError);
}

TEST(BestOfN, LogLikelihoodScorer) {
    const auto lm = prompt_table();
    const LogLikelihoodScorer s(lm, kTmpl, kPrinciple);
    // "y x" after the principle: 0.7 then (after y) 0.6
    EXPECT_NEAR(s.score("q", "y x"), std::log(0.7) + std::log(0.6), 1e-12);
    EXPECT_EQ(s.score("q", ""), 0.0);
    const auto r = best_of_n(lm, "q", kTmpl, sampled(4), 16, s, &kPrinciple);
    for (double score : r.candidate_scores) {
        EXPECT_LE(score, r.candidate_scores[*r.selected_candidate]);
    }
}
