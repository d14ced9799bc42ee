// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks AC1..AC11, one PASS/FAIL line each.
//
//   acceptance <opad-cli-binary> <work-dir>
//
// Exits non-zero when a check fails for any reason other than a documented
// defect in the criterion itself (reported on the FAIL line).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "opad/commands.hpp"
#include "oracle.hpp"

using namespace opad;
using opad::test::Rng;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = OPAD_DATA_DIR;

struct Outcome {
    Outcome() = default;
    Outcome(bool p, std::string d) : pass(p), detail(std::move(d)) {}

    bool pass = true;
    std::string detail;
    // Set when the failure is a documented defect in the criterion itself.
    std::string known_defect;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double linf(const LogDistribution& a, const LogDistribution& b) { return linf_prob_distance(a, b); }

// Drops every occurrence of `hidden` from the context before asking the inner
// model, so a prompt with and without that token sees identical policies.
class BlindLM final : public LanguageModel {
public:
    BlindLM(const LanguageModel& inner, TokenId hidden) : m_inner(inner), m_hidden(hidden) {}

    std::size_t vocab_size() const override { return m_inner.vocab_size(); }
    LogDistribution next_logprobs(std::span<const TokenId> context) const override {
        TokenSequence kept;
        for (TokenId t : context) {
            if (t != m_hidden) kept.push_back(t);
        }
        return m_inner.next_logprobs(kept);
    }
    TokenSequence tokenize(std::string_view text) const override { return m_inner.tokenize(text); }
    std::string detokenize(std::span<const TokenId> tokens) const override { return m_inner.detokenize(tokens); }

private:
    const LanguageModel& m_inner;
    TokenId m_hidden;
};

const PromptTemplate kTmpl{"acceptance", "{principle} {query}", "{query} {response} "};

DecodeConfig greedy(std::size_t max_tokens, std::size_t window = 2) {
    DecodeConfig c;
    c.max_tokens = max_tokens;
    c.reward_window = window;
    return c;
}

// ---------------------------------------------------------------- AC1

Outcome ac1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    const double betas[] = {0.25, 0.5, 1.0, 2.0, 10.0};
    double worst = 0.0;
    std::size_t pairs = 0;
    for (; pairs < 2000; ++pairs) {
        const std::size_t V = rng.index(2, 64);
        const double beta = betas[pairs % 5];
        const auto pc = LogDistribution::from_probs(rng.probs(V));
        const auto pu = LogDistribution::from_probs(rng.probs(V));
        const auto literal = tilt_literal(pc, step_reward(pc, pu, {}, 2, 1.0), beta).policy;
        worst = std::max(worst, linf(literal, closed_form_tilt(pc, pu, beta)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 5.0, std::to_string(pairs) + " pairs, max Linf " + fmt("%.3g", worst) + ", " +
                                             fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- AC2

Outcome ac2() {
    Rng rng(202);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t V = rng.index(2, 32);
        const double beta = rng.uniform(0.25, 10.0);
        const auto pc = LogDistribution::from_probs(rng.probs(V));
        const auto pu = LogDistribution::from_probs(rng.probs(V));
        std::vector<double> history(rng.index(0, 6));
        for (double& h : history) h = rng.uniform(-5.0, 5.0);
        const auto base = tilt_distribution(pc, step_reward(pc, pu, {}, 1, 1.0), beta);
        // Discounted window, gamma = 0.6, W = 4.
        worst = std::max(worst, linf(base, tilt_distribution(pc, step_reward(pc, pu, history, 4, 0.6), beta)));
        // Undiscounted window, W = 2.
        worst = std::max(worst, linf(base, tilt_distribution(pc, step_reward(pc, pu, history, 2, 1.0), beta)));
        // Arbitrary constant.
        auto shifted = step_reward(pc, pu, {}, 1, 1.0);
        const double c = rng.uniform(-50.0, 50.0);
        for (double& r : shifted) r += c;
        worst = std::max(worst, linf(base, tilt_distribution(pc, shifted, beta)));
    }
    std::size_t mismatched = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const opad::test::HashedRandomLM lm(8, seed);
        const TokenSequence c{1, 2, 3};
        const TokenSequence u{2, 3};
        const auto w1 = opad_decode_contexts(lm, c, u, greedy(12, 1));
        const auto w2 = opad_decode_contexts(lm, c, u, greedy(12, 2));
        mismatched += w1.tokens != w2.tokens;
    }
    return {worst <= 1e-9 && mismatched == 0,
            "max Linf " + fmt("%.3g", worst) + ", W=1 vs W=2 mismatches " + std::to_string(mismatched) + "/100"};
}

// ---------------------------------------------------------------- AC3

Outcome ac3() {
    Rng rng(303);
    const double ladder[] = {0.5, 1.0, 2.0, 10.0, 100.0};
    double worst_limit = 0.0;
    std::size_t linf_violations = 0;
    std::size_t kl_violations = 0;
    std::string example;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t V = rng.index(2, 64);
        const auto pc = LogDistribution::from_probs(rng.probs(V));
        const auto pu = LogDistribution::from_probs(rng.probs(V));
        worst_limit = std::max(worst_limit, linf(closed_form_tilt(pc, pu, 1e9), pc));
        double prev_linf = kPosInf;
        double prev_kl = kPosInf;
        double prev_beta = 0.0;
        for (double beta : ladder) {
            const auto tilted = closed_form_tilt(pc, pu, beta);
            const double d = linf(tilted, pc);
            const double kl = kl_divergence(tilted, pc);
            if (d > prev_linf + 1e-12) {
                if (linf_violations++ == 0) {
                    example = "instance " + std::to_string(i) + ": Linf " + fmt("%.4f", prev_linf) + " at beta=" +
                              fmt("%g", prev_beta) + " < " + fmt("%.4f", d) + " at beta=" + fmt("%g", beta);
                }
            }
            kl_violations += kl > prev_kl + 1e-12;
            prev_linf = d;
            prev_kl = kl;
            prev_beta = beta;
        }
    }
    Outcome o;
    o.pass = worst_limit < 1e-6 && linf_violations == 0;
    o.detail = "Linf at beta=1e9 " + fmt("%.3g", worst_limit) + ", Linf monotonicity violations " +
               std::to_string(linf_violations) + " steps over 1000 instances, KL(tilted||pi_c) monotonicity violations " +
               std::to_string(kl_violations);
    if (!example.empty()) o.detail += "; e.g. " + example;
    if (!o.pass && worst_limit < 1e-6 && kl_violations == 0) {
        // d/dt KL(p_t || pi_c) = t Var_t(log ratio) >= 0 with t = 1/beta, so KL is
        // monotone; the largest single-candidate gap is not (a mid-ranked
        // candidate gains mass at moderate beta and loses it again as beta shrinks).
        o.known_defect = "Linf to the base policy is not monotone in beta in general; the KL form is";
    }
    return o;
}

// ---------------------------------------------------------------- AC4

Outcome ac4() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t cases = 0;
    for (std::size_t V = 2; V <= 4; ++V) {
        for (std::size_t T = 1; T <= 3; ++T) {
            for (std::uint64_t seed = 0; seed < 5; ++seed, ++cases) {
                const opad::test::HashedRandomLM lm(V, seed * 31 + V * 7 + T);
                const TokenSequence c{1, 0};
                const TokenSequence u{0};
                const SequenceKl kl = sequence_kl(lm, c, u, T);
                worst = std::max(worst, std::abs(kl.enumerated - kl.decomposed));
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 1.0, std::to_string(cases) + " models, max |enum - decomp| " +
                                             fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s"};
}

// ---------------------------------------------------------------- AC5

Outcome ac5() {
    std::size_t decode_mismatch = 0;
    const PrincipleSpec principle{"p", "t0", "test"};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const opad::test::HashedRandomLM inner(10, seed);
        const BlindLM lm(inner, 0);
        const auto opad = opad_decode(lm, "t3 t4", principle, kTmpl, greedy(12));
        const auto pp = decode_plain(lm, "t3 t4", kTmpl, greedy(12), &principle);
        decode_mismatch += opad.tokens != pp.tokens;
    }
    Rng rng(505);
    std::size_t dist_mismatch = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t V = rng.index(2, 64);
        const auto pc = LogDistribution::from_probs(rng.sparse_probs(V));
        const auto pu = LogDistribution::from_probs(rng.probs(V));
        const auto q = self_cd_distribution(pc, pu, 0.0);
        dist_mismatch += !std::equal(q.begin(), q.end(), pc.begin(), pc.end());
    }
    // Whole decodes too: Self-CD(alpha=0) and PP pick the same tokens with bit-identical log-probs.
    std::size_t trace_mismatch = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const opad::test::HashedRandomLM lm(10, seed);
        const auto scd = self_cd_decode(lm, "t3 t4", principle, kTmpl, greedy(10), 0.0);
        const auto pp = decode_plain(lm, "t3 t4", kTmpl, greedy(10), &principle);
        bool same = scd.tokens == pp.tokens && scd.trace.size() == pp.trace.size();
        for (std::size_t t = 0; same && t < pp.trace.size(); ++t) {
            same = scd.trace[t].log_prob == pp.trace[t].log_prob;
        }
        trace_mismatch += !same;
    }
    return {decode_mismatch == 0 && dist_mismatch == 0 && trace_mismatch == 0,
            "opad vs pp mismatches " + std::to_string(decode_mismatch) + "/100, selfcd(0) step mismatches " +
                std::to_string(dist_mismatch) + "/1000, decode mismatches " + std::to_string(trace_mismatch) + "/50"};
}

// ---------------------------------------------------------------- AC6

Outcome ac6() {
    const PrincipleSpec principle{"p", "t0", "test"};
    std::size_t runs = 0;
    std::size_t bad = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const opad::test::HashedRandomLM inner(12, seed);
        CountingLM lm(inner);
        auto config = greedy(1 + seed % 16);
        if (seed % 2) {
            config.stop_tokens = {5}; // some runs end early
        }
        auto check = [&](const DecodeResult& r, std::size_t per_token) {
            ++runs;
            bad += r.forward_calls != per_token * r.tokens.size() || lm.calls() != r.forward_calls;
            lm.reset();
        };
        check(opad_decode(lm, "t3 t4", principle, kTmpl, config), 2);
        check(decode_plain(lm, "t3 t4", kTmpl, config), 1);
        check(decode_plain(lm, "t3 t4", kTmpl, config, &principle), 1);
    }
    return {bad == 0, std::to_string(runs) + " counted runs (opad 2x, dp/pp 1x), violations " + std::to_string(bad)};
}

// ---------------------------------------------------------------- AC7

Outcome ac7() {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    DatasetItem general;
    general.id = "g";
    general.query = "q";
    general.task_tag = "general";
    DatasetItem personalized = general;
    personalized.task_tag = "personalized";

    DecodeOptions o;
    expect(resolve_decode_config(o, general, 0, {}).beta == 1.0, "beta general");
    expect(resolve_decode_config(o, personalized, 0, {}).beta == 2.0, "beta personalized");
    expect(MethodSpec{}.n == 16, "bon n");
    expect(MethodSpec{}.shots == 5, "icl shots");
    for (MethodKind k : {MethodKind::DP, MethodKind::PP, MethodKind::ICL, MethodKind::SelfCD, MethodKind::OPAD}) {
        o.method.kind = k;
        expect(resolve_decode_config(o, general, 0, {}).sampling.mode == SamplingMode::greedy,
               "greedy " + std::string(method_name(k)));
    }
    std::string detail = "beta 1.0/2.0, N=16, 5 shots, greedy";
    for (const auto& f : failures) detail += "; wrong: " + f;
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------- AC8

Outcome ac8() {
    const std::vector<std::string> texts{"a a b"};
    const double d1 = distinct_n(texts, 1);
    const auto uniform = TableLM::with_anonymous_vocab(4, 1);
    const double ppl = perplexity(uniform, "t0 t1 t2 t3 t1 t1");
    const double r1 = rouge("a b c", "a b d").rouge_1;
    const bool ok = std::abs(d1 - 2.0 / 3.0) <= 1e-9 && std::abs(ppl - 4.0) <= 1e-9 && std::abs(r1 - 2.0 / 3.0) <= 1e-9;
    return {ok, "distinct-1 " + fmt("%.12g", d1) + ", ppl " + fmt("%.12g", ppl) + ", rouge-1 " + fmt("%.12g", r1)};
}

// ---------------------------------------------------------------- AC9

Outcome ac9() {
    JudgeConfig config;
    config.endpoint = "mock:";
    ScriptedChatTransport always_a({"[[A]]"});
    const auto v1 = pairwise_judge(always_a, config, "1", "q", "x", "y");
    ScriptedChatTransport consistent({"[[A]]", "[[B]]"});
    const auto v2 = pairwise_judge(consistent, config, "2", "q", "x", "y");
    std::vector<JudgeVerdict> four(4);
    four[0].verdict = four[1].verdict = Verdict::A;
    four[2].verdict = Verdict::B;
    four[3].verdict = Verdict::tie;
    const std::string line = format_summary(aggregate_verdicts(four));
    const bool ok = v1.verdict == Verdict::tie && v2.verdict == Verdict::A && line == "Win 50.0% Lose 25.0% Tie 25.0%";
    return {ok, "always-A -> " + std::string(verdict_name(v1.verdict)) + ", A/B -> " +
                    std::string(verdict_name(v2.verdict)) + ", [A,A,B,tie] -> \"" + line + "\""};
}

// ---------------------------------------------------------------- AC10

Outcome ac10() {
    // Identical policies: decode with a model blind to the principle token.
    const opad::test::HashedRandomLM inner(10, 7);
    const BlindLM lm(inner, 0);
    const PrincipleSpec principle{"p", "t0", "test"};
    std::vector<std::vector<StepTrace>> traces;
    for (const char* q : {"t1", "t2 t3", "t4 t5 t6"}) {
        traces.push_back(opad_decode(lm, q, principle, kTmpl, greedy(8)).trace);
    }
    double max_zero = 0.0;
    for (const auto& p : token_kl_curve(traces, 64)) max_zero = std::max(max_zero, std::abs(p.mean_kl));

    // Binary tilt example: pi_c = (0.8, 0.2), pi_u = (0.5, 0.5), beta = 1.
    const auto pc = LogDistribution::from_probs(std::vector<double>{0.8, 0.2});
    const auto pu = LogDistribution::from_probs(std::vector<double>{0.5, 0.5});
    const auto tilted = tilt_distribution(pc, step_reward(pc, pu, {}, 2, 1.0), 1.0);
    const double step1 = token_kl_curve(std::vector<std::vector<PolicyPair>>{{{tilted, pu}}}, 8).front().mean_kl;
    const double hand = (16.0 / 17.0) * std::log(32.0 / 17.0) + (1.0 / 17.0) * std::log(2.0 / 17.0);

    // Landscape conservation on random traces, data range and clipped range.
    Rng rng(1010);
    std::size_t broken = 0;
    for (int i = 0; i < 200; ++i) {
        std::vector<std::vector<StepTrace>> rs(rng.index(1, 5));
        std::size_t steps = 0;
        for (auto& tr : rs) {
            tr.resize(rng.index(0, 20));
            for (auto& s : tr) s.reward = rng.uniform(-10.0, 10.0);
            steps += tr.size();
        }
        if (steps == 0) continue;
        const std::size_t bins = rng.index(1, 30);
        for (auto range : {std::optional<std::pair<double, double>>{}, std::optional(std::pair{-1.0, 1.0})}) {
            const auto land = reward_landscape(rs, rng.uniform(0.5, 4.0), bins, range);
            std::size_t sum = 0;
            for (auto c : land.counts) sum += c;
            broken += sum != steps || land.steps != steps;
        }
    }
    const bool ok = max_zero <= 1e-12 && std::abs(step1 - hand) <= 1e-4 && broken == 0;
    return {ok, "identical-policy curve max " + fmt("%.3g", max_zero) + ", step-1 KL " + fmt("%.6f", step1) +
                    " (formula " + fmt("%.6f", hand) + "; the quoted literal 0.4602 does not match its own formula)" +
                    ", landscape conservation failures " + std::to_string(broken)};
}

// ---------------------------------------------------------------- AC11

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::vector<std::string> read_lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

// Every line has the header's column count; returns an error or "".
std::string check_csv(const fs::path& p, const std::string& header) {
    const auto lines = read_lines(p);
    if (lines.empty()) return p.filename().string() + " missing or empty";
    if (lines[0] != header) return p.filename().string() + " header '" + lines[0] + "'";
    const auto commas = std::count(header.begin(), header.end(), ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (std::count(lines[i].begin(), lines[i].end(), ',') != commas) {
            return p.filename().string() + " line " + std::to_string(i + 1) + " has the wrong column count";
        }
    }
    if (lines.size() < 2) return p.filename().string() + " has no rows";
    return "";
}

std::string check_records(const fs::path& p, MethodKind kind) {
    static const char* keys[] = {"run_id",   "item_id", "query",      "task_tag",      "principle_id",
                                 "backend",  "template", "root_seed", "method",        "config",
                                 "status",   "output",  "n_tokens",   "forward_calls", "wall_time_ms",
                                 "started_at", "finished_at", "trace"};
    const auto lines = read_lines(p);
    if (lines.size() != 20) return p.filename().string() + ": " + std::to_string(lines.size()) + " lines, want 20";
    for (const auto& line : lines) {
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return p.filename().string() + ": invalid JSON line";
        for (const char* k : keys) {
            if (!j.contains(k)) return p.filename().string() + ": missing key " + k;
        }
        if (j["status"] != "ok") return p.filename().string() + ": item " + j["item_id"].dump() + " failed";
        if (j["method"]["kind"] != std::string(method_name(kind))) return p.filename().string() + ": wrong method";
        if (!j["trace"].is_array() || j["trace"].size() != j["n_tokens"].get<std::size_t>()) {
            return p.filename().string() + ": trace length differs from n_tokens";
        }
    }
    // The library reader must accept every line as well.
    try {
        load_run_records(p.string());
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

Outcome ac11(const std::string& cli, const fs::path& work) {
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);
    const fs::path log = work / "cli.log";
    auto run = [&](const std::string& args) {
        const std::string cmd = quote(cli) + " " + args + " >>" + quote(log.string()) + " 2>&1";
        return std::system(cmd.c_str());
    };

    const auto t0 = std::chrono::steady_clock::now();
    const std::string common = "--dataset " + quote(kData + "/toy_dataset.jsonl") + " --backend " +
                               quote("ngram:" + kData + "/corpus.txt") + " --order 5 --principles " +
                               quote(kData + "/toy_principles.json") + " --template " +
                               quote(kData + "/templates/toy_chat.json") + " --overwrite";
    const MethodKind methods[] = {MethodKind::DP,  MethodKind::PP,     MethodKind::ICL,
                                  MethodKind::BoN, MethodKind::SelfCD, MethodKind::OPAD};
    std::vector<std::string> problems;
    std::string record_args;
    for (MethodKind k : methods) {
        const std::string name(method_name(k));
        const auto out = work / (name + ".jsonl");
        std::string args = "decode " + common + " --method " + name + " --out " + quote(out.string());
        if (k == MethodKind::ICL) args += " --shots-file " + quote(kData + "/shots.jsonl");
        if (run(args) != 0) problems.push_back("decode " + name + " exited non-zero");
        record_args += " " + quote(out.string());
    }
    if (run("analyze" + record_args + " --out " + quote((work / "analysis").string()) + " --oracle " +
            quote("ngram:" + kData + "/corpus.txt") + " --order 5 --dataset " +
            quote(kData + "/toy_dataset.jsonl")) != 0) {
        problems.push_back("analyze exited non-zero");
    }
    const auto verdicts = work / "verdicts.jsonl";
    if (run("judge " + quote((work / "opad.jsonl").string()) + " " + quote((work / "pp.jsonl").string()) + " --out " +
            quote(verdicts.string()) + " --principles " + quote(kData + "/toy_principles.json") +
            " --judge-endpoint " + quote("mock:" + kData + "/mock_judge.json")) != 0) {
        problems.push_back("judge exited non-zero");
    }
    const double secs = seconds_since(t0);

    for (MethodKind k : methods) {
        if (auto e = check_records(work / (std::string(method_name(k)) + ".jsonl"), k); !e.empty()) {
            problems.push_back(e);
        }
    }
    const fs::path a = work / "analysis";
    std::vector<std::pair<fs::path, std::string>> csvs{
        {a / "metrics.csv", "method,n_samples,distinct_1,distinct_2,ppl,rouge_1,rouge_2,rouge_l"}};
    for (const char* m : {"selfcd", "opad"}) {
        csvs.push_back({a / ("kl_curve_" + std::string(m) + ".csv"), "position,mean_kl,count"});
    }
    csvs.push_back({a / "landscape_opad.csv", "bin_lo,bin_hi,count"});
    csvs.push_back({verdicts.string() + ".summary.csv",
                    "method_a,method_b,pairs,wins,losses,ties,failed,win_pct,lose_pct,tie_pct"});
    for (const auto& [path, header] : csvs) {
        if (auto e = check_csv(path, header); !e.empty()) problems.push_back(e);
    }
    if (read_lines(a / "metrics.csv").size() != 7) problems.push_back("metrics.csv should have six method rows");
    const auto vlines = read_lines(verdicts);
    if (vlines.size() != 20) problems.push_back("verdicts.jsonl has " + std::to_string(vlines.size()) + " lines");
    for (const auto& line : vlines) {
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("pair_id") || !j.contains("verdict") || j.value("status", "") != "ok") {
            problems.push_back("malformed verdict line");
            break;
        }
    }
    if (secs >= 60.0) problems.push_back("took " + fmt("%.1f", secs) + " s");

    std::string detail = "6 methods x 20 items + analyze + mock judge in " + fmt("%.2f", secs) + " s";
    for (const auto& p : problems) detail += "; " + p;
    if (!problems.empty()) detail += " (see " + log.string() + ")";
    return {problems.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: acceptance <opad-cli> <work-dir>\n");
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = argv[2];

    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"AC1  closed-form equivalence", ac1},
        {"AC2  reward shift invariance", ac2},
        {"AC3  beta limit and monotonicity", ac3},
        {"AC4  sequence KL decomposition", ac4},
        {"AC5  identity behaviour", ac5},
        {"AC6  forward-call accounting", ac6},
        {"AC7  default configuration", ac7},
        {"AC8  metric oracles", ac8},
        {"AC9  judge harness", ac9},
        {"AC10 analysis pipeline", ac10},
        {"AC11 end-to-end run", [&] { return ac11(cli, work); }},
    };
    int failed = 0;
    int unexplained = 0;
    for (const auto& [name, check] : checks) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) {
            ++failed;
            unexplained += o.known_defect.empty();
        }
        std::printf("%s %s: %s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                    o.known_defect.empty() ? "" : (" [criterion defect: " + o.known_defect + "]").c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu passed, %d failed (%d without a documented criterion defect)\n",
                static_cast<int>(checks.size()) - failed, checks.size(), failed, unexplained);
    return unexplained == 0 ? 0 : 1;
}
