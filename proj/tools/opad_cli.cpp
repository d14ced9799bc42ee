// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

// opad: decode | sweep-beta | analyze | judge

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "opad/commands.hpp"

namespace {

void add_decode_flags(CLI::App* cmd, opad::DecodeOptions& o, std::string& method, std::optional<std::size_t>& n,
                      std::optional<std::size_t>& shots, std::optional<double>& alpha, std::string& tilt,
                      bool& overwrite, bool with_beta) {
    cmd->add_option("--dataset", o.dataset, "Dataset JSONL")->required();
    cmd->add_option("--backend", o.backend, "toy:<file> | ngram:<corpus> | http:<url>")->required();
    cmd->add_option("--principles", o.principles, "Principle library JSON");
    cmd->add_option("--principle", o.principle_id, "Principle id for items without one");
    cmd->add_option("--out", o.out, "Output path")->required();
    cmd->add_option("--method", method, "dp | pp | icl | bon | selfcd | opad")->default_val("opad");
    if (with_beta) {
        cmd->add_option("--beta", o.beta, "Tilt temperature (default 1.0 general, 2.0 personalized)")
            ->check(CLI::PositiveNumber);
    }
    cmd->add_option("--window", o.window, "Reward window W")->default_val(2)->check(CLI::PositiveNumber);
    cmd->add_option("--discount", o.discount, "Reward history discount")->default_val(1.0)->check(CLI::NonNegativeNumber);
    cmd->add_option("--n", n, "Best-of-n sample count (default 16)")->check(CLI::PositiveNumber);
    cmd->add_option("--shots", shots, "In-context examples used (default 5)");
    cmd->add_option("--shots-file", o.shots_file, "Shots JSONL");
    cmd->add_option("--alpha", alpha, "Self-contrastive amplification (default 1.0)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--template", o.template_file, "Prompt template file (.txt or .json)");
    cmd->add_option("--seed", o.seed, "Root seed")->default_val(0);
    cmd->add_option("--max-tokens", o.max_tokens, "Maximum new tokens")->default_val(64)->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", o.temperature, "Sample at this temperature instead of greedy")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--order", o.backend_options.ngram_order, "n-gram order")->default_val(3)->check(CLI::PositiveNumber);
    cmd->add_option("--smoothing", o.backend_options.smoothing, "n-gram additive smoothing")
        ->default_val(0.1)
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--workers", o.workers, "Items decoded concurrently")->default_val(1)->check(CLI::PositiveNumber);
    cmd->add_option("--tilt", tilt, "log_space | literal")->default_val("log_space")->check(
        CLI::IsMember({"log_space", "literal"}));
    cmd->add_option("--scorer-url", o.scorer_url, "Best-of-n reward server URL");
    cmd->add_option("--run-id", o.run_id, "Run id (default derived from method, seed and time)");
    cmd->add_flag("--record-candidates", o.record_candidates, "Store per-candidate KL terms in traces");
    cmd->add_flag("--overwrite", overwrite, "Truncate the output instead of appending");
}

void finish_decode_options(opad::DecodeOptions& o, const std::string& method, const std::optional<std::size_t>& n,
                           const std::optional<std::size_t>& shots, const std::optional<double>& alpha,
                           const std::string& tilt, bool overwrite) {
    o.method.kind = opad::parse_method(method);
    if (n) o.method.n = *n;
    if (shots) o.method.shots = *shots;
    if (alpha) o.method.alpha = *alpha;
    o.tilt_path = tilt == "literal" ? opad::TiltPath::literal : opad::TiltPath::log_space;
    o.append = !overwrite;
}

std::set<std::string> split_list(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.insert(item);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Principle-guided decoding and evaluation"};
    app.require_subcommand(1);

    opad::DecodeOptions decode;
    std::string method, tilt;
    std::optional<std::size_t> n, shots;
    std::optional<double> alpha;
    bool overwrite = false;
    auto* decode_cmd = app.add_subcommand("decode", "Decode every dataset item with one method");
    add_decode_flags(decode_cmd, decode, method, n, shots, alpha, tilt, overwrite, true);

    opad::SweepOptions sweep;
    std::string sweep_method, sweep_tilt;
    std::optional<std::size_t> sweep_n, sweep_shots;
    std::optional<double> sweep_alpha;
    bool sweep_overwrite = false;
    auto* sweep_cmd = app.add_subcommand("sweep-beta", "Decode with opad at several beta values");
    add_decode_flags(sweep_cmd, sweep.decode, sweep_method, sweep_n, sweep_shots, sweep_alpha, sweep_tilt,
                     sweep_overwrite, false);
    sweep_cmd->add_option("--betas", sweep.betas, "Beta values")->required()->check(CLI::PositiveNumber)->delimiter(',');
    sweep_cmd->add_option("--bins", sweep.bins, "Landscape bins")->default_val(20)->check(CLI::PositiveNumber);

    opad::AnalyzeOptions analyze;
    std::string analyses;
    auto* analyze_cmd = app.add_subcommand("analyze", "Metrics, KL curves and reward landscapes from records");
    analyze_cmd->add_option("records", analyze.records, "RunRecord JSONL files")->required();
    analyze_cmd->add_option("--out", analyze.out, "Output directory")->required();
    analyze_cmd->add_option("--oracle", analyze.oracle, "Backend used as the perplexity oracle");
    analyze_cmd->add_option("--dataset", analyze.dataset, "Dataset JSONL with references for ROUGE");
    analyze_cmd->add_option("--analyses", analyses, "Comma list of metrics,kl,landscape (default: all available)");
    analyze_cmd->add_option("--bins", analyze.bins, "Landscape bins")->default_val(20)->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--max-position", analyze.max_position, "Longest KL curve position")
        ->default_val(64)
        ->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--order", analyze.backend_options.ngram_order, "n-gram oracle order")->default_val(3);
    analyze_cmd->add_option("--smoothing", analyze.backend_options.smoothing, "n-gram oracle smoothing")
        ->default_val(0.1);

    opad::JudgeOptions judge;
    auto* judge_cmd = app.add_subcommand("judge", "Pairwise judge two record files");
    judge_cmd->add_option("records_a", judge.records_a, "Records of system A")->required();
    judge_cmd->add_option("records_b", judge.records_b, "Records of system B")->required();
    judge_cmd->add_option("--out", judge.out, "Verdicts JSONL")->required();
    judge_cmd->add_option("--principles", judge.principles, "Principle library (role/principle templates)");
    judge_cmd->add_option("--judge-config", judge.config_file, "Judge config JSON");
    judge_cmd->add_option("--judge-endpoint", judge.endpoint, "Chat endpoint URL or mock:<file>");
    judge_cmd->add_option("--judge-model", judge.model, "Judge model name");
    judge_cmd->add_option("--judge-template", judge.template_id, "hh | summarization | dsp-role | psoups-principle");

    CLI11_PARSE(app, argc, argv);

    try {
        if (decode_cmd->parsed()) {
            finish_decode_options(decode, method, n, shots, alpha, tilt, overwrite);
            return opad::cmd_decode(decode);
        }
        if (sweep_cmd->parsed()) {
            finish_decode_options(sweep.decode, sweep_method, sweep_n, sweep_shots, sweep_alpha, sweep_tilt,
                                  sweep_overwrite);
            return opad::cmd_sweep_beta(sweep);
        }
        if (analyze_cmd->parsed()) {
            if (!analyses.empty()) {
                analyze.analyses = split_list(analyses);
            }
            return opad::cmd_analyze(analyze);
        }
        if (judge_cmd->parsed()) {
            return opad::cmd_judge(judge);
        }
    } catch (const opad::TransportError& e) {
        std::cerr << "error: backend unavailable: " << e.what() << '\n';
        return opad::exit_backend_down;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return opad::exit_input;
    }
    return opad::exit_input;
}
