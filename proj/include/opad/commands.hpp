// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

// Drivers behind the opad command-line tool. Each cmd_* returns a process
// exit status and writes progress to the supplied stream.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "opad/backend.hpp"
#include "opad/baselines.hpp"
#include "opad/judge.hpp"
#include "opad/metrics.hpp"
#include "opad/opad.hpp"
#include "opad/records.hpp"

namespace opad {

inline constexpr double kGeneralBeta = 1.0;
inline constexpr double kPersonalizedBeta = 2.0;
inline constexpr double kBestOfNTemperature = 1.0;

enum ExitStatus : int { exit_ok = 0, exit_input = 1, exit_backend_down = 3 };

namespace detail {

// Runs fn(i) for i in [0, n) on up to `workers` threads; stops handing out
// work once `stop` is set.
inline void parallel_for(std::size_t n, std::size_t workers, const std::atomic<bool>& stop,
                         const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n && !stop.load(); ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !stop.load(); i = next++) {
                fn(i);
            }
        });
    }
}

inline void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
}

inline std::string compact_timestamp() {
    std::string ts = utc_timestamp();
    std::erase_if(ts, [](char c) { return c == '-' || c == ':'; });
    return ts;
}

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// Serializes whole records through one stream.
class JsonlAppender {
public:
    JsonlAppender(const std::string& path, bool append) {
        ensure_parent_dir(path);
        m_out.open(path, append ? std::ios::app : std::ios::trunc);
        if (!m_out) {
            throw InputError("cannot open " + path + " for writing");
        }
    }

    void write(const std::string& line) {
        std::lock_guard lock(m_mutex);
        m_out << line << '\n';
        m_out.flush();
    }

private:
    std::ofstream m_out;
    std::mutex m_mutex;
};

} // namespace detail

// ---------------------------------------------------------------- decode

struct DecodeOptions {
    std::string dataset;
    std::string principles;
    std::string backend;
    std::string out;
    std::string shots_file;
    std::string template_file;
    // Used for items without a principle_id.
    std::string principle_id;
    MethodSpec method;
    std::optional<double> beta; // default depends on the item's task tag
    std::size_t window = 2;
    double discount = 1.0;
    std::size_t max_tokens = 64;
    std::optional<double> temperature; // unset: greedy, except best-of-n
    std::uint64_t seed = 0;
    bool record_candidates = false;
    TiltPath tilt_path = TiltPath::log_space;
    std::string scorer_url; // best-of-n reward server; log-likelihood when empty
    std::size_t workers = 1;
    bool append = true;
    std::string run_id;
    BackendOptions backend_options;
};

inline bool method_uses_principle(MethodKind k) {
    return k == MethodKind::PP || k == MethodKind::SelfCD || k == MethodKind::OPAD || k == MethodKind::BoN;
}

// Effective per-item configuration after defaults.
inline DecodeConfig resolve_decode_config(const DecodeOptions& opts, const DatasetItem& item, std::size_t item_index,
                                          const std::set<TokenId>& stop_tokens) {
    DecodeConfig c;
    c.beta = opts.beta.value_or(item.task_tag == "personalized" ? kPersonalizedBeta : kGeneralBeta);
    c.reward_window = opts.window;
    c.discount = opts.discount;
    c.max_tokens = opts.max_tokens;
    c.stop_tokens = stop_tokens;
    c.tilt_path = opts.tilt_path;
    c.record_candidates = opts.record_candidates;
    if (opts.temperature || opts.method.kind == MethodKind::BoN) {
        c.sampling.mode = SamplingMode::temperature;
        c.sampling.temperature = opts.temperature.value_or(kBestOfNTemperature);
    } else {
        c.sampling.mode = SamplingMode::greedy;
    }
    c.sampling.seed = derive_seed(opts.seed, item_index);
    c.validate();
    return c;
}

// Dispatches one decode for the chosen method.
inline DecodeResult run_method(const LanguageModel& lm, const MethodSpec& method, std::string_view query,
                               const PrincipleSpec* principle, std::span<const Shot> shots,
                               const PromptTemplate& tmpl, const DecodeConfig& config, const Scorer* scorer = nullptr) {
    method.validate();
    if (method_uses_principle(method.kind) && !principle) {
        throw InputError(std::string(method_name(method.kind)) + " needs a principle");
    }
    switch (method.kind) {
    case MethodKind::DP: return decode_plain(lm, query, tmpl, config);
    case MethodKind::PP: return decode_plain(lm, query, tmpl, config, principle);
    case MethodKind::ICL: return icl_decode(lm, query, shots, tmpl, config, method.shots);
    case MethodKind::SelfCD: return self_cd_decode(lm, query, *principle, tmpl, config, method.alpha);
    case MethodKind::OPAD: return opad_decode(lm, query, *principle, tmpl, config);
    case MethodKind::BoN: {
        if (scorer) {
            return best_of_n(lm, query, tmpl, config, method.n, *scorer, principle);
        }
        LogLikelihoodScorer ll(lm, tmpl, *principle);
        return best_of_n(lm, query, tmpl, config, method.n, ll, principle);
    }
    }
    throw ConfigError("unhandled method");
}

struct DecodeSummary {
    std::size_t items_ok = 0;
    std::size_t items_failed = 0;
    std::size_t tokens = 0;
    std::size_t forward_calls = 0;
    double seconds = 0.0;
    bool aborted = false;
    std::string abort_reason;

    double tokens_per_second() const { return seconds > 0.0 ? static_cast<double>(tokens) / seconds : 0.0; }
};

inline std::string format_throughput(std::string_view method, const DecodeSummary& s) {
    const double per_token = s.tokens ? static_cast<double>(s.forward_calls) / static_cast<double>(s.tokens) : 0.0;
    return "throughput: method=" + std::string(method) + " items=" + std::to_string(s.items_ok) +
           " failed=" + std::to_string(s.items_failed) + " tokens=" + std::to_string(s.tokens) +
           " forward_calls=" + std::to_string(s.forward_calls) + " calls_per_token=" + detail::fixed(per_token, 2) +
           " elapsed_s=" + detail::fixed(s.seconds, 3) + " tokens_per_s=" + detail::fixed(s.tokens_per_second(), 1);
}

// Shared inputs for decode-style commands, loaded once.
struct DecodeInputs {
    std::vector<DatasetLine> dataset;
    PrincipleLibrary library;
    std::vector<Shot> shots;
    PromptTemplate tmpl;
    Backend backend;
    std::unique_ptr<Scorer> scorer;
};

inline DecodeInputs load_decode_inputs(const DecodeOptions& opts) {
    if (opts.dataset.empty()) {
        throw ConfigError("--dataset is required");
    }
    if (opts.backend.empty()) {
        throw ConfigError("--backend is required");
    }
    opts.method.validate();
    DecodeInputs in;
    in.dataset = load_dataset(opts.dataset);
    if (!opts.principles.empty()) {
        in.library = PrincipleLibrary::from_file(opts.principles);
    } else if (method_uses_principle(opts.method.kind)) {
        throw ConfigError(std::string(method_name(opts.method.kind)) + " needs --principles");
    }
    if (!opts.principle_id.empty()) {
        in.library.at(opts.principle_id);
    }
    if (!opts.shots_file.empty()) {
        in.shots = load_shots(opts.shots_file);
    } else if (opts.method.kind == MethodKind::ICL) {
        throw ConfigError("icl needs --shots-file");
    }
    in.tmpl = opts.template_file.empty() ? PromptTemplate{} : PromptTemplate::from_file(opts.template_file);
    in.backend = load_backend(opts.backend, opts.backend_options);
    if (!opts.scorer_url.empty()) {
        in.scorer = std::make_unique<HttpRewardScorer>(opts.scorer_url);
    }
    return in;
}

// Decodes every dataset item and appends one RunRecord per item to opts.out.
// Malformed lines and item-level errors become error records; a transport
// failure stops the run after writing what was decoded so far.
inline DecodeSummary run_decode(const DecodeOptions& opts, const DecodeInputs& in, std::ostream& log) {
    if (opts.out.empty()) {
        throw ConfigError("--out is required");
    }
    const std::string run_id = opts.run_id.empty() ? std::string(method_name(opts.method.kind)) + "-" +
                                                         std::to_string(opts.seed) + "-" + detail::compact_timestamp()
                                                   : opts.run_id;
    detail::JsonlAppender out(opts.out, opts.append);
    DecodeSummary summary;
    std::mutex summary_mutex;
    std::atomic<bool> stop{false};
    const std::size_t total = in.dataset.size();
    const auto started = std::chrono::steady_clock::now();

    detail::parallel_for(total, opts.workers, stop, [&](std::size_t i) {
        const DatasetLine& line = in.dataset[i];
        RunRecord rec;
        rec.run_id = run_id;
        rec.backend = in.backend.spec;
        rec.template_name = in.tmpl.name;
        rec.root_seed = opts.seed;
        rec.method = opts.method;
        rec.started_at = utc_timestamp();
        const std::string progress = "[" + std::to_string(i + 1) + "/" + std::to_string(total) + "] ";

        auto fail = [&](const std::string& why) {
            rec.status = "error";
            rec.error = why;
            rec.finished_at = utc_timestamp();
            out.write(serialize(rec));
            std::lock_guard lock(summary_mutex);
            ++summary.items_failed;
            log << progress << (rec.item_id.empty() ? "line " + std::to_string(line.line) : rec.item_id)
                << ": error: " << why << '\n';
        };

        if (!line.item) {
            rec.item_id = "";
            try {
                rec.config = resolve_decode_config(opts, DatasetItem{}, i, in.backend.stop_tokens);
            } catch (const std::exception&) {
            }
            fail("malformed dataset line " + std::to_string(line.line) + ": " + line.error);
            return;
        }
        const DatasetItem& item = *line.item;
        rec.item_id = item.id;
        rec.query = item.query;
        rec.task_tag = item.task_tag;
        rec.principle_id = item.principle_id.value_or(opts.principle_id);
        try {
            rec.config = resolve_decode_config(opts, item, i, in.backend.stop_tokens);
            const PrincipleSpec* principle = rec.principle_id.empty() ? nullptr : &in.library.at(rec.principle_id);
            DecodeResult result =
                run_method(*in.backend.lm, opts.method, item.query, principle, in.shots, in.tmpl, rec.config,
                           in.scorer.get());
            rec.output = result.text;
            rec.n_tokens = result.tokens.size();
            rec.forward_calls = result.forward_calls;
            rec.wall_time_ms = std::chrono::duration<double, std::milli>(result.wall_time).count();
            rec.trace = std::move(result.trace);
            rec.candidate_scores = std::move(result.candidate_scores);
            rec.selected_candidate = result.selected_candidate;
            rec.finished_at = utc_timestamp();
            out.write(serialize(rec));
            std::lock_guard lock(summary_mutex);
            ++summary.items_ok;
            summary.tokens += rec.n_tokens;
            summary.forward_calls += rec.forward_calls;
            log << progress << item.id << ": " << rec.n_tokens << " tokens, " << rec.forward_calls
                << " forward calls\n";
        } catch (const PartialDecodeError& e) {
            rec.output = e.partial().text;
            rec.n_tokens = e.partial().tokens.size();
            rec.forward_calls = e.partial().forward_calls;
            rec.trace = e.partial().trace;
            stop = true;
            {
                std::lock_guard lock(summary_mutex);
                summary.aborted = true;
                summary.abort_reason = e.what();
            }
            fail(std::string("backend failure: ") + e.what());
        } catch (const TransportError& e) {
            stop = true;
            {
                std::lock_guard lock(summary_mutex);
                summary.aborted = true;
                summary.abort_reason = e.what();
            }
            fail(std::string("backend failure: ") + e.what());
        } catch (const std::exception& e) {
            fail(e.what());
        }
    });

    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log << format_throughput(method_name(opts.method.kind), summary) << '\n';
    if (summary.aborted) {
        log << "aborted: " << summary.abort_reason << " (records written so far are kept in " << opts.out << ")\n";
    }
    return summary;
}

inline int cmd_decode(const DecodeOptions& opts, std::ostream& log = std::cout) {
    const DecodeInputs in = load_decode_inputs(opts);
    const DecodeSummary s = run_decode(opts, in, log);
    return s.aborted ? exit_backend_down : exit_ok;
}

// ---------------------------------------------------------------- sweep-beta

struct SweepOptions {
    DecodeOptions decode; // decode.out is the output directory
    std::vector<double> betas;
    std::size_t bins = 20;
};

inline std::string beta_dir_name(double beta) { return "beta_" + format_float(beta); }

inline void validate_betas(const std::vector<double>& betas) {
    if (betas.empty()) {
        throw ConfigError("sweep needs at least one beta");
    }
    for (double b : betas) {
        if (!(b > 0.0) || !std::isfinite(b)) {
            throw ConfigError("beta must be > 0, got " + format_float(b));
        }
    }
}

inline std::vector<std::vector<StepTrace>> ok_traces(const std::vector<RunRecord>& records) {
    std::vector<std::vector<StepTrace>> out;
    for (const auto& r : records) {
        if (r.ok()) {
            out.push_back(r.trace);
        }
    }
    return out;
}

// One directory per beta holding records.jsonl, landscape.csv and stats.csv;
// sweep.csv in the root collects the per-beta stats.
inline int cmd_sweep_beta(SweepOptions opts, std::ostream& log = std::cout) {
    validate_betas(opts.betas);
    if (opts.decode.out.empty()) {
        throw ConfigError("--out is required");
    }
    opts.decode.method = MethodSpec{MethodKind::OPAD};
    const std::filesystem::path root(opts.decode.out);
    std::filesystem::create_directories(root);
    const DecodeInputs in = load_decode_inputs(opts.decode);

    std::ofstream sweep(root / "sweep.csv");
    sweep << "beta,steps,mean,stddev,min,max,tokens,forward_calls\n";
    for (double beta : opts.betas) {
        DecodeOptions d = opts.decode;
        d.beta = beta;
        const auto dir = root / beta_dir_name(beta);
        std::filesystem::create_directories(dir);
        d.out = (dir / "records.jsonl").string();
        d.append = false;
        log << "beta " << format_float(beta) << '\n';
        const DecodeSummary s = run_decode(d, in, log);
        if (s.aborted) {
            return exit_backend_down;
        }
        const auto traces = ok_traces(load_run_records(d.out));
        const RewardLandscape land = reward_landscape(traces, beta, opts.bins);
        std::ofstream csv(dir / "landscape.csv");
        write_csv(csv, land);
        std::ofstream stats(dir / "stats.csv");
        const std::string row = format_float(beta) + "," + std::to_string(land.steps) + "," + format_float(land.mean) +
                                "," + format_float(land.stddev) + "," + format_float(land.min) + "," +
                                format_float(land.max) + "," + std::to_string(s.tokens) + "," +
                                std::to_string(s.forward_calls);
        stats << "beta,steps,mean,stddev,min,max,tokens,forward_calls\n" << row << '\n';
        sweep << row << '\n';
        log << "  reward/beta mean=" << format_float(land.mean) << " stddev=" << format_float(land.stddev)
            << " steps=" << land.steps << '\n';
    }
    return exit_ok;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
    std::vector<std::string> records;
    std::string out; // output directory
    std::string oracle; // backend spec for perplexity; skipped when empty
    std::string dataset; // references for ROUGE
    // Subset of {"metrics", "kl", "landscape"}. When unset, every analysis
    // the traces support is run; when set, a missing trace field is an error.
    std::optional<std::set<std::string>> analyses;
    std::size_t bins = 20;
    std::size_t max_position = 64;
    BackendOptions backend_options;
};

struct MethodGroup {
    std::string label;
    std::vector<RunRecord> records; // successful records only
};

// Groups successful records by method name, in first-seen order.
inline std::vector<MethodGroup> group_by_method(const std::vector<RunRecord>& records) {
    std::vector<MethodGroup> groups;
    for (const auto& r : records) {
        if (!r.ok()) {
            continue;
        }
        const std::string label(method_name(r.method.kind));
        auto it = std::find_if(groups.begin(), groups.end(), [&](const MethodGroup& g) { return g.label == label; });
        if (it == groups.end()) {
            groups.push_back({label, {}});
            it = std::prev(groups.end());
        }
        it->records.push_back(r);
    }
    return groups;
}

inline MetricReport compute_metrics(const std::vector<RunRecord>& records, const LanguageModel* oracle,
                                    const std::map<std::string, std::string>& references) {
    MetricReport m;
    std::vector<std::string> texts;
    for (const auto& r : records) {
        texts.push_back(r.output);
    }
    m.n_samples = texts.size();
    auto guarded = [](auto fn) {
        try {
            return fn();
        } catch (const UndefinedMetricError&) {
            return std::nan("");
        }
    };
    m.distinct_1 = guarded([&] { return distinct_n(texts, 1); });
    m.distinct_2 = guarded([&] { return distinct_n(texts, 2); });
    if (oracle) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& t : texts) {
            if (!split_whitespace(t).empty()) {
                sum += perplexity(*oracle, t);
                ++n;
            }
        }
        if (n) {
            m.ppl = sum / static_cast<double>(n);
        }
    }
    double r1 = 0.0, r2 = 0.0, rl = 0.0;
    std::size_t nr = 0;
    for (const auto& r : records) {
        auto it = references.find(r.item_id);
        if (it == references.end() || split_whitespace(it->second).empty()) {
            continue;
        }
        if (!split_whitespace(r.output).empty()) {
            const RougeScores s = rouge(r.output, it->second);
            r1 += s.rouge_1;
            r2 += s.rouge_2;
            rl += s.rouge_l;
        }
        ++nr; // an empty output scores zero
    }
    if (nr) {
        m.rouge_1 = r1 / static_cast<double>(nr);
        m.rouge_2 = r2 / static_cast<double>(nr);
        m.rouge_l = rl / static_cast<double>(nr);
    }
    return m;
}

inline std::string csv_cell(double v) { return std::isnan(v) ? std::string() : format_float(v); }
inline std::string csv_cell(const std::optional<double>& v) { return v ? csv_cell(*v) : std::string(); }

inline void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows) {
    out << "method,n_samples,distinct_1,distinct_2,ppl,rouge_1,rouge_2,rouge_l\n";
    for (const auto& [label, m] : rows) {
        out << label << ',' << m.n_samples << ',' << csv_cell(m.distinct_1) << ',' << csv_cell(m.distinct_2) << ','
            << csv_cell(m.ppl) << ',' << csv_cell(m.rouge_1) << ',' << csv_cell(m.rouge_2) << ','
            << csv_cell(m.rouge_l) << '\n';
    }
}

inline bool traces_have(const std::vector<RunRecord>& records, bool (*has)(const StepTrace&)) {
    for (const auto& r : records) {
        for (const auto& s : r.trace) {
            if (!has(s)) {
                return false;
            }
        }
    }
    return true;
}

// Rewards divided by each record's own beta, so groups mixing betas still
// histogram r / beta.
inline std::vector<std::vector<StepTrace>> scaled_reward_traces(const std::vector<RunRecord>& records) {
    std::vector<std::vector<StepTrace>> out;
    for (const auto& r : records) {
        auto& trace = out.emplace_back(r.trace);
        for (auto& s : trace) {
            if (s.reward) {
                s.reward = *s.reward / r.config.beta;
            }
        }
    }
    return out;
}

inline int cmd_analyze(const AnalyzeOptions& opts, std::ostream& log = std::cout) {
    if (opts.records.empty()) {
        throw ConfigError("analyze needs at least one records file");
    }
    if (opts.out.empty()) {
        throw ConfigError("--out is required");
    }
    if (opts.analyses) {
        for (const auto& a : *opts.analyses) {
            if (a != "metrics" && a != "kl" && a != "landscape") {
                throw ConfigError("unknown analysis '" + a + "' (metrics, kl, landscape)");
            }
        }
    }
    auto wants = [&](const char* a) { return !opts.analyses || opts.analyses->count(a) > 0; };
    const bool strict = opts.analyses.has_value();

    std::vector<RunRecord> all;
    for (const auto& path : opts.records) {
        auto recs = load_run_records(path);
        all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    const auto groups = group_by_method(all);
    if (groups.empty()) {
        throw InputError("no successful records to analyze");
    }
    std::map<std::string, std::string> references;
    if (!opts.dataset.empty()) {
        for (const auto& line : load_dataset(opts.dataset)) {
            if (line.item && line.item->reference) {
                references[line.item->id] = *line.item->reference;
            }
        }
    }
    std::optional<Backend> oracle;
    if (!opts.oracle.empty()) {
        oracle = load_backend(opts.oracle, opts.backend_options);
    }

    const std::filesystem::path root(opts.out);
    std::filesystem::create_directories(root);
    std::ostringstream summary;
    summary << "records: " << all.size() << " (" << all.size() - [&] {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.records.size();
        return n;
    }() << " failed, skipped)\n";

    if (wants("metrics")) {
        std::vector<std::pair<std::string, MetricReport>> rows;
        for (const auto& g : groups) {
            rows.emplace_back(g.label, compute_metrics(g.records, oracle ? oracle->lm.get() : nullptr, references));
        }
        std::ofstream csv(root / "metrics.csv");
        write_metrics_csv(csv, rows);
        summary << "\nmethod     n    dist-1   dist-2   ppl        rouge-1  rouge-2  rouge-l\n";
        for (const auto& [label, m] : rows) {
            char buf[256];
            auto cell = [](std::optional<double> v, int w) {
                char b[32];
                if (!v || std::isnan(*v)) {
                    std::snprintf(b, sizeof(b), "%-*s", w, "-");
                } else {
                    std::snprintf(b, sizeof(b), "%-*.4f", w, *v);
                }
                return std::string(b);
            };
            std::snprintf(buf, sizeof(buf), "%-10s %-4zu %s %s %s %s %s %s\n", label.c_str(), m.n_samples,
                          cell(m.distinct_1, 8).c_str(), cell(m.distinct_2, 8).c_str(), cell(m.ppl, 10).c_str(),
                          cell(m.rouge_1, 8).c_str(), cell(m.rouge_2, 8).c_str(), cell(m.rouge_l, 8).c_str());
            summary << buf;
        }
    }

    auto has_kl = +[](const StepTrace& s) { return s.kl_vs_unconstrained.has_value(); };
    auto has_reward = +[](const StepTrace& s) { return s.reward.has_value(); };
    for (const auto& g : groups) {
        if (wants("kl")) {
            if (traces_have(g.records, has_kl)) {
                std::vector<std::vector<StepTrace>> traces;
                for (const auto& r : g.records) traces.push_back(r.trace);
                const KlCurve curve = token_kl_curve(traces, opts.max_position);
                std::ofstream csv(root / ("kl_curve_" + g.label + ".csv"));
                write_csv(csv, curve);
                summary << "\nkl curve (" << g.label << "): " << curve.size() << " positions";
                if (!curve.empty()) {
                    summary << ", step 1 mean KL " << format_float(curve.front().mean_kl);
                }
                summary << '\n';
            } else if (strict) {
                throw UnsupportedAnalysisError("kl analysis needs per-step KL in the traces; method '" + g.label +
                                               "' does not record it");
            } else {
                summary << "\nkl curve (" << g.label << "): not available (no per-step KL in trace)\n";
            }
        }
        if (wants("landscape")) {
            if (traces_have(g.records, has_reward)) {
                const RewardLandscape land = reward_landscape(scaled_reward_traces(g.records), 1.0, opts.bins);
                std::ofstream csv(root / ("landscape_" + g.label + ".csv"));
                write_csv(csv, land);
                summary << "reward landscape (" << g.label << "): steps " << land.steps << ", mean r/beta "
                        << format_float(land.mean) << ", stddev " << format_float(land.stddev) << '\n';
            } else if (strict) {
                throw UnsupportedAnalysisError("landscape analysis needs per-step rewards; method '" + g.label +
                                               "' does not record them");
            } else {
                summary << "reward landscape (" << g.label << "): not available (no reward in trace)\n";
            }
        }
    }
    std::ofstream(root / "summary.txt") << summary.str();
    log << summary.str();
    return exit_ok;
}

// ---------------------------------------------------------------- judge

struct JudgeOptions {
    std::string records_a;
    std::string records_b;
    std::string out; // verdicts JSONL; the aggregate goes to <out>.summary.csv
    std::string principles;
    std::string config_file;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::string> template_id;
};

inline JudgeConfig resolve_judge_config(const JudgeOptions& opts) {
    JudgeConfig c;
    if (!opts.config_file.empty()) {
        const auto j = nlohmann::json::parse(read_file(opts.config_file), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError(opts.config_file + ": judge config is not a JSON object");
        }
        c = JudgeConfig::from_json(j);
    }
    if (opts.endpoint) c.endpoint = *opts.endpoint;
    if (opts.model) c.model = *opts.model;
    if (opts.template_id) c.template_id = parse_judge_template(*opts.template_id);
    c.validate();
    return c;
}

// "mock:<file>" selects a scripted judge; anything else is an HTTP endpoint.
inline std::unique_ptr<ChatTransport> make_judge_transport(const JudgeConfig& config) {
    if (config.endpoint.rfind("mock:", 0) == 0) {
        const std::string path = config.endpoint.substr(5);
        const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
        if (j.is_discarded()) {
            throw ConfigError(path + ": mock judge script is not valid JSON");
        }
        return ScriptedChatTransport::from_json(j);
    }
    return std::make_unique<HttpChatTransport>(config);
}

struct Pairing {
    std::vector<std::pair<RunRecord, RunRecord>> pairs; // in file-A order
    std::vector<std::string> unpaired;
};

inline Pairing pair_records(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
    std::map<std::string, const RunRecord*> by_id;
    for (const auto& r : b) {
        if (r.ok() && !r.item_id.empty()) {
            by_id.emplace(r.item_id, &r);
        }
    }
    Pairing p;
    std::set<std::string> used;
    for (const auto& r : a) {
        if (!r.ok() || r.item_id.empty()) {
            continue;
        }
        auto it = by_id.find(r.item_id);
        if (it == by_id.end()) {
            p.unpaired.push_back(r.item_id);
        } else if (used.insert(r.item_id).second) {
            p.pairs.emplace_back(r, *it->second);
        }
    }
    for (const auto& [id, rec] : by_id) {
        if (!used.count(id)) {
            p.unpaired.push_back(id);
        }
    }
    return p;
}

// Extra template slot for role / principle judge prompts.
inline std::optional<std::string> judge_extra(JudgeTemplate t, const RunRecord& rec, const PrincipleLibrary& lib) {
    if (!judge_template_needs_extra(t)) {
        return std::nullopt;
    }
    if (rec.principle_id.empty() || !lib.contains(rec.principle_id)) {
        throw InputError("item '" + rec.item_id + "' needs a known principle for the " +
                         std::string(judge_template_name(t)) + " judge template");
    }
    const PrincipleSpec& p = lib.at(rec.principle_id);
    if (t == JudgeTemplate::dsp_role) {
        if (auto role = dsp_role_for_domain(p.domain)) {
            return role;
        }
        throw InputError("principle '" + p.id + "' has no role for domain '" + p.domain + "'");
    }
    return p.text;
}

inline int cmd_judge(const JudgeOptions& opts, std::ostream& log = std::cout) {
    if (opts.records_a.empty() || opts.records_b.empty()) {
        throw ConfigError("judge needs two records files");
    }
    if (opts.out.empty()) {
        throw ConfigError("--out is required");
    }
    const JudgeConfig config = resolve_judge_config(opts);
    PrincipleLibrary lib;
    if (!opts.principles.empty()) {
        lib = PrincipleLibrary::from_file(opts.principles);
    }
    const auto a = load_run_records(opts.records_a);
    const auto b = load_run_records(opts.records_b);
    const Pairing pairing = pair_records(a, b);
    for (const auto& id : pairing.unpaired) {
        log << "unpaired item skipped: " << id << '\n';
    }
    if (pairing.pairs.empty()) {
        throw InputError("no matching item ids between " + opts.records_a + " and " + opts.records_b);
    }
    const std::string label_a(method_name(pairing.pairs.front().first.method.kind));
    const std::string label_b(method_name(pairing.pairs.front().second.method.kind));

    auto transport = make_judge_transport(config);
    const bool scripted = dynamic_cast<ScriptedChatTransport*>(transport.get()) != nullptr;
    const std::size_t n = pairing.pairs.size();
    std::vector<std::optional<JudgeVerdict>> verdicts(n);
    std::vector<std::string> errors(n);
    std::atomic<bool> never{false};
    // Scripted replies are consumed in order, so the mock judge runs serially.
    detail::parallel_for(n, scripted ? 1 : static_cast<std::size_t>(config.max_concurrency), never,
                         [&](std::size_t i) {
                             const auto& [ra, rb] = pairing.pairs[i];
                             try {
                                 verdicts[i] = pairwise_judge(*transport, config, ra.item_id, ra.query, ra.output,
                                                              rb.output, judge_extra(config.template_id, ra, lib));
                             } catch (const std::exception& e) {
                                 errors[i] = e.what();
                             }
                         });

    detail::JsonlAppender out(opts.out, false);
    std::vector<JudgeVerdict> ok;
    for (std::size_t i = 0; i < n; ++i) {
        ojson j;
        j["pair_id"] = pairing.pairs[i].first.item_id;
        j["method_a"] = label_a;
        j["method_b"] = label_b;
        if (verdicts[i]) {
            j["status"] = "ok";
            j["verdict"] = std::string(verdict_name(verdicts[i]->verdict));
            j["debiased"] = verdicts[i]->debiased;
            j["raw_original"] = verdicts[i]->raw_original;
            j["raw_swapped"] = verdicts[i]->raw_swapped;
            ok.push_back(*verdicts[i]);
        } else {
            j["status"] = "error";
            j["error"] = errors[i];
            log << "judge failed for " << pairing.pairs[i].first.item_id << ": " << errors[i] << '\n';
        }
        out.write(j.dump());
    }
    if (ok.empty()) {
        throw EvaluationError("every judge call failed", {});
    }
    const VerdictSummary s = aggregate_verdicts(ok);
    std::ofstream table(opts.out + ".summary.csv");
    table << "method_a,method_b,pairs,wins,losses,ties,failed,win_pct,lose_pct,tie_pct\n"
          << label_a << ',' << label_b << ',' << s.total() << ',' << s.wins << ',' << s.losses << ',' << s.ties << ','
          << n - ok.size() << ',' << detail::fixed(s.win_pct, 1) << ',' << detail::fixed(s.lose_pct, 1) << ','
          << detail::fixed(s.tie_pct, 1) << '\n';
    log << label_a << " vs " << label_b << " (" << s.total() << " pairs): " << format_summary(s) << '\n';
    return exit_ok;
}

} // namespace opad
