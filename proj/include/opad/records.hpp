// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "opad/baselines.hpp"
#include "opad/decode.hpp"
#include "opad/errors.hpp"
#include "opad/prompt.hpp"

namespace opad {

using ojson = nlohmann::ordered_json;

// JSON has no infinities; they travel as the strings "inf" / "-inf".
inline ojson real_to_json(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

inline double real_from_json(const ojson& j) {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return kPosInf;
        if (s == "-inf") return kNegInf;
        if (s == "nan") return std::nan("");
        throw InputError("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

inline ojson to_json(const SamplingConfig& s) {
    ojson j;
    j["mode"] = s.mode == SamplingMode::greedy ? "greedy" : "temperature";
    j["temperature"] = s.temperature;
    j["seed"] = s.seed;
    return j;
}

inline SamplingConfig sampling_from_json(const ojson& j) {
    SamplingConfig s;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "greedy") {
        s.mode = SamplingMode::greedy;
    } else if (mode == "temperature") {
        s.mode = SamplingMode::temperature;
    } else {
        throw InputError("unknown sampling mode '" + mode + "'");
    }
    s.temperature = j.at("temperature").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

inline ojson to_json(const DecodeConfig& c) {
    ojson j;
    j["beta"] = c.beta;
    j["reward_window"] = c.reward_window;
    j["discount"] = c.discount;
    j["max_tokens"] = c.max_tokens;
    j["sampling"] = to_json(c.sampling);
    j["stop_tokens"] = c.stop_tokens;
    j["tilt_path"] = c.tilt_path == TiltPath::log_space ? "log_space" : "literal";
    j["log_ratio_clamp"] = c.log_ratio_clamp;
    j["record_candidates"] = c.record_candidates;
    return j;
}

inline DecodeConfig decode_config_from_json(const ojson& j) {
    DecodeConfig c;
    c.beta = j.at("beta").get<double>();
    c.reward_window = j.at("reward_window").get<std::size_t>();
    c.discount = j.at("discount").get<double>();
    c.max_tokens = j.at("max_tokens").get<std::size_t>();
    c.sampling = sampling_from_json(j.at("sampling"));
    c.stop_tokens = j.at("stop_tokens").get<std::set<TokenId>>();
    const std::string path = j.at("tilt_path").get<std::string>();
    if (path != "log_space" && path != "literal") {
        throw InputError("unknown tilt path '" + path + "'");
    }
    c.tilt_path = path == "literal" ? TiltPath::literal : TiltPath::log_space;
    c.log_ratio_clamp = j.at("log_ratio_clamp").get<double>();
    c.record_candidates = j.at("record_candidates").get<bool>();
    return c;
}

inline ojson to_json(const MethodSpec& m) {
    ojson j;
    j["kind"] = std::string(method_name(m.kind));
    switch (m.kind) {
    case MethodKind::ICL: j["shots"] = m.shots; break;
    case MethodKind::BoN: j["n"] = m.n; break;
    case MethodKind::SelfCD: j["alpha"] = m.alpha; break;
    default: break;
    }
    return j;
}

inline MethodSpec method_from_json(const ojson& j) {
    MethodSpec m;
    m.kind = parse_method(j.at("kind").get<std::string>());
    m.shots = j.value("shots", m.shots);
    m.n = j.value("n", m.n);
    m.alpha = j.value("alpha", m.alpha);
    return m;
}

inline ojson to_json(const StepTrace& s) {
    ojson j;
    j["token"] = s.token;
    j["log_prob"] = real_to_json(s.log_prob);
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            j[key] = real_to_json(*v);
        }
    };
    put("realized_log_ratio", s.realized_log_ratio);
    put("reward_const", s.reward_const);
    put("reward", s.reward);
    put("log_partition", s.log_partition);
    put("kl_vs_unconstrained", s.kl_vs_unconstrained);
    put("kl_vs_constrained", s.kl_vs_constrained);
    if (!s.candidate_kl.empty()) {
        ojson arr = ojson::array();
        for (double v : s.candidate_kl) {
            arr.push_back(real_to_json(v));
        }
        j["candidate_kl"] = std::move(arr);
    }
    return j;
}

inline StepTrace step_from_json(const ojson& j) {
    StepTrace s;
    s.token = j.at("token").get<TokenId>();
    s.log_prob = real_from_json(j.at("log_prob"));
    auto get = [&](const char* key) -> std::optional<double> {
        if (j.contains(key)) {
            return real_from_json(j[key]);
        }
        return std::nullopt;
    };
    s.realized_log_ratio = get("realized_log_ratio");
    s.reward_const = get("reward_const");
    s.reward = get("reward");
    s.log_partition = get("log_partition");
    s.kl_vs_unconstrained = get("kl_vs_unconstrained");
    s.kl_vs_constrained = get("kl_vs_constrained");
    if (j.contains("candidate_kl")) {
        for (const auto& v : j["candidate_kl"]) {
            s.candidate_kl.push_back(real_from_json(v));
        }
    }
    return s;
}

// One decoded response plus everything needed to re-run it.
struct RunRecord {
    std::string run_id;
    std::string item_id;
    std::string query;
    std::string task_tag;
    std::string principle_id;
    std::string backend;
    std::string template_name;
    // Root seed of the run; config.sampling.seed is the per-item seed derived from it.
    std::uint64_t root_seed = 0;
    MethodSpec method;
    DecodeConfig config;
    std::string status = "ok"; // "ok" | "error"
    std::string error;
    std::string output;
    std::size_t n_tokens = 0;
    std::size_t forward_calls = 0;
    double wall_time_ms = 0.0;
    std::string started_at;
    std::string finished_at;
    std::vector<StepTrace> trace;
    std::vector<double> candidate_scores;
    std::optional<std::size_t> selected_candidate;

    bool ok() const { return status == "ok"; }
};

inline ojson to_json(const RunRecord& r) {
    ojson j;
    j["run_id"] = r.run_id;
    j["item_id"] = r.item_id;
    j["query"] = r.query;
    j["task_tag"] = r.task_tag;
    j["principle_id"] = r.principle_id;
    j["backend"] = r.backend;
    j["template"] = r.template_name;
    j["root_seed"] = r.root_seed;
    j["method"] = to_json(r.method);
    j["config"] = to_json(r.config);
    j["status"] = r.status;
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    j["output"] = r.output;
    j["n_tokens"] = r.n_tokens;
    j["forward_calls"] = r.forward_calls;
    j["wall_time_ms"] = r.wall_time_ms;
    j["started_at"] = r.started_at;
    j["finished_at"] = r.finished_at;
    ojson trace = ojson::array();
    for (const auto& s : r.trace) {
        trace.push_back(to_json(s));
    }
    j["trace"] = std::move(trace);
    if (!r.candidate_scores.empty()) {
        ojson scores = ojson::array();
        for (double v : r.candidate_scores) {
            scores.push_back(real_to_json(v));
        }
        j["candidate_scores"] = std::move(scores);
    }
    if (r.selected_candidate) {
        j["selected_candidate"] = *r.selected_candidate;
    }
    return j;
}

inline RunRecord run_record_from_json(const ojson& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.query = j.at("query").get<std::string>();
    r.task_tag = j.at("task_tag").get<std::string>();
    r.principle_id = j.at("principle_id").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.template_name = j.at("template").get<std::string>();
    r.root_seed = j.at("root_seed").get<std::uint64_t>();
    r.method = method_from_json(j.at("method"));
    r.config = decode_config_from_json(j.at("config"));
    r.status = j.at("status").get<std::string>();
    r.error = j.value("error", std::string());
    r.output = j.at("output").get<std::string>();
    r.n_tokens = j.at("n_tokens").get<std::size_t>();
    r.forward_calls = j.at("forward_calls").get<std::size_t>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.started_at = j.at("started_at").get<std::string>();
    r.finished_at = j.at("finished_at").get<std::string>();
    for (const auto& s : j.at("trace")) {
        r.trace.push_back(step_from_json(s));
    }
    if (j.contains("candidate_scores")) {
        for (const auto& v : j["candidate_scores"]) {
            r.candidate_scores.push_back(real_from_json(v));
        }
    }
    if (j.contains("selected_candidate")) {
        r.selected_candidate = j["selected_candidate"].get<std::size_t>();
    }
    return r;
}

inline std::string serialize(const RunRecord& r) { return to_json(r).dump(); }

inline RunRecord parse_run_record(std::string_view line) {
    try {
        return run_record_from_json(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed run record: ") + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Non-blank lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_jsonl_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            out.emplace_back(n, line);
        }
    }
    return out;
}

inline std::vector<RunRecord> load_run_records(const std::string& path) {
    std::vector<RunRecord> out;
    for (const auto& [n, line] : read_jsonl_lines(path)) {
        try {
            out.push_back(parse_run_record(line));
        } catch (const InputError& e) {
            throw InputError(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

struct DatasetItem {
    std::string id;
    std::string query;
    std::optional<std::string> principle_id;
    std::optional<std::string> reference;
    std::string task_tag = "general";
};

struct DatasetLine {
    std::size_t line = 0;
    std::optional<DatasetItem> item;
    std::string error; // set when the line is malformed
};

inline DatasetItem parse_dataset_item(std::string_view line) {
    const auto j = ojson::parse(line);
    DatasetItem item;
    item.id = j.at("id").get<std::string>();
    item.query = j.at("query").get<std::string>();
    if (j.contains("principle_id") && !j["principle_id"].is_null()) {
        item.principle_id = j["principle_id"].get<std::string>();
    }
    if (j.contains("reference") && !j["reference"].is_null()) {
        item.reference = j["reference"].get<std::string>();
    }
    item.task_tag = j.value("task_tag", std::string("general"));
    if (item.task_tag != "general" && item.task_tag != "personalized") {
        throw InputError("task_tag must be 'general' or 'personalized'");
    }
    return item;
}

// Malformed lines are reported per line instead of failing the whole file.
inline std::vector<DatasetLine> load_dataset(const std::string& path) {
    std::vector<DatasetLine> out;
    for (auto& [n, line] : read_jsonl_lines(path)) {
        DatasetLine dl;
        dl.line = n;
        try {
            dl.item = parse_dataset_item(line);
        } catch (const std::exception& e) {
            dl.error = e.what();
        }
        out.push_back(std::move(dl));
    }
    return out;
}

inline std::vector<Shot> load_shots(const std::string& path) {
    std::vector<Shot> out;
    for (const auto& [n, line] : read_jsonl_lines(path)) {
        try {
            const auto j = ojson::parse(line);
            out.push_back({j.at("query").get<std::string>(), j.at("response").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path + ":" + std::to_string(n) + ": malformed shot: " + e.what());
        }
    }
    return out;
}

// {"principles": [{"id": str, "domain": str, "text": str}, ...]}
class PrincipleLibrary {
public:
    PrincipleLibrary() = default;

    explicit PrincipleLibrary(std::vector<PrincipleSpec> principles) {
        for (auto& p : principles) {
            if (p.id.empty() || p.text.empty()) {
                throw InputError("principle needs a non-empty id and text");
            }
            if (!m_by_id.emplace(p.id, p).second) {
                throw InputError("duplicate principle id '" + p.id + "'");
            }
        }
    }

    static PrincipleLibrary from_file(const std::string& path) {
        try {
            const auto j = ojson::parse(read_file(path));
            std::vector<PrincipleSpec> ps;
            for (const auto& p : j.at("principles")) {
                ps.push_back({p.at("id").get<std::string>(), p.at("text").get<std::string>(),
                              p.value("domain", std::string())});
            }
            return PrincipleLibrary(std::move(ps));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path + ": malformed principle library: " + e.what());
        }
    }

    const PrincipleSpec& at(const std::string& id) const {
        auto it = m_by_id.find(id);
        if (it == m_by_id.end()) {
            throw InputError("unknown principle id '" + id + "'");
        }
        return it->second;
    }

    bool contains(const std::string& id) const { return m_by_id.count(id) > 0; }
    std::size_t size() const { return m_by_id.size(); }
    const std::map<std::string, PrincipleSpec>& all() const { return m_by_id; }

private:
    std::map<std::string, PrincipleSpec> m_by_id;
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp = std::chrono::system_clock::now()) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace opad
