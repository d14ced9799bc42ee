// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "opad/errors.hpp"
#include "opad/lm.hpp"

namespace opad {

struct PrincipleSpec {
    std::string id;
    std::string text;
    std::string domain;
};

struct Shot {
    std::string query;
    std::string response;
};

// Replaces every `{name}` in `pattern` with bindings[name] in a single pass,
// so bound text is never rescanned. An unbound placeholder is an error.
inline std::string substitute(std::string_view pattern, const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(pattern.size());
    std::size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            std::size_t close = i + 1;
            while (close < pattern.size() &&
                   (std::islower(static_cast<unsigned char>(pattern[close])) || pattern[close] == '_')) {
                ++close;
            }
            if (close < pattern.size() && pattern[close] == '}' && close > i + 1) {
                const std::string name(pattern.substr(i + 1, close - i - 1));
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw TemplateError("unbound placeholder {" + name + "}");
                }
                out += it->second;
                i = close + 1;
                continue;
            }
        }
        out += pattern[i++];
    }
    return out;
}

inline bool has_placeholder(std::string_view pattern, std::string_view name) {
    return pattern.find("{" + std::string(name) + "}") != std::string_view::npos;
}

// Conditioning layout for (query, principle, shots). Placeholders:
// {principle} {query} {shots} {response_prefix}; shot_pattern uses {query}
// and {response}.
struct PromptTemplate {
    std::string name = "default";
    std::string pattern = "{principle}\n\n{shots}USER: {query}\nASSISTANT:";
    std::string shot_pattern = "USER: {query}\nASSISTANT: {response}\n\n";

    static PromptTemplate identity() { return {"identity", "{query}", ""}; }

    // Plain text files hold the pattern (one trailing newline dropped);
    // *.json files hold {"pattern": str, "shot_pattern": str?}.
    static PromptTemplate from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw InputError("cannot open template file " + path);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        PromptTemplate t;
        t.name = path;
        if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
            try {
                const auto j = nlohmann::json::parse(text);
                t.pattern = j.at("pattern").get<std::string>();
                t.shot_pattern = j.value("shot_pattern", t.shot_pattern);
            } catch (const nlohmann::json::exception& e) {
                throw TemplateError(path + ": malformed template: " + e.what());
            }
            return t;
        }
        if (!text.empty() && text.back() == '\n') {
            text.pop_back();
        }
        t.pattern = std::move(text);
        return t;
    }
};

inline std::string render_shots(const PromptTemplate& tmpl, std::span<const Shot> shots) {
    std::string out;
    for (const Shot& s : shots) {
        out += substitute(tmpl.shot_pattern, {{"query", s.query}, {"response", s.response}});
    }
    return out;
}

// Omitting the principle renders the unconstrained context; both renderings
// differ only by the principle block.
inline std::string render_context(const PromptTemplate& tmpl, std::string_view query,
                                  const PrincipleSpec* principle = nullptr,
                                  std::span<const Shot> shots = {}, std::string_view response_prefix = {}) {
    if (!has_placeholder(tmpl.pattern, "query")) {
        throw TemplateError("template '" + tmpl.name + "' has no {query} placeholder");
    }
    if (principle && !has_placeholder(tmpl.pattern, "principle")) {
        throw TemplateError("template '" + tmpl.name + "' has no {principle} placeholder but a principle was given");
    }
    if (!shots.empty() && !has_placeholder(tmpl.pattern, "shots")) {
        throw TemplateError("template '" + tmpl.name + "' has no {shots} placeholder but shots were given");
    }
    return substitute(tmpl.pattern, {
                                        {"principle", principle ? principle->text : std::string()},
                                        {"query", std::string(query)},
                                        {"shots", render_shots(tmpl, shots)},
                                        {"response_prefix", std::string(response_prefix)},
                                    });
}

inline TokenSequence build_context(const LanguageModel& lm, const PromptTemplate& tmpl, std::string_view query,
                                   const PrincipleSpec* principle = nullptr, std::span<const Shot> shots = {},
                                   std::string_view response_prefix = {}) {
    return lm.tokenize(render_context(tmpl, query, principle, shots, response_prefix));
}

} // namespace opad
