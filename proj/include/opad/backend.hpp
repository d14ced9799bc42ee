// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <set>
#include <string>

#include <json.hpp>

#include "opad/lm.hpp"
#include "opad/ngram.hpp"
#include "opad/records.hpp"
#include "opad/remote.hpp"

namespace opad {

// End-of-line marker appended to every corpus line of an ngram backend; it is
// also the backend's stop token.
inline constexpr std::string_view kEndOfLine = "</s>";
inline constexpr std::string_view kUnknownWord = "<unk>";

struct BackendOptions {
    std::size_t ngram_order = 3;
    double smoothing = 0.1;
    HttpLanguageModel::Options http;
};

struct Backend {
    std::string spec;
    std::unique_ptr<LanguageModel> lm;
    std::set<TokenId> stop_tokens;
};

// Toy table file:
//   {"vocab": [str...], "unknown": str?, "order": int, "lookup": "longest_suffix"|"exact_length",
//    "fallback": [prob...]?, "rows": [{"context": "w1 w2", "probs": [prob...]}], "stop": [str...]?}
inline Backend load_toy_backend(const std::string& path) {
    const auto j = ojson::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw InputError(path + ": toy model is not valid JSON");
    }
    try {
        std::optional<std::string> unk;
        if (j.contains("unknown")) {
            unk = j["unknown"].get<std::string>();
        }
        Vocabulary vocab(j.at("vocab").get<std::vector<std::string>>(), unk);
        std::optional<LogDistribution> fallback;
        if (j.contains("fallback")) {
            fallback = LogDistribution::from_probs(j["fallback"].get<std::vector<double>>());
        }
        const std::string lookup = j.value("lookup", std::string("longest_suffix"));
        if (lookup != "longest_suffix" && lookup != "exact_length") {
            throw InputError("unknown lookup '" + lookup + "'");
        }
        auto lm = std::make_unique<TableLM>(vocab, j.value("order", std::size_t{1}), fallback,
                                            lookup == "exact_length" ? TableLM::Lookup::exact_length
                                                                     : TableLM::Lookup::longest_suffix);
        for (const auto& row : j.value("rows", ojson::array())) {
            lm->set_probs(vocab.tokenize(row.at("context").get<std::string>()),
                          row.at("probs").get<std::vector<double>>());
        }
        Backend b{"toy:" + path, nullptr, {}};
        for (const auto& w : j.value("stop", std::vector<std::string>{})) {
            auto id = vocab.find(w);
            if (!id) {
                throw InputError("stop word '" + w + "' not in vocabulary");
            }
            b.stop_tokens.insert(*id);
        }
        b.lm = std::move(lm);
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": malformed toy model: " + e.what());
    }
}

// Every non-blank corpus line becomes "<line> </s>"; the vocabulary gets an
// <unk> entry so prompts may contain unseen words.
inline Backend load_ngram_backend(const std::string& path, std::size_t order, double smoothing) {
    std::istringstream in(read_file(path));
    std::string corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (!split_whitespace(line).empty()) {
            corpus += line;
            corpus += ' ';
            corpus += kEndOfLine;
            corpus += '\n';
        }
    }
    if (corpus.empty()) {
        throw InputError(path + ": n-gram corpus is empty");
    }
    Vocabulary vocab = corpus_vocabulary(corpus, std::string(kUnknownWord));
    const TokenId eol = *vocab.find(kEndOfLine);
    Backend b{"ngram:" + path, nullptr, {eol}};
    b.lm = std::make_unique<TableLM>(train_ngram(corpus, order, smoothing, std::move(vocab)));
    return b;
}

// "toy:<file>" | "ngram:<corpus>" | "http:<url>" (http://... and https://... are accepted as-is).
inline Backend load_backend(const std::string& spec, const BackendOptions& options = {}) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw ConfigError("backend '" + spec + "' must be toy:<file>, ngram:<corpus> or http:<url>");
    }
    const std::string kind = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);
    if (kind == "toy") {
        return load_toy_backend(rest);
    }
    if (kind == "ngram") {
        return load_ngram_backend(rest, options.ngram_order, options.smoothing);
    }
    if (kind == "http" || kind == "https") {
        const std::string url = rest.rfind("//", 0) == 0 ? spec : rest;
        return Backend{spec, std::make_unique<HttpLanguageModel>(url, options.http), {}};
    }
    throw ConfigError("unknown backend kind '" + kind + "'");
}

} // namespace opad
