// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "opad/lm.hpp"

namespace opad {

// Vocabulary of the corpus words in order of first appearance, optionally
// followed by an unknown-word token.
inline Vocabulary corpus_vocabulary(std::string_view corpus, std::optional<std::string> unknown_word = std::nullopt) {
    std::vector<std::string> words;
    std::unordered_map<std::string_view, bool> seen;
    for (std::string_view w : split_whitespace(corpus)) {
        if (seen.emplace(w, true).second) {
            words.emplace_back(w);
        }
    }
    if (unknown_word && !seen.count(*unknown_word)) {
        words.push_back(*unknown_word);
    }
    return Vocabulary(std::move(words), std::move(unknown_word));
}

// Additively smoothed n-gram model over a whitespace-tokenized corpus, read as
// one continuous token stream. Rows are stored for every observed context of
// length 0..order-1 so that short contexts at the start of a prompt use the
// matching lower-order row; a longer context whose (order-1)-suffix never
// occurred gets the uniform distribution.
//
//   P(w | h) = (count(h, w) + smoothing) / (count(h) + smoothing * V)
inline TableLM train_ngram(std::string_view corpus, std::size_t order, double smoothing, Vocabulary vocab) {
    if (order < 1) {
        throw InputError("n-gram order must be >= 1");
    }
    if (!(smoothing >= 0.0)) {
        throw InputError("smoothing must be >= 0");
    }
    const TokenSequence stream = vocab.tokenize(corpus);
    if (stream.empty()) {
        throw InputError("n-gram corpus is empty");
    }
    const std::size_t V = vocab.size();

    std::map<TokenSequence, std::vector<double>> counts;
    for (std::size_t pos = 0; pos < stream.size(); ++pos) {
        const std::size_t max_history = std::min(order - 1, pos);
        for (std::size_t len = 0; len <= max_history; ++len) {
            TokenSequence history(stream.begin() + static_cast<std::ptrdiff_t>(pos - len),
                                  stream.begin() + static_cast<std::ptrdiff_t>(pos));
            auto& row = counts[std::move(history)];
            if (row.empty()) {
                row.assign(V, 0.0);
            }
            row[stream[pos]] += 1.0;
        }
    }

    TableLM lm(std::move(vocab), order - 1, std::nullopt, TableLM::Lookup::exact_length);
    for (auto& [history, row] : counts) {
        double total = 0.0;
        for (double c : row) {
            total += c;
        }
        const double denom = total + smoothing * static_cast<double>(V);
        std::vector<double> probs(V);
        for (std::size_t w = 0; w < V; ++w) {
            probs[w] = (row[w] + smoothing) / denom;
        }
        lm.set_probs(history, probs);
    }
    return lm;
}

inline TableLM train_ngram(std::string_view corpus, std::size_t order, double smoothing) {
    if (split_whitespace(corpus).empty()) {
        throw InputError("n-gram corpus is empty");
    }
    return train_ngram(corpus, order, smoothing, corpus_vocabulary(corpus));
}

} // namespace opad
