// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "opad/distribution.hpp"
#include "opad/errors.hpp"

namespace opad {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Autoregressive language model. Implementations are deterministic: the same
// context always yields the same distribution.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual LogDistribution next_logprobs(std::span<const TokenId> context) const = 0;
    virtual TokenSequence tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;
};

inline std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
            ++j;
        }
        if (j > i) {
            words.push_back(text.substr(i, j - i));
        }
        i = j;
    }
    return words;
}

// Finite word list with whitespace tokenization. Words outside the list map
// to the unknown token when one is declared, otherwise tokenizing fails.
class Vocabulary {
public:
    Vocabulary() = default;

    explicit Vocabulary(std::vector<std::string> words, std::optional<std::string> unknown_word = std::nullopt)
        : m_words(std::move(words)) {
        for (std::size_t i = 0; i < m_words.size(); ++i) {
            if (!m_index.emplace(m_words[i], static_cast<TokenId>(i)).second) {
                throw InputError("duplicate vocabulary word '" + m_words[i] + "'");
            }
        }
        if (unknown_word) {
            auto it = m_index.find(*unknown_word);
            if (it == m_index.end()) {
                throw InputError("unknown-word token '" + *unknown_word + "' is not in the vocabulary");
            }
            m_unknown = it->second;
        }
    }

    std::size_t size() const noexcept { return m_words.size(); }
    const std::vector<std::string>& words() const noexcept { return m_words; }
    std::optional<TokenId> unknown_id() const noexcept { return m_unknown; }

    std::optional<TokenId> find(std::string_view word) const {
        auto it = m_index.find(std::string(word));
        if (it == m_index.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    const std::string& word(TokenId id) const {
        if (id >= m_words.size()) {
            throw InputError("token id " + std::to_string(id) + " out of range");
        }
        return m_words[id];
    }

    TokenSequence tokenize(std::string_view text) const {
        TokenSequence out;
        for (std::string_view w : split_whitespace(text)) {
            if (auto id = find(w)) {
                out.push_back(*id);
            } else if (m_unknown) {
                out.push_back(*m_unknown);
            } else {
                throw InputError("word '" + std::string(w) + "' is not in the vocabulary");
            }
        }
        return out;
    }

    std::string detokenize(std::span<const TokenId> tokens) const {
        std::string out;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i > 0) {
                out += ' ';
            }
            out += word(tokens[i]);
        }
        return out;
    }

private:
    std::vector<std::string> m_words;
    std::unordered_map<std::string, TokenId> m_index;
    std::optional<TokenId> m_unknown;
};

inline void check_tokens_in_range(std::span<const TokenId> tokens, std::size_t vocab_size) {
    for (TokenId t : tokens) {
        if (t >= vocab_size) {
            throw InputError("token id " + std::to_string(t) + " out of range for vocabulary of size " +
                             std::to_string(vocab_size));
        }
    }
}

// Lookup-table language model keyed by context suffixes of length <= order.
//
// longest_suffix: the longest stored suffix of the context wins.
// exact_length:   only the suffix of length min(|context|, order) is consulted
//                 (n-gram semantics); a miss goes to the fallback row.
class TableLM final : public LanguageModel {
public:
    enum class Lookup { longest_suffix, exact_length };

    TableLM(Vocabulary vocab, std::size_t order, std::optional<LogDistribution> fallback = std::nullopt,
            Lookup lookup = Lookup::longest_suffix)
        : m_vocab(std::move(vocab)),
          m_order(order),
          m_fallback(fallback ? std::move(*fallback) : LogDistribution::uniform(m_vocab.size())),
          m_lookup(lookup) {
        if (m_fallback.size() != m_vocab.size()) {
            throw InputError("fallback distribution does not match vocabulary size");
        }
    }

    // Token-name-free table over V placeholder words "t0".."t{V-1}".
    static TableLM with_anonymous_vocab(std::size_t vocab_size, std::size_t order,
                                        Lookup lookup = Lookup::longest_suffix) {
        std::vector<std::string> words;
        for (std::size_t i = 0; i < vocab_size; ++i) {
            words.push_back("t" + std::to_string(i));
        }
        return TableLM(Vocabulary(std::move(words)), order, std::nullopt, lookup);
    }

    void set(TokenSequence context, LogDistribution dist) {
        if (context.size() > m_order) {
            throw InputError("table context longer than the model order");
        }
        check_tokens_in_range(context, m_vocab.size());
        if (dist.size() != m_vocab.size()) {
            throw InputError("table row does not match vocabulary size");
        }
        m_table.insert_or_assign(std::move(context), std::move(dist));
    }

    void set_probs(TokenSequence context, std::span<const double> probs) {
        set(std::move(context), LogDistribution::from_probs(probs));
    }

    std::size_t vocab_size() const override { return m_vocab.size(); }
    std::size_t order() const noexcept { return m_order; }
    Lookup lookup() const noexcept { return m_lookup; }
    const Vocabulary& vocabulary() const noexcept { return m_vocab; }
    const LogDistribution& fallback() const noexcept { return m_fallback; }
    const std::map<TokenSequence, LogDistribution>& rows() const noexcept { return m_table; }

    LogDistribution next_logprobs(std::span<const TokenId> context) const override {
        check_tokens_in_range(context, m_vocab.size());
        const std::size_t longest = std::min(context.size(), m_order);
        if (m_lookup == Lookup::exact_length) {
            return row_or_fallback(context.last(longest));
        }
        for (std::size_t len = longest + 1; len-- > 0;) {
            if (const LogDistribution* row = find_row(context.last(len))) {
                return *row;
            }
        }
        return m_fallback;
    }

    TokenSequence tokenize(std::string_view text) const override { return m_vocab.tokenize(text); }
    std::string detokenize(std::span<const TokenId> tokens) const override { return m_vocab.detokenize(tokens); }

private:
    const LogDistribution* find_row(std::span<const TokenId> suffix) const {
        auto it = m_table.find(TokenSequence(suffix.begin(), suffix.end()));
        return it == m_table.end() ? nullptr : &it->second;
    }

    LogDistribution row_or_fallback(std::span<const TokenId> suffix) const {
        const LogDistribution* row = find_row(suffix);
        return row ? *row : m_fallback;
    }

    Vocabulary m_vocab;
    std::size_t m_order;
    LogDistribution m_fallback;
    Lookup m_lookup;
    std::map<TokenSequence, LogDistribution> m_table;
};

// Forwards to another model and counts next_logprobs calls.
class CountingLM final : public LanguageModel {
public:
    explicit CountingLM(const LanguageModel& inner) : m_inner(inner) {}

    std::size_t vocab_size() const override { return m_inner.vocab_size(); }

    LogDistribution next_logprobs(std::span<const TokenId> context) const override {
        m_calls.fetch_add(1, std::memory_order_relaxed);
        return m_inner.next_logprobs(context);
    }

    TokenSequence tokenize(std::string_view text) const override { return m_inner.tokenize(text); }
    std::string detokenize(std::span<const TokenId> tokens) const override { return m_inner.detokenize(tokens); }

    std::size_t calls() const noexcept { return m_calls.load(std::memory_order_relaxed); }
    void reset() noexcept { m_calls.store(0, std::memory_order_relaxed); }

private:
    const LanguageModel& m_inner;
    mutable std::atomic<std::size_t> m_calls{0};
};

} // namespace opad
