// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace opad {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad caller input: out-of-range token, mismatched lengths, empty corpus...
class InputError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Every candidate carries zero probability.
class DegenerateDistributionError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class UnsupportedAnalysisError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, int status = 0, bool retriable = true)
        : Error(what), m_status(status), m_retriable(retriable) {}

    // HTTP status, 0 when the request never completed.
    int status() const noexcept { return m_status; }
    bool retriable() const noexcept { return m_retriable; }

private:
    int m_status;
    bool m_retriable;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw)
        : Error(what), m_raw(std::move(raw)) {}

    const std::string& raw() const noexcept { return m_raw; }

private:
    std::string m_raw;
};

// Scorer failure during best-of-n; carries the scores collected so far.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::vector<double> partial_scores)
        : Error(what), m_partial(std::move(partial_scores)) {}

    const std::vector<double>& partial_scores() const noexcept { return m_partial; }

private:
    std::vector<double> m_partial;
};

} // namespace opad
