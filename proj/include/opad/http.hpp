// Copyright (C) 2026 The opad Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "opad/errors.hpp"

namespace opad::http {

using json = nlohmann::json;

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // starts with '/', or empty
};

inline Url parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("URL '" + url + "' has no scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, ""};
    }
    Url out{url.substr(0, path_start), url.substr(path_start)};
    while (out.path.size() > 1 && out.path.back() == '/') {
        out.path.pop_back();
    }
    if (out.path == "/") {
        out.path.clear();
    }
    return out;
}

struct RequestOptions {
    std::chrono::milliseconds timeout{30000};
    httplib::Headers headers;
};

inline bool retriable_status(int status) { return status == 429 || status >= 500; }

namespace detail {

inline json handle(const httplib::Result& res, const std::string& what) {
    if (!res) {
        throw TransportError(what + ": " + httplib::to_string(res.error()), 0, true);
    }
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(what + ": HTTP " + std::to_string(res->status), res->status,
                             retriable_status(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ParseError(what + ": response is not JSON (" + e.what() + ")", res->body);
    }
}

inline httplib::Client make_client(const std::string& origin, const RequestOptions& opts) {
    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    return client;
}

} // namespace detail

// One client per request so callers on different threads never share a socket.
inline json post_json(const std::string& origin, const std::string& path, const json& body,
                      const RequestOptions& opts = {}) {
    httplib::Client client = detail::make_client(origin, opts);
    return detail::handle(client.Post(path, opts.headers, body.dump(), "application/json"), "POST " + origin + path);
}

inline json get_json(const std::string& origin, const std::string& path, const RequestOptions& opts = {}) {
    httplib::Client client = detail::make_client(origin, opts);
    return detail::handle(client.Get(path, opts.headers), "GET " + origin + path);
}

// Runs `fn`, retrying retriable transport failures with exponential backoff.
template <typename Fn>
auto with_retries(Fn&& fn, int max_retries, std::chrono::milliseconds initial_backoff) {
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            if (!e.retriable() || attempt >= max_retries) {
                throw;
            }
            std::this_thread::sleep_for(initial_backoff * (1LL << std::min(attempt, 16)));
        }
    }
}

} // namespace opad::http
