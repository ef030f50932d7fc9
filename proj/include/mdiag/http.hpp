#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mdiag/common.hpp"

namespace mdiag {

struct HttpConfig {
    std::string base_url;   // e.g. http://127.0.0.1:8089 or https://api.example.com
    std::string api_key;    // sent as Authorization: Bearer <key> when non-empty
    int max_retries = 3;    // attempts = max_retries + 1
    int backoff_ms = 250;   // doubles per retry
    int timeout_s = 60;
};

inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

namespace detail {

inline bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

/// POSTs JSON to base_url+path with bounded retries and exponential backoff.
/// Retries cover transport errors and 408/429/5xx; anything else surfaces
/// immediately with the body as diagnostics.
inline nlohmann::json post_json(const HttpConfig& cfg, const std::string& path,
                                const nlohmann::json& body) {
    if (cfg.base_url.empty()) {
        throw Error("no endpoint configured (set the endpoint or the *_API_BASE env var)");
    }
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_s);
    client.set_read_timeout(cfg.timeout_s);
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    std::string payload = body.dump();
    std::string last_diag = "no attempt made";
    int backoff = cfg.backoff_ms;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_diag = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw Error("endpoint returned unparsable JSON: " + std::string(e.what()));
            }
        }
        last_diag = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500);
        if (!retryable_status(res->status)) {
            throw Error("request to " + cfg.base_url + path + " failed, " + last_diag);
        }
    }
    throw Error("request to " + cfg.base_url + path + " failed after " +
                std::to_string(cfg.max_retries + 1) + " attempts, last: " + last_diag);
}

}  // namespace detail
}  // namespace mdiag
