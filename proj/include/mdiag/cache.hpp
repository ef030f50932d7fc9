#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mdiag/common.hpp"

namespace mdiag {

/// Content-addressed digest of a request. Identical requests always map to
/// the same key, so a warm cache makes runs replayable.
struct CacheKey {
    std::string digest;

    static CacheKey of(const nlohmann::json& canonical_request) {
        // nlohmann objects serialize with sorted keys, so dump() is canonical
        return CacheKey{detail::sha256_hex(canonical_request.dump())};
    }
};

/// Directory of JSON files named by digest; each entry holds
/// {request, response, timestamp} and is human-inspectable. Writes go
/// through a temp file and rename, so concurrent writers are safe.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::optional<nlohmann::json> lookup(const CacheKey& key) const {
        auto path = entry_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        nlohmann::json entry;
        try {
            entry = nlohmann::json::parse(detail::read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw Error("corrupt cache entry " + path.string() + ": " + e.what());
        }
        if (!entry.contains("response")) {
            throw Error("corrupt cache entry " + path.string() + ": missing response field");
        }
        return entry.at("response");
    }

    void store(const CacheKey& key, const nlohmann::json& request,
               const nlohmann::json& response) const {
        nlohmann::json entry{{"request", request},
                             {"response", response},
                             {"timestamp", unix_time_seconds()}};
        detail::atomic_write_file(entry_path(key), entry.dump(2) + "\n");
    }

private:
    std::filesystem::path entry_path(const CacheKey& key) const {
        return dir_ / (key.digest + ".json");
    }

    static int64_t unix_time_seconds() {
        return static_cast<int64_t>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
    }

    std::filesystem::path dir_;
};

}  // namespace mdiag
