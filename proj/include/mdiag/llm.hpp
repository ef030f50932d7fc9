#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdiag/cache.hpp"
#include "mdiag/common.hpp"
#include "mdiag/http.hpp"

namespace mdiag {

struct ChatRequest {
    std::string model;
    std::string system;
    std::string user;
    int max_tokens = 256;
    double temperature = 0.0;  // deterministic by default across all stages

    nlohmann::json canonical() const {
        return nlohmann::json{{"kind", "chat"},          {"model", model},
                              {"system", system},        {"user", user},
                              {"max_tokens", max_tokens}, {"temperature", temperature}};
    }

    CacheKey cache_key() const { return CacheKey::of(canonical()); }

    void validate() const {
        if (user.empty()) throw Error("chat request has empty user prompt");
        if (temperature < 0.0) throw Error("chat request temperature must be >= 0");
    }
};

struct ChatResponse {
    std::string text;
    std::string backend_id;
    bool cached = false;
    int64_t latency_ms = 0;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string generate(const ChatRequest& req) = 0;
};

using BackendHandle = std::shared_ptr<ChatBackend>;

/// Remote chat endpoint speaking {model, messages:[{role,content}],
/// max_tokens, temperature}; the answer is the first choice's text.
class RemoteChatBackend : public ChatBackend {
public:
    RemoteChatBackend(std::string model, HttpConfig http, std::string path = "/v1/chat/completions")
        : model_(std::move(model)), http_(std::move(http)), path_(std::move(path)) {
        if (http_.base_url.empty()) http_.base_url = env_or_empty("LLM_API_BASE");
        if (http_.api_key.empty()) http_.api_key = env_or_empty("LLM_API_KEY");
    }

    std::string id() const override { return "remote:" + model_; }

    std::string generate(const ChatRequest& req) override {
        nlohmann::json messages = nlohmann::json::array();
        if (!req.system.empty()) {
            messages.push_back({{"role", "system"}, {"content", req.system}});
        }
        messages.push_back({{"role", "user"}, {"content", req.user}});
        nlohmann::json body{{"model", req.model.empty() ? model_ : req.model},
                            {"messages", messages},
                            {"max_tokens", req.max_tokens},
                            {"temperature", req.temperature}};
        nlohmann::json reply = detail::post_json(http_, path_, body);
        try {
            const auto& first = reply.at("choices").at(0);
            if (first.contains("message")) return first.at("message").at("content").get<std::string>();
            return first.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error("chat response missing text (" + std::string(e.what()) +
                        "): " + reply.dump().substr(0, 300));
        }
    }

private:
    std::string model_;
    HttpConfig http_;
    std::string path_;
};

/// Deterministic test double. Exact rules match the whole user prompt,
/// substring rules match anywhere in it, dynamic rules compute a response
/// from the request. Lookup order: exact, dynamic, substring (insertion
/// order), then the default if one was configured.
class ScriptedChatBackend : public ChatBackend {
public:
    using DynamicRule = std::function<std::optional<std::string>(const ChatRequest&)>;

    explicit ScriptedChatBackend(std::string name = "scripted") : name_(std::move(name)) {}

    std::string id() const override { return name_; }

    void add_exact(const std::string& user_prompt, const std::string& response) {
        auto [it, inserted] = exact_.emplace(user_prompt, response);
        if (!inserted && it->second != response) {
            throw Error("scripted backend: conflicting exact rules for one prompt");
        }
    }

    void add_substring(const std::string& needle, const std::string& response) {
        if (needle.empty()) throw Error("scripted backend: empty substring matcher");
        for (const auto& [existing, _] : substrings_) {
            if (existing.find(needle) != std::string::npos ||
                needle.find(existing) != std::string::npos) {
                throw Error("scripted backend: substring matchers overlap: \"" + existing +
                            "\" vs \"" + needle + "\"");
            }
        }
        substrings_.emplace_back(needle, response);
    }

    void add_dynamic(DynamicRule rule) { dynamic_.push_back(std::move(rule)); }

    void set_default_response(std::string response) { default_ = std::move(response); }

    size_t calls() const { return calls_; }

    std::string generate(const ChatRequest& req) override {
        ++calls_;
        if (auto it = exact_.find(req.user); it != exact_.end()) return it->second;
        for (const auto& rule : dynamic_) {
            if (auto r = rule(req)) return *r;
        }
        for (const auto& [needle, response] : substrings_) {
            if (req.user.find(needle) != std::string::npos) return response;
        }
        if (default_) return *default_;
        throw Error("scripted backend \"" + name_ + "\" has no rule for prompt: " +
                    req.user.substr(0, 120));
    }

private:
    std::string name_;
    std::map<std::string, std::string> exact_;
    std::vector<std::pair<std::string, std::string>> substrings_;
    std::vector<DynamicRule> dynamic_;
    std::optional<std::string> default_;
    std::atomic<size_t> calls_{0};
};

/// Cache-first completion. On a miss the backend is called and the response
/// persisted before returning; a warm cache never touches the backend.
inline ChatResponse complete(const ChatRequest& req, ChatBackend& backend,
                             const ResponseCache* cache = nullptr) {
    req.validate();
    ChatResponse out;
    out.backend_id = backend.id();

    CacheKey key = req.cache_key();
    if (cache) {
        if (auto hit = cache->lookup(key)) {
            out.text = hit->at("text").get<std::string>();
            out.backend_id = hit->value("backend_id", out.backend_id);
            out.cached = true;
            return out;
        }
    }

    auto start = std::chrono::steady_clock::now();
    out.text = backend.generate(req);
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    if (cache) {
        cache->store(key, req.canonical(),
                     nlohmann::json{{"text", out.text}, {"backend_id", out.backend_id}});
    }
    return out;
}

}  // namespace mdiag
