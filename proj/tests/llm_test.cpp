#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "mdiag/embed_client.hpp"
#include "mdiag/llm.hpp"
#include "test_util.hpp"

using namespace mdiag;

namespace {

/// In-process HTTP endpoint for exercising the remote backends.
class LocalServer {
public:
    explicit LocalServer(std::function<void(httplib::Server&)> setup) {
        setup(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

HttpConfig fast_config(const std::string& base) {
    HttpConfig cfg;
    cfg.base_url = base;
    cfg.max_retries = 2;
    cfg.backoff_ms = 1;
    cfg.timeout_s = 5;
    return cfg;
}

}  // namespace

TEST(ChatRequest, CacheKeyTracksEveryField) {
    ChatRequest a;
    a.user = "hello";
    ChatRequest b = a;
    EXPECT_EQ(a.cache_key().digest, b.cache_key().digest);
    b.temperature = 0.5;
    EXPECT_NE(a.cache_key().digest, b.cache_key().digest);
    b = a;
    b.system = "sys";
    EXPECT_NE(a.cache_key().digest, b.cache_key().digest);
}

TEST(ChatRequest, ValidationCatchesEmptyPrompt) {
    ChatRequest r;
    EXPECT_THROW(r.validate(), Error);
    r.user = "x";
    r.temperature = -1.0;
    EXPECT_THROW(r.validate(), Error);
}

TEST(ScriptedBackend, LookupOrderIsExactDynamicSubstringDefault) {
    ScriptedChatBackend backend("t");
    backend.add_exact("exact prompt", "from exact");
    backend.add_dynamic([](const ChatRequest& req) -> std::optional<std::string> {
        if (req.user.find("dyn") != std::string::npos) return "from dynamic";
        return std::nullopt;
    });
    backend.add_substring("needle", "from substring");
    backend.set_default_response("from default");

    ChatRequest r;
    r.user = "exact prompt";
    EXPECT_EQ(backend.generate(r), "from exact");
    r.user = "has dyn inside";
    EXPECT_EQ(backend.generate(r), "from dynamic");
    r.user = "contains needle here";
    EXPECT_EQ(backend.generate(r), "from substring");
    r.user = "nothing matches";
    EXPECT_EQ(backend.generate(r), "from default");
    EXPECT_EQ(backend.calls(), 4u);
}

TEST(ScriptedBackend, RejectsAmbiguousRules) {
    ScriptedChatBackend backend;
    backend.add_exact("p", "r1");
    EXPECT_NO_THROW(backend.add_exact("p", "r1"));  // identical re-registration is fine
    EXPECT_THROW(backend.add_exact("p", "r2"), Error);
    backend.add_substring("abcdef", "r");
    EXPECT_THROW(backend.add_substring("cde", "x"), Error);
    EXPECT_THROW(backend.add_substring("abcdefgh", "x"), Error);
    EXPECT_THROW(backend.add_substring("", "x"), Error);
}

TEST(ScriptedBackend, ThrowsWithoutMatchingRule) {
    ScriptedChatBackend backend("strict");
    ChatRequest r;
    r.user = "anything";
    EXPECT_THROW(backend.generate(r), Error);
}

TEST(ResponseCache, CompleteIsCacheFirst) {
    testutil::TempDir tmp;
    ResponseCache cache(tmp.file("cache"));
    ScriptedChatBackend backend;
    backend.set_default_response("answer");

    ChatRequest req;
    req.user = "question";
    ChatResponse first = complete(req, backend, &cache);
    EXPECT_EQ(first.text, "answer");
    EXPECT_FALSE(first.cached);
    EXPECT_EQ(backend.calls(), 1u);

    ChatResponse second = complete(req, backend, &cache);
    EXPECT_EQ(second.text, "answer");
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(backend.calls(), 1u) << "warm cache must not touch the backend";
}

TEST(ResponseCache, CorruptEntryNamesThePath) {
    testutil::TempDir tmp;
    ResponseCache cache(tmp.file("cache"));
    ChatRequest req;
    req.user = "q";
    CacheKey key = req.cache_key();
    cache.store(key, req.canonical(), {{"text", "ok"}});
    // clobber the entry
    std::ofstream out(tmp.file("cache") / (key.digest + ".json"));
    out << "{broken";
    out.close();
    try {
        cache.lookup(key);
        FAIL() << "expected corrupt-entry error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(key.digest), std::string::npos);
    }
}

TEST(RemoteChat, ParsesMessageContentAndTextFallback) {
    std::atomic<int> hits{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            EXPECT_EQ(body.at("model"), "test-model");
            EXPECT_EQ(body.at("messages").back().at("role"), "user");
            int n = ++hits;
            if (n == 1) {
                res.set_content(R"({"choices":[{"message":{"content":"via message"}}]})",
                                "application/json");
            } else {
                res.set_content(R"({"choices":[{"text":"via text"}]})", "application/json");
            }
        });
    });
    RemoteChatBackend backend("test-model", fast_config(server.base_url()));
    ChatRequest req;
    req.user = "hi";
    EXPECT_EQ(backend.generate(req), "via message");
    EXPECT_EQ(backend.generate(req), "via text");
}

TEST(RemoteChat, RetriesTransientErrorsThenSucceeds) {
    std::atomic<int> hits{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            if (++hits < 3) {
                res.status = 503;
                res.set_content("busy", "text/plain");
            } else {
                res.set_content(R"({"choices":[{"message":{"content":"finally"}}]})",
                                "application/json");
            }
        });
    });
    RemoteChatBackend backend("m", fast_config(server.base_url()));
    ChatRequest req;
    req.user = "hi";
    EXPECT_EQ(backend.generate(req), "finally");
    EXPECT_EQ(hits.load(), 3);
}

TEST(RemoteChat, ClientErrorFailsWithoutRetry) {
    std::atomic<int> hits{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 400;
            res.set_content("bad request body", "text/plain");
        });
    });
    RemoteChatBackend backend("m", fast_config(server.base_url()));
    ChatRequest req;
    req.user = "hi";
    try {
        backend.generate(req);
        FAIL() << "expected failure";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("400"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bad request body"), std::string::npos);
    }
    EXPECT_EQ(hits.load(), 1) << "4xx must not be retried";
}

TEST(RemoteChat, ExhaustedRetriesReportAttemptCount) {
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("down", "text/plain");
        });
    });
    HttpConfig cfg = fast_config(server.base_url());
    cfg.max_retries = 1;
    RemoteChatBackend backend("m", cfg);
    ChatRequest req;
    req.user = "hi";
    try {
        backend.generate(req);
        FAIL() << "expected failure";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("2 attempts"), std::string::npos);
    }
}

TEST(RemoteChat, MissingEndpointIsAnImmediateError) {
    // guard against env leaking into the test
    unsetenv("LLM_API_BASE");
    RemoteChatBackend backend("m", HttpConfig{});
    ChatRequest req;
    req.user = "hi";
    EXPECT_THROW(backend.generate(req), Error);
}

TEST(RemoteEmbed, BatchesAndCachesPerText) {
    testutil::TempDir tmp;
    ResponseCache cache(tmp.file("cache"));
    std::atomic<int> requests{0};
    std::atomic<int> texts_served{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            auto body = nlohmann::json::parse(req.body);
            nlohmann::json vectors = nlohmann::json::array();
            for (const auto& text : body.at("input")) {
                ++texts_served;
                double seedling = static_cast<double>(text.get<std::string>().size());
                vectors.push_back({seedling, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
            }
            res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
        });
    });

    EmbedderSpec spec;
    spec.backend = EmbedderBackend::remote_api;
    spec.dim = 8;
    spec.endpoint = server.base_url();

    std::vector<std::string> batch = {"one", "two", "three"};
    auto first = embed_batch(batch, spec, &cache, 2);
    ASSERT_EQ(first.size(), 3u);
    EXPECT_EQ(requests.load(), 2) << "batch size 2 over 3 texts is two requests";
    EXPECT_EQ(texts_served.load(), 3);

    // second pass: all three come from the cache
    auto second = embed_batch(batch, spec, &cache, 2);
    EXPECT_EQ(requests.load(), 2);
    for (size_t i = 0; i < 3; ++i) EXPECT_EQ(first[i], second[i]);

    // partial warmth: one new text triggers exactly one fetch of one text
    auto third = embed_batch({"one", "four"}, spec, &cache, 2);
    EXPECT_EQ(texts_served.load(), 4);
    EXPECT_EQ(third[0], first[0]);
}

TEST(RemoteEmbed, WrongVectorCountIsAnError) {
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"vectors":[]})", "application/json");
        });
    });
    EmbedderSpec spec;
    spec.backend = EmbedderBackend::remote_api;
    spec.dim = 8;
    spec.endpoint = server.base_url();
    EXPECT_THROW(embed_batch({"solo"}, spec, nullptr), Error);
}

TEST(EmbedBatch, RejectsEmptyStringsAndTfidfBackend) {
    EmbedderSpec local = EmbedderSpec::hash_local_default();
    EXPECT_THROW(embed_batch({"ok", ""}, local), Error);
    EmbedderSpec tf;
    tf.backend = EmbedderBackend::tfidf;
    EXPECT_THROW(embed_batch({"ok"}, tf), Error);
}
