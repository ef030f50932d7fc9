#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdiag/cache.hpp"
#include "mdiag/embedding.hpp"
#include "mdiag/http.hpp"

namespace mdiag {

namespace detail {

inline nlohmann::json embed_cache_request(const EmbedderSpec& spec, const std::string& text) {
    return nlohmann::json{{"kind", "embed"}, {"model", spec.model}, {"text", text}};
}

inline std::vector<EmbeddingVector> remote_embed(const std::vector<std::string>& texts,
                                                 const EmbedderSpec& spec,
                                                 const ResponseCache* cache, int batch_size) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<size_t> misses;
    for (size_t i = 0; i < texts.size(); ++i) {
        if (cache) {
            if (auto hit = cache->lookup(CacheKey::of(embed_cache_request(spec, texts[i])))) {
                out[i].values = hit->at("vector").get<std::vector<double>>();
                continue;
            }
        }
        misses.push_back(i);
    }
    if (misses.empty()) return out;

    HttpConfig http;
    http.base_url = spec.endpoint.empty() ? env_or_empty("EMBED_API_BASE") : spec.endpoint;
    http.api_key = env_or_empty("EMBED_API_KEY");

    for (size_t start = 0; start < misses.size(); start += static_cast<size_t>(batch_size)) {
        size_t end = std::min(misses.size(), start + static_cast<size_t>(batch_size));
        nlohmann::json input = nlohmann::json::array();
        for (size_t m = start; m < end; ++m) input.push_back(texts[misses[m]]);
        nlohmann::json reply =
            post_json(http, "/v1/embeddings", nlohmann::json{{"model", spec.model}, {"input", input}});
        if (!reply.contains("vectors") || !reply.at("vectors").is_array() ||
            reply.at("vectors").size() != end - start) {
            throw Error("embedding endpoint returned a bad vectors array");
        }
        for (size_t m = start; m < end; ++m) {
            size_t i = misses[m];
            out[i].values = reply.at("vectors").at(m - start).get<std::vector<double>>();
            // persist before use so a replayed run never re-fetches
            if (cache) {
                cache->store(CacheKey::of(embed_cache_request(spec, texts[i])),
                             embed_cache_request(spec, texts[i]),
                             nlohmann::json{{"vector", out[i].values}});
            }
        }
    }
    return out;
}

}  // namespace detail

/// One vector per text, each of spec.dim. hash_local is pure and
/// deterministic; remote_api consults the shared content-addressed cache and
/// writes fetched vectors through it before use.
inline std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts,
                                                const EmbedderSpec& spec,
                                                const ResponseCache* cache = nullptr,
                                                int batch_size = 64) {
    for (const auto& t : texts) {
        if (t.empty()) throw Error("embed_batch: empty string in batch");
    }
    std::vector<EmbeddingVector> out;
    switch (spec.backend) {
        case EmbedderBackend::hash_local:
            out.reserve(texts.size());
            for (const auto& t : texts) out.push_back(hash_embed(t, spec.dim, spec.ngram));
            break;
        case EmbedderBackend::remote_api:
            out = detail::remote_embed(texts, spec, cache, batch_size);
            break;
        case EmbedderBackend::tfidf:
            // tf-idf vectors only exist relative to a fitted vocabulary; that
            // path lives with the keyword baseline, not behind this interface
            throw Error("embed_batch: the tfidf backend requires a fitted model; rank with the "
                        "keyword baseline instead");
    }
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].dim() != static_cast<size_t>(spec.dim)) {
            throw Error("embedding for text " + std::to_string(i) + " has dim " +
                        std::to_string(out[i].dim()) + ", spec says " + std::to_string(spec.dim));
        }
        if (!out[i].finite()) {
            throw Error("embedding for text " + std::to_string(i) + " has non-finite values");
        }
    }
    return out;
}

inline EmbeddingVector embed_one(const std::string& text, const EmbedderSpec& spec,
                                 const ResponseCache* cache = nullptr) {
    return embed_batch({text}, spec, cache).front();
}

}  // namespace mdiag
