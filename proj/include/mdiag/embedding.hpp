#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdiag/common.hpp"

namespace mdiag {

struct EmbeddingVector {
    std::vector<double> values;

    size_t dim() const { return values.size(); }

    double norm() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }

    bool finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    /// Scales to unit L2 norm. The zero vector has no direction and is an error.
    void normalize() {
        double n = norm();
        if (n == 0.0) throw Error("cannot normalize a zero-norm vector");
        for (double& v : values) v /= n;
    }

    bool operator==(const EmbeddingVector&) const = default;
};

/// dot(a,b) / (|a| |b|). Dimension mismatch and zero-norm inputs are errors;
/// zero-norm similarity is undefined, not 0.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error("cosine: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error("cosine: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Bag of hashed word n-grams (all n in [1, ngram]), counted into dim
/// buckets and L2-normalized. Deterministic across platforms.
inline EmbeddingVector hash_embed(const std::string& text, int dim, int ngram) {
    if (dim < 8) throw Error("hash_embed: dim must be >= 8");
    if (ngram < 1) throw Error("hash_embed: ngram must be >= 1");
    auto tokens = detail::tokenize_alnum(text);
    if (tokens.empty()) throw Error("hash_embed: text has no tokens");

    EmbeddingVector v;
    v.values.assign(static_cast<size_t>(dim), 0.0);
    for (int n = 1; n <= ngram; ++n) {
        for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int j = 1; j < n; ++j) {
                gram += ' ';
                gram += tokens[i + static_cast<size_t>(j)];
            }
            v.values[detail::fnv1a64(gram) % static_cast<uint64_t>(dim)] += 1.0;
        }
    }
    v.normalize();
    return v;
}

enum class EmbedderBackend { remote_api, hash_local, tfidf };

inline std::string embedder_backend_name(EmbedderBackend b) {
    switch (b) {
        case EmbedderBackend::remote_api: return "remote_api";
        case EmbedderBackend::hash_local: return "hash_local";
        case EmbedderBackend::tfidf: return "tfidf";
    }
    throw Error("bad embedder backend enum");
}

inline EmbedderBackend embedder_backend_from_name(const std::string& s) {
    if (s == "remote_api") return EmbedderBackend::remote_api;
    if (s == "hash_local") return EmbedderBackend::hash_local;
    if (s == "tfidf") return EmbedderBackend::tfidf;
    throw Error("unknown embedder backend: " + s);
}

struct EmbedderSpec {
    EmbedderBackend backend = EmbedderBackend::hash_local;
    int dim = 256;                       // remote_api default is 384
    std::string model = "MiniLM-L6-v2";  // remote_api only, config default
    std::string endpoint;                // remote_api; falls back to EMBED_API_BASE
    int ngram = 2;                       // hash_local only

    static EmbedderSpec hash_local_default() { return EmbedderSpec{}; }

    static EmbedderSpec remote_default() {
        EmbedderSpec s;
        s.backend = EmbedderBackend::remote_api;
        s.dim = 384;
        return s;
    }

    /// Identifies the vector space; indexes reject queries from another.
    std::string fingerprint() const {
        switch (backend) {
            case EmbedderBackend::hash_local:
                return "hash_local:dim=" + std::to_string(dim) + ":ngram=" + std::to_string(ngram);
            case EmbedderBackend::remote_api:
                return "remote_api:model=" + model + ":dim=" + std::to_string(dim);
            case EmbedderBackend::tfidf:
                return "tfidf:dim=" + std::to_string(dim);
        }
        throw Error("bad embedder backend enum");
    }
};

}  // namespace mdiag
