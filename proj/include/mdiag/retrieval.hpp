#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdiag/corpus.hpp"
#include "mdiag/embed_client.hpp"
#include "mdiag/embedding.hpp"
#include "mdiag/serialize.hpp"

namespace mdiag {

/// Final or intermediate ordering of label ids for one datapoint, best
/// first. scores parallels ordering until a rerank drops it. true_rank is
/// the 1-based position of the point's ground-truth label when known.
struct RankedList {
    std::string point_id;
    std::vector<int> ordering;
    std::optional<std::vector<double>> scores;
    std::optional<int> true_rank;

    void derive_true_rank(int misconception_id) {
        true_rank.reset();
        for (size_t i = 0; i < ordering.size(); ++i) {
            if (ordering[i] == misconception_id) {
                true_rank = static_cast<int>(i) + 1;
                return;
            }
        }
    }
};

/// One normalized vector per catalog label, tied to the embedder that
/// produced them via the spec fingerprint.
struct LabelIndex {
    std::string fingerprint;
    int dim = 0;
    std::vector<EmbeddingVector> vectors;  // position = label id

    int size() const { return static_cast<int>(vectors.size()); }
};

inline LabelIndex build_index(const LabelCatalog& catalog, const EmbedderSpec& spec,
                              const ResponseCache* cache = nullptr) {
    if (catalog.empty()) throw Error("cannot index an empty catalog");
    LabelIndex index;
    index.fingerprint = spec.fingerprint();
    index.dim = spec.dim;
    try {
        index.vectors = embed_batch(catalog.texts(), spec, cache);
    } catch (const Error& e) {
        throw Error(std::string("indexing labels failed: ") + e.what());
    }
    for (int id = 0; id < index.size(); ++id) {
        auto& v = index.vectors[static_cast<size_t>(id)];
        if (v.norm() == 0.0) {
            throw Error("label " + std::to_string(id) + " embedded to a zero vector");
        }
        v.normalize();  // at index time, for numeric stability
    }
    return index;
}

/// Full catalog permutation by descending cosine against the query.
/// Equal scores break toward the smaller label id, so orderings are
/// deterministic and seed-independent.
inline RankedList rank_all(const EmbeddingVector& query, const LabelIndex& index,
                           const std::string& point_id = "") {
    if (static_cast<int>(query.dim()) != index.dim) {
        throw Error("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                    std::to_string(index.dim));
    }
    const int n = index.size();
    std::vector<double> scores(static_cast<size_t>(n));
    for (int id = 0; id < n; ++id) {
        scores[static_cast<size_t>(id)] = cosine_similarity(query, index.vectors[static_cast<size_t>(id)]);
    }
    RankedList out;
    out.point_id = point_id;
    out.ordering.resize(static_cast<size_t>(n));
    std::iota(out.ordering.begin(), out.ordering.end(), 0);
    std::sort(out.ordering.begin(), out.ordering.end(), [&](int a, int b) {
        double sa = scores[static_cast<size_t>(a)], sb = scores[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    std::vector<double> sorted_scores(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        sorted_scores[static_cast<size_t>(i)] = scores[static_cast<size_t>(out.ordering[static_cast<size_t>(i)])];
    }
    out.scores = std::move(sorted_scores);
    return out;
}

/// Skips generation entirely: embeds the dialogue text and ranks the catalog.
inline RankedList direct_embedding_baseline(const DialoguePoint& point, const LabelIndex& index,
                                            const EmbedderSpec& spec,
                                            const ResponseCache* cache = nullptr) {
    if (spec.fingerprint() != index.fingerprint) {
        throw Error("embedder fingerprint \"" + spec.fingerprint() +
                    "\" does not match index fingerprint \"" + index.fingerprint + "\"");
    }
    EmbeddingVector query = embed_one(serialize_dialogue(point), spec, cache);
    RankedList out = rank_all(query, index, point.id);
    out.derive_true_rank(point.misconception_id);
    return out;
}

// ---------------------------------------------------------------------------
// Index persistence. JSON with nlohmann's shortest round-trip doubles, so
// reload is lossless.

inline nlohmann::json index_to_json(const LabelIndex& index) {
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto& v : index.vectors) vectors.push_back(v.values);
    return nlohmann::json{
        {"fingerprint", index.fingerprint}, {"dim", index.dim}, {"vectors", vectors}};
}

inline LabelIndex index_from_json(const nlohmann::json& j) {
    LabelIndex index;
    index.fingerprint = j.at("fingerprint").get<std::string>();
    index.dim = j.at("dim").get<int>();
    for (const auto& v : j.at("vectors")) {
        index.vectors.push_back(EmbeddingVector{v.get<std::vector<double>>()});
    }
    return index;
}

inline void save_index(const LabelIndex& index, const std::filesystem::path& path) {
    detail::atomic_write_file(path, index_to_json(index).dump() + "\n");
}

inline LabelIndex load_index(const std::filesystem::path& path) {
    try {
        return index_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad index file " + path.string() + ": " + e.what());
    }
}

}  // namespace mdiag
