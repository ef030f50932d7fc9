#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "mdiag/corpus.hpp"
#include "mdiag/retrieval.hpp"
#include "mdiag/serialize.hpp"

namespace mdiag {

/// Smoothed tf-idf: idf(t) = ln((1+N)/(1+df(t))) + 1 over lowercase
/// alphanumeric tokens, raw term counts, L2-normalized document vectors.
struct TfIdfModel {
    std::map<std::string, int> vocabulary;  // token -> dense index
    std::vector<double> idf;
    int n_docs = 0;

    std::vector<double> vectorize(const std::string& text) const {
        std::vector<double> v(idf.size(), 0.0);
        for (const auto& tok : detail::tokenize_alnum(text)) {
            auto it = vocabulary.find(tok);
            if (it != vocabulary.end()) v[static_cast<size_t>(it->second)] += 1.0;
        }
        double norm2 = 0.0;
        for (size_t i = 0; i < v.size(); ++i) {
            v[i] *= idf[i];
            norm2 += v[i] * v[i];
        }
        if (norm2 > 0.0) {
            double norm = std::sqrt(norm2);
            for (double& x : v) x /= norm;
        }
        return v;  // all-zero when every token is out of vocabulary
    }
};

inline TfIdfModel tfidf_fit(const std::vector<std::string>& documents) {
    if (documents.empty()) throw Error("tfidf_fit: no documents");
    std::map<std::string, int> df;
    bool any_tokens = false;
    for (const auto& doc : documents) {
        auto tokens = detail::tokenize_alnum(doc);
        if (!tokens.empty()) any_tokens = true;
        std::sort(tokens.begin(), tokens.end());
        tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
        for (const auto& t : tokens) df[t]++;
    }
    if (!any_tokens) throw Error("tfidf_fit: all documents are empty");

    TfIdfModel model;
    model.n_docs = static_cast<int>(documents.size());
    model.idf.reserve(df.size());
    for (const auto& [token, count] : df) {
        model.vocabulary.emplace(token, static_cast<int>(model.idf.size()));
        model.idf.push_back(std::log((1.0 + model.n_docs) / (1.0 + count)) + 1.0);
    }
    return model;
}

/// Keyword-overlap ranking of the catalog against the point's dialogue
/// text. A query with no in-vocabulary token scores 0 everywhere and the
/// ordering falls back to ascending label id.
inline RankedList tfidf_rank(const DialoguePoint& point, const TfIdfModel& model,
                             const LabelCatalog& catalog) {
    std::vector<double> query = model.vectorize(serialize_dialogue(point));

    const int n = catalog.size();
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    bool query_zero = std::all_of(query.begin(), query.end(), [](double x) { return x == 0.0; });
    if (!query_zero) {
        for (int id = 0; id < n; ++id) {
            std::vector<double> label_vec = model.vectorize(catalog.text(id));
            double dot = 0.0;
            for (size_t i = 0; i < query.size(); ++i) dot += query[i] * label_vec[i];
            scores[static_cast<size_t>(id)] = dot;  // both sides unit norm (or zero)
        }
    }

    RankedList out;
    out.point_id = point.id;
    out.ordering.resize(static_cast<size_t>(n));
    std::iota(out.ordering.begin(), out.ordering.end(), 0);
    std::sort(out.ordering.begin(), out.ordering.end(), [&](int a, int b) {
        double sa = scores[static_cast<size_t>(a)], sb = scores[static_cast<size_t>(b)];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    std::vector<double> sorted(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        sorted[static_cast<size_t>(i)] = scores[static_cast<size_t>(out.ordering[static_cast<size_t>(i)])];
    }
    out.scores = std::move(sorted);
    out.derive_true_rank(point.misconception_id);
    return out;
}

/// Default fit corpus for the keyword baseline: the label texts themselves.
/// Training dialogues can be appended when configured.
inline TfIdfModel tfidf_fit_on_catalog(const LabelCatalog& catalog,
                                       const std::vector<DialoguePoint>* extra_dialogues = nullptr) {
    std::vector<std::string> docs = catalog.texts();
    if (extra_dialogues) {
        for (const auto& p : *extra_dialogues) docs.push_back(serialize_dialogue(p));
    }
    return tfidf_fit(docs);
}

}  // namespace mdiag
