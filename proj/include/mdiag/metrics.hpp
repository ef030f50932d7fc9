#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mdiag/common.hpp"

namespace mdiag {

/// Evaluation row for one data point. true_rank is the 1-based position of
/// the correct label in the final ordering; absent means the ranker never
/// produced it (scored as a miss, or as the penalty rank for rank means).
struct RankRecord {
    std::string point_id;
    std::optional<int> true_rank;
    std::optional<double> hypothesis_cosine;
};

namespace detail {

inline void check_records(const std::vector<RankRecord>& records) {
    if (records.empty()) throw Error("metrics need at least one record");
    for (const auto& r : records) {
        if (r.true_rank && *r.true_rank < 1)
            throw Error("record " + r.point_id + " has non-positive rank");
    }
}

}  // namespace detail

// With exactly one relevant label per point, average precision reduces to
// 1/rank when the hit lands inside the cutoff and 0 otherwise.
inline double map_at_k(const std::vector<RankRecord>& records, int k) {
    detail::check_records(records);
    if (k < 1) throw Error("map_at_k needs k >= 1");
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.true_rank && *r.true_rank <= k) sum += 1.0 / static_cast<double>(*r.true_rank);
    }
    return sum / static_cast<double>(records.size());
}

// Single-relevant NDCG: ideal DCG is 1, so each point contributes
// 1/log2(rank + 1); a missing rank contributes nothing.
inline double ndcg(const std::vector<RankRecord>& records) {
    detail::check_records(records);
    double sum = 0.0;
    for (const auto& r : records) {
        if (r.true_rank) sum += 1.0 / std::log2(static_cast<double>(*r.true_rank) + 1.0);
    }
    return sum / static_cast<double>(records.size());
}

inline double recall_at_k(const std::vector<RankRecord>& records, int k) {
    detail::check_records(records);
    if (k < 1) throw Error("recall_at_k needs k >= 1");
    double hits = 0.0;
    for (const auto& r : records) {
        if (r.true_rank && *r.true_rank <= k) hits += 1.0;
    }
    return hits / static_cast<double>(records.size());
}

namespace detail {

inline std::vector<double> effective_ranks(const std::vector<RankRecord>& records, int penalty) {
    if (penalty < 1) throw Error("penalty rank must be >= 1");
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(r.true_rank ? static_cast<double>(*r.true_rank)
                                  : static_cast<double>(penalty));
    return out;
}

}  // namespace detail

/// penalty stands in for an absent rank; pass the catalog size so a total
/// miss counts as landing at the bottom of the list.
inline double mean_rank(const std::vector<RankRecord>& records, int penalty) {
    detail::check_records(records);
    const auto ranks = detail::effective_ranks(records, penalty);
    double sum = 0.0;
    for (double v : ranks) sum += v;
    return sum / static_cast<double>(ranks.size());
}

inline double median_rank(const std::vector<RankRecord>& records, int penalty) {
    detail::check_records(records);
    auto ranks = detail::effective_ranks(records, penalty);
    std::sort(ranks.begin(), ranks.end());
    const size_t n = ranks.size();
    if (n % 2 == 1) return ranks[n / 2];
    return (ranks[n / 2 - 1] + ranks[n / 2]) / 2.0;
}

struct MetricSummary {
    size_t n = 0;
    std::map<int, double> map_at_k;
    double ndcg = 0.0;
    std::map<int, double> recall_at_k;
    double mean_rank = 0.0;
    double median_rank = 0.0;
    std::optional<double> mean_hypothesis_cosine;
    std::vector<int> k_values;
};

inline MetricSummary summarize(const std::vector<RankRecord>& records, int penalty,
                               std::vector<int> k_values = {1, 3, 10}) {
    detail::check_records(records);
    if (k_values.empty()) throw Error("summarize needs at least one k value");
    std::sort(k_values.begin(), k_values.end());
    k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());
    if (k_values.front() < 1) throw Error("k values must be >= 1");

    MetricSummary s;
    s.n = records.size();
    s.k_values = k_values;
    for (int k : k_values) {
        s.map_at_k[k] = map_at_k(records, k);
        s.recall_at_k[k] = recall_at_k(records, k);
    }
    s.ndcg = ndcg(records);
    s.mean_rank = mean_rank(records, penalty);
    s.median_rank = median_rank(records, penalty);

    double cos_sum = 0.0;
    size_t cos_n = 0;
    for (const auto& r : records) {
        if (r.hypothesis_cosine) {
            cos_sum += *r.hypothesis_cosine;
            ++cos_n;
        }
    }
    if (cos_n > 0) s.mean_hypothesis_cosine = cos_sum / static_cast<double>(cos_n);
    return s;
}

}  // namespace mdiag
