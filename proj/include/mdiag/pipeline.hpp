#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdiag/cache.hpp"
#include "mdiag/corpus.hpp"
#include "mdiag/embedding.hpp"
#include "mdiag/metrics.hpp"
#include "mdiag/retrieval.hpp"
#include "mdiag/stages.hpp"
#include "mdiag/tfidf.hpp"

namespace mdiag {

enum class Method {
    full_pipeline,
    embed_only_dialogue,
    tfidf_baseline,
    zero_shot_classification,
};

inline std::string method_to_string(Method m) {
    switch (m) {
        case Method::full_pipeline: return "full_pipeline";
        case Method::embed_only_dialogue: return "embed_only_dialogue";
        case Method::tfidf_baseline: return "tfidf_baseline";
        case Method::zero_shot_classification: return "zero_shot_classification";
    }
    throw Error("unknown method enum value");
}

inline Method method_from_string(const std::string& s) {
    if (s == "full_pipeline") return Method::full_pipeline;
    if (s == "embed_only_dialogue") return Method::embed_only_dialogue;
    if (s == "tfidf_baseline") return Method::tfidf_baseline;
    if (s == "zero_shot_classification") return Method::zero_shot_classification;
    throw Error("unknown method name: " + s);
}

struct RunConfig {
    std::string name;
    Method method = Method::full_pipeline;
    bool use_generation = true;
    bool use_rerank = true;
    StrategyName strategy = StrategyName::with_examples;
    EmbedderSpec embedder;
    std::string gen_backend;
    std::string rerank_backend;
    int k = 10;
    uint64_t seed = 0;
    std::string split = "test";
    bool tfidf_fit_on_train_dialogues = false;

    /// The stage toggles only mean something for the full pipeline; every
    /// baseline runs with both off so two configs that differ only in
    /// irrelevant toggles resolve to the same fingerprint.
    void normalize() {
        if (method == Method::full_pipeline) {
            if (!use_generation) gen_backend.clear();
            if (!use_rerank) rerank_backend.clear();
        } else {
            use_generation = false;
            use_rerank = false;
            rerank_backend.clear();
            // zero-shot still talks to a chat model, everything else is local
            if (method != Method::zero_shot_classification) gen_backend.clear();
        }
        if (method != Method::tfidf_baseline) tfidf_fit_on_train_dialogues = false;
    }

    void validate() const {
        if (name.empty()) throw Error("run config needs a non-empty name");
        if (k < 1) throw Error("run " + name + ": k must be >= 1");
        if (split != "train" && split != "valid" && split != "test")
            throw Error("run " + name + ": split must be train, valid or test");
        if (method == Method::full_pipeline) {
            if (use_generation && gen_backend.empty())
                throw Error("run " + name + ": generation is on but gen_backend is empty");
            if (use_rerank && rerank_backend.empty())
                throw Error("run " + name + ": rerank is on but rerank_backend is empty");
        }
        if (method == Method::zero_shot_classification && gen_backend.empty())
            throw Error("run " + name + ": zero-shot classification needs gen_backend");
    }
};

inline nlohmann::json embedder_to_json(const EmbedderSpec& e) {
    return nlohmann::json{{"backend", embedder_backend_name(e.backend)},
                          {"dim", e.dim},
                          {"model", e.model},
                          {"endpoint", e.endpoint},
                          {"ngram", e.ngram}};
}

inline EmbedderSpec embedder_from_json(const nlohmann::json& j) {
    EmbedderSpec e;
    if (j.contains("backend")) e.backend = embedder_backend_from_name(j.at("backend"));
    e.dim = j.value("dim", e.dim);
    e.model = j.value("model", e.model);
    e.endpoint = j.value("endpoint", e.endpoint);
    e.ngram = j.value("ngram", e.ngram);
    return e;
}

/// Fully resolved config with every default materialized. nlohmann objects
/// keep keys sorted, so dumping this is canonical.
inline nlohmann::json config_to_json(const RunConfig& c) {
    return nlohmann::json{{"name", c.name},
                          {"method", method_to_string(c.method)},
                          {"use_generation", c.use_generation},
                          {"use_rerank", c.use_rerank},
                          {"strategy", strategy_to_string(c.strategy)},
                          {"embedder", embedder_to_json(c.embedder)},
                          {"gen_backend", c.gen_backend},
                          {"rerank_backend", c.rerank_backend},
                          {"k", c.k},
                          {"seed", c.seed},
                          {"split", c.split},
                          {"tfidf_fit_on_train_dialogues", c.tfidf_fit_on_train_dialogues}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.name = j.at("name").get<std::string>();
    c.method = method_from_string(j.at("method").get<std::string>());
    c.use_generation = j.value("use_generation", c.use_generation);
    c.use_rerank = j.value("use_rerank", c.use_rerank);
    if (j.contains("strategy")) c.strategy = strategy_from_string(j.at("strategy"));
    if (j.contains("embedder")) c.embedder = embedder_from_json(j.at("embedder"));
    c.gen_backend = j.value("gen_backend", c.gen_backend);
    c.rerank_backend = j.value("rerank_backend", c.rerank_backend);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    c.split = j.value("split", c.split);
    c.tfidf_fit_on_train_dialogues =
        j.value("tfidf_fit_on_train_dialogues", c.tfidf_fit_on_train_dialogues);
    return c;
}

inline std::string config_fingerprint(const RunConfig& resolved) {
    return detail::sha256_hex(config_to_json(resolved).dump());
}

struct PointRecord {
    std::string point_id;
    std::optional<int> true_rank;
    std::optional<double> hypothesis_cosine;
    std::string hypothesis;
    int hypothesis_words = 0;
    bool empty_hypothesis = false;
    bool rerank_fallback = false;
    bool zero_shot_fallback = false;
};

struct RunArtifact {
    std::string fingerprint;
    RunConfig config;
    MetricSummary summary;
    std::vector<PointRecord> records;

    std::string template_version;
    int catalog_size = 0;
    int penalty_rank = 0;
    std::optional<int> rerank_candidate_count;  // pre-rerank hits inside top-k
    size_t empty_hypotheses = 0;
    size_t rerank_fallbacks = 0;
    size_t zero_shot_fallbacks = 0;
};

class BackendRegistry {
public:
    void add(const BackendHandle& backend) {
        if (!backend) throw Error("cannot register a null backend");
        const std::string id = backend->id();
        if (backends_.count(id)) throw Error("backend id already registered: " + id);
        backends_[id] = backend;
    }

    BackendHandle resolve(const std::string& id) const {
        auto it = backends_.find(id);
        if (it != backends_.end()) return it->second;
        // remote:<model> can be constructed on sight; everything else has
        // to be registered up front.
        const std::string prefix = "remote:";
        if (id.rfind(prefix, 0) == 0 && id.size() > prefix.size()) {
            return std::make_shared<RemoteChatBackend>(id.substr(prefix.size()), HttpConfig{});
        }
        throw Error("unknown chat backend id: " + id);
    }

private:
    std::map<std::string, BackendHandle> backends_;
};

struct RunDeps {
    const BackendRegistry* registry = nullptr;
    const ResponseCache* cache = nullptr;
    int parallelism = 1;
};

namespace detail {

template <typename Fn>
inline void parallel_for(size_t n, int parallelism, Fn&& fn) {
    if (n == 0) return;
    size_t threads = static_cast<size_t>(std::max(1, parallelism));
    threads = std::min(threads, n);
    if (threads == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::optional<std::pair<size_t, std::string>> first_err;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!first_err || i < first_err->first) first_err = {{i, e.what()}};
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_err) {
        throw Error("item " + std::to_string(first_err->first) + " failed: " + first_err->second);
    }
}

inline void check_split_integrity(const Corpus& corpus, const SplitAssignment& split) {
    for (int id : split.train) {
        if (split.valid.count(id) || split.test.count(id))
            throw Error("split leakage: label " + std::to_string(id) + " is in several splits");
    }
    for (int id : split.valid) {
        if (split.test.count(id))
            throw Error("split leakage: label " + std::to_string(id) + " is in several splits");
    }
    for (const auto& p : corpus.points) {
        const int m = p.misconception_id;
        const int hits = static_cast<int>(split.train.count(m)) +
                         static_cast<int>(split.valid.count(m)) +
                         static_cast<int>(split.test.count(m));
        if (hits != 1)
            throw Error("point " + p.id + ": label " + std::to_string(m) +
                        " is covered by " + std::to_string(hits) + " splits, expected 1");
    }
}

}  // namespace detail

/// Executes one configuration over the chosen split and freezes everything
/// needed to reproduce the numbers. Records carry no timing or cache-state
/// fields, so artifacts from a cold and a warm run are byte-identical.
inline RunArtifact run(const RunConfig& config_in, const Corpus& corpus,
                       const SplitAssignment& split, const RunDeps& deps) {
    RunConfig cfg = config_in;
    cfg.normalize();
    cfg.validate();
    detail::check_split_integrity(corpus, split);

    const std::set<int>& eval_labels = split.labels_of(cfg.split);
    std::vector<const DialoguePoint*> eval_points;
    for (const auto& p : corpus.points) {
        if (eval_labels.count(p.misconception_id)) eval_points.push_back(&p);
    }
    if (eval_points.empty())
        throw Error("run " + cfg.name + ": split '" + cfg.split + "' selects no points");

    const LabelCatalog& catalog = corpus.catalog;
    const ResponseCache* cache = deps.cache;

    BackendHandle gen, rerank;
    if (!cfg.gen_backend.empty()) {
        if (!deps.registry) throw Error("run " + cfg.name + ": no backend registry supplied");
        gen = deps.registry->resolve(cfg.gen_backend);
    }
    if (!cfg.rerank_backend.empty()) {
        if (!deps.registry) throw Error("run " + cfg.name + ": no backend registry supplied");
        rerank = deps.registry->resolve(cfg.rerank_backend);
    }

    const bool needs_index =
        cfg.method == Method::full_pipeline || cfg.method == Method::embed_only_dialogue;
    LabelIndex index;
    if (needs_index) index = build_index(catalog, cfg.embedder, cache);

    TfIdfModel tfidf;
    if (cfg.method == Method::tfidf_baseline) {
        std::vector<DialoguePoint> fit_dialogues;
        if (cfg.tfidf_fit_on_train_dialogues) {
            for (const auto& p : corpus.points) {
                if (split.train.count(p.misconception_id)) fit_dialogues.push_back(p);
            }
            // Evaluation dialogues must stay out of the fitting corpus;
            // disjoint splits make train-only fitting safe for valid/test.
            if (cfg.split == "train")
                throw Error("run " + cfg.name +
                            ": cannot fit tf-idf on train dialogues and evaluate on train");
        }
        tfidf = tfidf_fit_on_catalog(catalog,
                                     cfg.tfidf_fit_on_train_dialogues ? &fit_dialogues : nullptr);
    }

    const PromptStrategy strategy = PromptStrategy::make(cfg.strategy);
    const size_t n = eval_points.size();
    std::vector<PointRecord> records(n);
    std::vector<std::optional<int>> pre_rerank_rank(n);

    detail::parallel_for(n, deps.parallelism, [&](size_t i) {
        const DialoguePoint& point = *eval_points[i];
        PointRecord rec;
        rec.point_id = point.id;

        switch (cfg.method) {
            case Method::full_pipeline: {
                std::string query_text;
                if (cfg.use_generation) {
                    auto hyp = generate_hypothesis(point, strategy, gen, cache);
                    if (!hyp) {
                        // nothing usable came back; the point scores as a
                        // total miss instead of aborting the run
                        rec.empty_hypothesis = true;
                        records[i] = rec;
                        return;
                    }
                    rec.hypothesis = hyp->text;
                    rec.hypothesis_words = hyp->word_count;
                    query_text = hyp->text;
                } else {
                    query_text = serialize_dialogue(point);
                }
                const EmbeddingVector qvec = embed_one(query_text, cfg.embedder, cache);
                RankedList ranked = rank_all(qvec, index, point.id);
                ranked.derive_true_rank(point.misconception_id);
                if (cfg.use_generation) {
                    rec.hypothesis_cosine = cosine_similarity(
                        qvec, index.vectors[static_cast<size_t>(point.misconception_id)]);
                }
                pre_rerank_rank[i] = ranked.true_rank;
                if (cfg.use_rerank) {
                    RerankOutcome outcome;
                    ranked = rerank_top_k(ranked, query_text, cfg.k, catalog, rerank, cache,
                                          &outcome);
                    rec.rerank_fallback = outcome.fallback_used;
                }
                rec.true_rank = ranked.true_rank;
                break;
            }
            case Method::embed_only_dialogue: {
                RankedList ranked = direct_embedding_baseline(point, index, cfg.embedder, cache);
                rec.true_rank = ranked.true_rank;
                break;
            }
            case Method::tfidf_baseline: {
                RankedList ranked = tfidf_rank(point, tfidf, catalog);
                rec.true_rank = ranked.true_rank;
                break;
            }
            case Method::zero_shot_classification: {
                ZeroShotOutcome out = zero_shot_classify(point, catalog, gen, cache, cfg.k);
                rec.zero_shot_fallback = !out.parsed_ok;
                rec.true_rank = out.ranking.true_rank;
                break;
            }
        }
        records[i] = rec;
    });

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return records[a].point_id < records[b].point_id;
    });

    RunArtifact art;
    art.config = cfg;
    art.fingerprint = config_fingerprint(cfg);
    art.template_version = kPromptTemplateVersion;
    art.catalog_size = catalog.size();
    art.penalty_rank = catalog.size();

    std::vector<RankRecord> rank_records;
    rank_records.reserve(n);
    int candidates = 0;
    for (size_t idx : order) {
        const PointRecord& rec = records[idx];
        art.records.push_back(rec);
        rank_records.push_back(RankRecord{rec.point_id, rec.true_rank, rec.hypothesis_cosine});
        art.empty_hypotheses += rec.empty_hypothesis ? 1 : 0;
        art.rerank_fallbacks += rec.rerank_fallback ? 1 : 0;
        art.zero_shot_fallbacks += rec.zero_shot_fallback ? 1 : 0;
        if (pre_rerank_rank[idx] && *pre_rerank_rank[idx] <= cfg.k) ++candidates;
    }
    if (cfg.use_rerank) art.rerank_candidate_count = candidates;

    std::vector<int> ks = {1, 3, 10};
    ks.push_back(cfg.k);
    art.summary = summarize(rank_records, art.penalty_rank, ks);
    return art;
}

inline nlohmann::json summary_to_json(const MetricSummary& s) {
    nlohmann::json map_j = nlohmann::json::object();
    nlohmann::json rec_j = nlohmann::json::object();
    for (const auto& [k, v] : s.map_at_k) map_j[std::to_string(k)] = v;
    for (const auto& [k, v] : s.recall_at_k) rec_j[std::to_string(k)] = v;
    nlohmann::json j{{"n", s.n},
                     {"map_at_k", map_j},
                     {"ndcg", s.ndcg},
                     {"recall_at_k", rec_j},
                     {"mean_rank", s.mean_rank},
                     {"median_rank", s.median_rank},
                     {"k_values", s.k_values}};
    j["mean_hypothesis_cosine"] =
        s.mean_hypothesis_cosine ? nlohmann::json(*s.mean_hypothesis_cosine) : nlohmann::json();
    return j;
}

inline MetricSummary summary_from_json(const nlohmann::json& j) {
    MetricSummary s;
    s.n = j.at("n").get<size_t>();
    for (const auto& [k, v] : j.at("map_at_k").items()) s.map_at_k[std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("recall_at_k").items())
        s.recall_at_k[std::stoi(k)] = v.get<double>();
    s.ndcg = j.at("ndcg").get<double>();
    s.mean_rank = j.at("mean_rank").get<double>();
    s.median_rank = j.at("median_rank").get<double>();
    s.k_values = j.at("k_values").get<std::vector<int>>();
    if (j.contains("mean_hypothesis_cosine") && !j.at("mean_hypothesis_cosine").is_null())
        s.mean_hypothesis_cosine = j.at("mean_hypothesis_cosine").get<double>();
    return s;
}

inline nlohmann::json artifact_to_json(const RunArtifact& a) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : a.records) {
        nlohmann::json rj{{"point_id", r.point_id},
                          {"hypothesis", r.hypothesis},
                          {"hypothesis_words", r.hypothesis_words},
                          {"empty_hypothesis", r.empty_hypothesis},
                          {"rerank_fallback", r.rerank_fallback},
                          {"zero_shot_fallback", r.zero_shot_fallback}};
        rj["true_rank"] = r.true_rank ? nlohmann::json(*r.true_rank) : nlohmann::json();
        rj["hypothesis_cosine"] =
            r.hypothesis_cosine ? nlohmann::json(*r.hypothesis_cosine) : nlohmann::json();
        records.push_back(rj);
    }
    nlohmann::json metadata{{"template_version", a.template_version},
                            {"catalog_size", a.catalog_size},
                            {"penalty_rank", a.penalty_rank},
                            {"tie_break", "score desc, label id asc"},
                            {"defaults",
                             {{"generation_max_tokens", 256},
                              {"rerank_max_tokens", 128},
                              {"zero_shot_max_tokens", 512},
                              {"temperature", 0.0}}},
                            {"flagged",
                             {{"empty_hypothesis", a.empty_hypotheses},
                              {"rerank_fallback", a.rerank_fallbacks},
                              {"zero_shot_fallback", a.zero_shot_fallbacks}}}};
    metadata["rerank_candidate_count"] =
        a.rerank_candidate_count ? nlohmann::json(*a.rerank_candidate_count) : nlohmann::json();
    return nlohmann::json{{"fingerprint", a.fingerprint},
                          {"config", config_to_json(a.config)},
                          {"metadata", metadata},
                          {"summary", summary_to_json(a.summary)},
                          {"records", records}};
}

inline RunArtifact artifact_from_json(const nlohmann::json& j) {
    RunArtifact a;
    a.fingerprint = j.at("fingerprint").get<std::string>();
    a.config = config_from_json(j.at("config"));
    a.summary = summary_from_json(j.at("summary"));
    const auto& meta = j.at("metadata");
    a.template_version = meta.at("template_version").get<std::string>();
    a.catalog_size = meta.at("catalog_size").get<int>();
    a.penalty_rank = meta.at("penalty_rank").get<int>();
    if (!meta.at("rerank_candidate_count").is_null())
        a.rerank_candidate_count = meta.at("rerank_candidate_count").get<int>();
    a.empty_hypotheses = meta.at("flagged").at("empty_hypothesis").get<size_t>();
    a.rerank_fallbacks = meta.at("flagged").at("rerank_fallback").get<size_t>();
    a.zero_shot_fallbacks = meta.at("flagged").at("zero_shot_fallback").get<size_t>();
    for (const auto& rj : j.at("records")) {
        PointRecord r;
        r.point_id = rj.at("point_id").get<std::string>();
        if (!rj.at("true_rank").is_null()) r.true_rank = rj.at("true_rank").get<int>();
        if (!rj.at("hypothesis_cosine").is_null())
            r.hypothesis_cosine = rj.at("hypothesis_cosine").get<double>();
        r.hypothesis = rj.at("hypothesis").get<std::string>();
        r.hypothesis_words = rj.at("hypothesis_words").get<int>();
        r.empty_hypothesis = rj.at("empty_hypothesis").get<bool>();
        r.rerank_fallback = rj.at("rerank_fallback").get<bool>();
        r.zero_shot_fallback = rj.at("zero_shot_fallback").get<bool>();
        a.records.push_back(r);
    }
    return a;
}

inline void save_artifact(const RunArtifact& a, const std::filesystem::path& path) {
    detail::atomic_write_file(path, artifact_to_json(a).dump(2) + "\n");
}

inline RunArtifact load_artifact(const std::filesystem::path& path) {
    try {
        return artifact_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad run artifact " + path.string() + ": " + e.what());
    }
}

/// Runs each config in order against the same corpus, split and cache.
/// Sequential on purpose: within-run parallelism already saturates the
/// workers, and ordered execution keeps log output attributable.
inline std::vector<RunArtifact> run_matrix(const std::vector<RunConfig>& configs,
                                           const Corpus& corpus, const SplitAssignment& split,
                                           const RunDeps& deps) {
    if (configs.empty()) throw Error("run matrix needs at least one config");
    std::set<std::string> names;
    for (const auto& c : configs) {
        if (!names.insert(c.name).second) throw Error("duplicate run name: " + c.name);
    }
    std::vector<RunArtifact> out;
    out.reserve(configs.size());
    for (const auto& c : configs) out.push_back(run(c, corpus, split, deps));
    return out;
}

inline nlohmann::json matrix_to_json(const std::vector<RunArtifact>& artifacts) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& a : artifacts) runs.push_back(artifact_to_json(a));
    return nlohmann::json{{"runs", runs}};
}

inline std::vector<RunArtifact> matrix_from_json(const nlohmann::json& j) {
    std::vector<RunArtifact> out;
    for (const auto& a : j.at("runs")) out.push_back(artifact_from_json(a));
    return out;
}

namespace detail {

// Shortest round-trip decimal form, same as the JSON reports use.
inline std::string number_cell(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

/// Long-form rows, one metric per line: config,metric,value. Row order is
/// config order then a fixed metric order, so equal inputs give equal bytes.
inline std::string matrix_to_csv(const std::vector<RunArtifact>& artifacts) {
    std::string csv = "config,metric,value\n";
    for (const auto& a : artifacts) {
        const MetricSummary& s = a.summary;
        auto row = [&](const std::string& metric, const std::string& value) {
            csv += a.config.name + "," + metric + "," + value + "\n";
        };
        row("n", std::to_string(s.n));
        for (const auto& [k, v] : s.map_at_k) row("map@" + std::to_string(k), detail::number_cell(v));
        row("ndcg", detail::number_cell(s.ndcg));
        for (const auto& [k, v] : s.recall_at_k)
            row("recall@" + std::to_string(k), detail::number_cell(v));
        row("mean_rank", detail::number_cell(s.mean_rank));
        row("median_rank", detail::number_cell(s.median_rank));
        if (s.mean_hypothesis_cosine)
            row("mean_hypothesis_cosine", detail::number_cell(*s.mean_hypothesis_cosine));
    }
    return csv;
}

/// Wide table for humans, one config per row. Columns are the union of the
/// runs' k values; a metric a run never computed renders as a blank cell.
inline std::string matrix_to_markdown(const std::vector<RunArtifact>& artifacts) {
    std::set<int> ks;
    bool any_cosine = false;
    for (const auto& a : artifacts) {
        ks.insert(a.summary.k_values.begin(), a.summary.k_values.end());
        any_cosine = any_cosine || a.summary.mean_hypothesis_cosine.has_value();
    }
    std::vector<std::string> cols = {"config", "n"};
    for (int k : ks) cols.push_back("map@" + std::to_string(k));
    cols.push_back("ndcg");
    for (int k : ks) cols.push_back("recall@" + std::to_string(k));
    cols.push_back("mean_rank");
    cols.push_back("median_rank");
    if (any_cosine) cols.push_back("mean_cosine");

    std::string md = "|";
    for (const auto& c : cols) md += " " + c + " |";
    md += "\n|";
    for (const auto& c : cols) md += std::string(c.size() + 2, '-') + "|";
    md += "\n";
    for (const auto& a : artifacts) {
        const MetricSummary& s = a.summary;
        md += "| " + a.config.name + " | " + std::to_string(s.n) + " |";
        for (int k : ks) {
            auto it = s.map_at_k.find(k);
            md += it == s.map_at_k.end() ? " |" : " " + detail::number_cell(it->second) + " |";
        }
        md += " " + detail::number_cell(s.ndcg) + " |";
        for (int k : ks) {
            auto it = s.recall_at_k.find(k);
            md += it == s.recall_at_k.end() ? " |" : " " + detail::number_cell(it->second) + " |";
        }
        md += " " + detail::number_cell(s.mean_rank) + " |";
        md += " " + detail::number_cell(s.median_rank) + " |";
        if (any_cosine) {
            md += s.mean_hypothesis_cosine
                      ? " " + detail::number_cell(*s.mean_hypothesis_cosine) + " |"
                      : " |";
        }
        md += "\n";
    }
    return md;
}

}  // namespace mdiag
