#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdiag/cache.hpp"
#include "mdiag/corpus.hpp"
#include "mdiag/pipeline.hpp"
#include "mdiag/retrieval.hpp"

namespace {

mdiag::EmbedderSpec embedder_from_flags(const std::string& backend, int dim, int ngram,
                                        const std::string& model, const std::string& endpoint) {
    mdiag::EmbedderSpec spec;
    spec.backend = mdiag::embedder_backend_from_name(backend);
    spec.dim = dim;
    spec.ngram = ngram;
    if (!model.empty()) spec.model = model;
    spec.endpoint = endpoint;
    return spec;
}

std::shared_ptr<mdiag::ScriptedChatBackend> scripted_from_file(const std::string& id,
                                                               const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(mdiag::detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw mdiag::Error("bad scripted backend file " + path.string() + ": " + e.what());
    }
    auto backend = std::make_shared<mdiag::ScriptedChatBackend>(id);
    if (j.contains("exact")) {
        for (const auto& [prompt, response] : j.at("exact").items())
            backend->add_exact(prompt, response.get<std::string>());
    }
    if (j.contains("substring")) {
        for (const auto& [needle, response] : j.at("substring").items())
            backend->add_substring(needle, response.get<std::string>());
    }
    if (j.contains("default")) backend->set_default_response(j.at("default").get<std::string>());
    return backend;
}

// Instantiates every locally-served backend id the configs mention;
// remote:<model> ids resolve on demand inside the registry.
mdiag::BackendRegistry build_registry(const std::vector<mdiag::RunConfig>& configs,
                                      const mdiag::Corpus& corpus) {
    mdiag::BackendRegistry registry;
    auto oracle = std::make_shared<mdiag::ScriptedChatBackend>("oracle");
    bool oracle_used = false;
    bool identity_used = false;
    std::set<std::string> scripted_ids;

    for (const auto& c : configs) {
        for (const std::string& id : {c.gen_backend, c.rerank_backend}) {
            if (id == "oracle") oracle_used = true;
            if (id == "identity") identity_used = true;
            if (id.rfind("scripted:", 0) == 0) scripted_ids.insert(id);
        }
        if (c.gen_backend == "oracle") {
            mdiag::add_oracle_rules(*oracle, corpus.points, corpus.catalog,
                                    mdiag::PromptStrategy::make(c.strategy), c.k);
        }
    }
    if (oracle_used) {
        oracle->add_dynamic(mdiag::identity_rerank_rule());
        registry.add(oracle);
    }
    if (identity_used) registry.add(mdiag::make_identity_rerank_backend());
    for (const auto& id : scripted_ids) {
        registry.add(scripted_from_file(id, id.substr(std::string("scripted:").size())));
    }
    return registry;
}

std::vector<mdiag::RunConfig> configs_from_file(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(mdiag::detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw mdiag::Error("bad config file " + path.string() + ": " + e.what());
    }
    nlohmann::json list;
    if (j.is_array()) {
        list = j;
    } else if (j.contains("runs")) {
        list = j.at("runs");
    } else {
        list = nlohmann::json::array({j});  // a single bare config object
    }
    std::vector<mdiag::RunConfig> configs;
    for (const auto& cj : list) configs.push_back(mdiag::config_from_json(cj));
    if (configs.empty()) throw mdiag::Error("config file has no runs: " + path.string());
    return configs;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        mdiag::detail::atomic_write_file(out_path, text);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"misconception diagnosis pipeline"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a synthetic dialogue corpus");
    int gen_points = 200, gen_labels = 50;
    uint64_t gen_seed = 0;
    double gen_noise = 0.0;
    std::string gen_out;
    gen->add_option("--points", gen_points, "number of dialogue points");
    gen->add_option("--labels", gen_labels, "number of misconception labels");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--noise", gen_noise, "paraphrase noise level in [0,1]");
    gen->add_option("--out", gen_out, "corpus JSONL output path")->required();

    // --- filter ---
    auto* filter_cmd =
        app.add_subcommand("filter", "keep points at or above a likelihood threshold");
    std::string filter_corpus, filter_out;
    int filter_threshold = 75;
    filter_cmd->add_option("--corpus", filter_corpus, "corpus JSONL path")->required();
    filter_cmd->add_option("--threshold", filter_threshold,
                           "minimum likelihood to keep (0, 25, 50, 75, or 100)");
    filter_cmd->add_option("--out", filter_out, "filtered corpus JSONL output path")->required();

    // --- split ---
    auto* split_cmd = app.add_subcommand("split", "split a corpus by misconception label");
    std::string split_corpus, split_out;
    uint64_t split_seed = 0;
    double frac_train = 0.7, frac_valid = 0.1, frac_test = 0.2;
    int likelihood_min = 0;
    split_cmd->add_option("--corpus", split_corpus, "corpus JSONL path")->required();
    split_cmd->add_option("--seed", split_seed, "shuffle seed");
    split_cmd->add_option("--train-frac", frac_train, "train fraction");
    split_cmd->add_option("--valid-frac", frac_valid, "validation fraction");
    split_cmd->add_option("--test-frac", frac_test, "test fraction");
    split_cmd->add_option("--likelihood-min", likelihood_min,
                          "drop points below this likelihood before splitting");
    split_cmd->add_option("--out", split_out, "split JSON output path")->required();

    // --- index ---
    auto* index_cmd = app.add_subcommand("index", "embed the label catalog into an index");
    std::string idx_corpus, idx_out, idx_backend = "hash_local", idx_model, idx_endpoint,
                idx_cache;
    int idx_dim = 256, idx_ngram = 2;
    index_cmd->add_option("--corpus", idx_corpus, "corpus JSONL path")->required();
    index_cmd->add_option("--out", idx_out, "index JSON output path")->required();
    index_cmd->add_option("--embedder", idx_backend, "hash_local or remote_api");
    index_cmd->add_option("--dim", idx_dim, "embedding dimension");
    index_cmd->add_option("--ngram", idx_ngram, "max n-gram size (hash_local)");
    index_cmd->add_option("--model", idx_model, "embedding model name (remote_api)");
    index_cmd->add_option("--endpoint", idx_endpoint, "embedding endpoint (remote_api)");
    index_cmd->add_option("--cache", idx_cache, "response cache directory");

    // --- run ---
    auto* run_cmd = app.add_subcommand("run", "execute one run config");
    std::string run_corpus, run_split, run_config, run_out, run_cache;
    int run_par = 1;
    run_cmd->add_option("--corpus", run_corpus, "corpus JSONL path")->required();
    run_cmd->add_option("--split", run_split, "split JSON path")->required();
    run_cmd->add_option("--config", run_config, "run config JSON path")->required();
    run_cmd->add_option("--out", run_out, "run artifact output path")->required();
    run_cmd->add_option("--cache", run_cache, "response cache directory");
    run_cmd->add_option("--parallelism", run_par, "worker threads");

    // --- matrix ---
    auto* matrix_cmd = app.add_subcommand("matrix", "execute a set of run configs");
    std::string mx_corpus, mx_split, mx_configs, mx_out_json, mx_out_csv, mx_cache;
    int mx_par = 1;
    matrix_cmd->add_option("--corpus", mx_corpus, "corpus JSONL path")->required();
    matrix_cmd->add_option("--split", mx_split, "split JSON path")->required();
    matrix_cmd->add_option("--configs", mx_configs, "matrix config JSON path")->required();
    matrix_cmd->add_option("--out-json", mx_out_json, "combined report JSON path")->required();
    matrix_cmd->add_option("--out-csv", mx_out_csv, "metrics CSV path");
    matrix_cmd->add_option("--cache", mx_cache, "response cache directory");
    matrix_cmd->add_option("--parallelism", mx_par, "worker threads per run");

    // --- report ---
    auto* report_cmd = app.add_subcommand("report", "render a saved run or matrix report");
    std::string rp_in, rp_format = "markdown", rp_out;
    report_cmd->add_option("--in", rp_in, "run artifact or matrix JSON path")->required();
    report_cmd->add_option("--format", rp_format, "csv or markdown");
    report_cmd->add_option("--out", rp_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            mdiag::Corpus corpus =
                mdiag::generate_synthetic_corpus(gen_points, gen_labels, gen_seed, gen_noise);
            mdiag::save_corpus(corpus, gen_out);
            std::cout << "wrote " << corpus.points.size() << " points, "
                      << corpus.catalog.size() << " labels to " << gen_out << "\n";
        } else if (*filter_cmd) {
            mdiag::Corpus corpus = mdiag::load_corpus(filter_corpus);
            const size_t before = corpus.points.size();
            corpus.points = mdiag::filter_by_likelihood(corpus.points, filter_threshold);
            // rebuild the catalog so the file is self-contained; split label
            // ids refer to the filtered file's interning order
            mdiag::Corpus kept;
            for (auto& p : corpus.points) {
                p.misconception_id = kept.catalog.intern(corpus.catalog.text(p.misconception_id));
                kept.points.push_back(std::move(p));
            }
            mdiag::save_corpus(kept, filter_out);
            std::cout << "kept " << kept.points.size() << " of " << before << " points ("
                      << kept.catalog.size() << " labels) -> " << filter_out << "\n";
        } else if (*split_cmd) {
            mdiag::Corpus corpus = mdiag::load_corpus(split_corpus);
            std::vector<mdiag::DialoguePoint> points =
                likelihood_min > 0 ? mdiag::filter_by_likelihood(corpus.points, likelihood_min)
                                   : corpus.points;
            mdiag::SplitFractions fractions{frac_train, frac_valid, frac_test};
            mdiag::SplitAssignment split =
                mdiag::split_by_misconception(points, corpus.catalog, fractions, split_seed);
            mdiag::save_split(split, split_out);
            std::cout << "split " << points.size() << " points over labels: train="
                      << split.train.size() << " valid=" << split.valid.size()
                      << " test=" << split.test.size() << " -> " << split_out << "\n";
        } else if (*index_cmd) {
            mdiag::Corpus corpus = mdiag::load_corpus(idx_corpus);
            mdiag::EmbedderSpec spec =
                embedder_from_flags(idx_backend, idx_dim, idx_ngram, idx_model, idx_endpoint);
            std::optional<mdiag::ResponseCache> cache;
            if (!idx_cache.empty()) cache.emplace(idx_cache);
            mdiag::LabelIndex index =
                mdiag::build_index(corpus.catalog, spec, cache ? &*cache : nullptr);
            mdiag::save_index(index, idx_out);
            std::cout << "indexed " << index.size() << " labels (" << index.fingerprint
                      << ") -> " << idx_out << "\n";
        } else if (*run_cmd) {
            mdiag::Corpus corpus = mdiag::load_corpus(run_corpus);
            mdiag::SplitAssignment split = mdiag::load_split(run_split);
            std::vector<mdiag::RunConfig> configs = configs_from_file(run_config);
            if (configs.size() != 1)
                throw mdiag::Error("run expects exactly one config; use matrix for several");
            mdiag::BackendRegistry registry = build_registry(configs, corpus);
            std::optional<mdiag::ResponseCache> cache;
            if (!run_cache.empty()) cache.emplace(run_cache);
            mdiag::RunDeps deps{&registry, cache ? &*cache : nullptr, run_par};
            mdiag::RunArtifact artifact = mdiag::run(configs[0], corpus, split, deps);
            mdiag::save_artifact(artifact, run_out);
            std::cout << "run " << artifact.config.name << " fingerprint "
                      << artifact.fingerprint << " -> " << run_out << "\n"
                      << mdiag::matrix_to_markdown({artifact});
        } else if (*matrix_cmd) {
            mdiag::Corpus corpus = mdiag::load_corpus(mx_corpus);
            mdiag::SplitAssignment split = mdiag::load_split(mx_split);
            std::vector<mdiag::RunConfig> configs = configs_from_file(mx_configs);
            mdiag::BackendRegistry registry = build_registry(configs, corpus);
            std::optional<mdiag::ResponseCache> cache;
            if (!mx_cache.empty()) cache.emplace(mx_cache);
            mdiag::RunDeps deps{&registry, cache ? &*cache : nullptr, mx_par};
            std::vector<mdiag::RunArtifact> artifacts =
                mdiag::run_matrix(configs, corpus, split, deps);
            mdiag::detail::atomic_write_file(mx_out_json,
                                             mdiag::matrix_to_json(artifacts).dump(2) + "\n");
            if (!mx_out_csv.empty())
                mdiag::detail::atomic_write_file(mx_out_csv, mdiag::matrix_to_csv(artifacts));
            std::cout << mdiag::matrix_to_markdown(artifacts);
        } else if (*report_cmd) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(mdiag::detail::read_file(rp_in));
            } catch (const nlohmann::json::exception& e) {
                throw mdiag::Error("bad report input " + rp_in + ": " + e.what());
            }
            std::vector<mdiag::RunArtifact> artifacts;
            if (j.contains("runs")) {
                artifacts = mdiag::matrix_from_json(j);
            } else {
                artifacts.push_back(mdiag::artifact_from_json(j));
            }
            if (rp_format == "csv") {
                emit(mdiag::matrix_to_csv(artifacts), rp_out);
            } else if (rp_format == "markdown") {
                emit(mdiag::matrix_to_markdown(artifacts), rp_out);
            } else {
                throw mdiag::Error("unknown report format: " + rp_format);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
