#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdiag/cache.hpp"
#include "mdiag/corpus.hpp"
#include "mdiag/llm.hpp"
#include "mdiag/prompts.hpp"
#include "mdiag/retrieval.hpp"
#include "mdiag/serialize.hpp"

namespace mdiag {

enum class StrategyName {
    with_examples,
    concise_label,
    few_shot,
    original_verbose,
    structured,
    extract_key_concept,
};

inline std::string strategy_to_string(StrategyName s) {
    switch (s) {
        case StrategyName::with_examples: return "with_examples";
        case StrategyName::concise_label: return "concise_label";
        case StrategyName::few_shot: return "few_shot";
        case StrategyName::original_verbose: return "original_verbose";
        case StrategyName::structured: return "structured";
        case StrategyName::extract_key_concept: return "extract_key_concept";
    }
    throw Error("unknown strategy enum value");
}

inline StrategyName strategy_from_string(const std::string& s) {
    if (s == "with_examples") return StrategyName::with_examples;
    if (s == "concise_label") return StrategyName::concise_label;
    if (s == "few_shot") return StrategyName::few_shot;
    if (s == "original_verbose") return StrategyName::original_verbose;
    if (s == "structured") return StrategyName::structured;
    if (s == "extract_key_concept") return StrategyName::extract_key_concept;
    throw Error("unknown strategy name: " + s);
}

struct PromptStrategy {
    StrategyName name = StrategyName::with_examples;
    std::vector<std::string> positive_examples;
    std::vector<std::string> anti_examples;
    int min_words = 5;
    int max_words = 12;

    static PromptStrategy make(StrategyName n) {
        PromptStrategy s;
        s.name = n;
        if (n == StrategyName::with_examples) {
            s.positive_examples = default_positive_examples();
            s.anti_examples = default_anti_examples();
        }
        return s;
    }

    void validate() const {
        if (min_words < 1 || max_words < min_words)
            throw Error("prompt strategy has invalid word bounds");
        if (name == StrategyName::with_examples) {
            if (positive_examples.empty() || anti_examples.empty())
                throw Error("with_examples strategy requires positive and anti examples");
        }
    }
};

struct Hypothesis {
    std::string point_id;
    std::string text;
    int word_count = 0;
    StrategyName strategy = StrategyName::with_examples;
    std::string raw_text;
};

namespace detail {

inline std::string bulleted(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& it : items) {
        out += "- ";
        out += it;
        out += "\n";
    }
    return out;
}

inline int count_words(const std::string& text) {
    std::istringstream in(text);
    std::string tok;
    int n = 0;
    while (in >> tok) ++n;
    return n;
}

}  // namespace detail

namespace detail {

inline ChatBackend& require_backend(const BackendHandle& b) {
    if (!b) throw Error("null chat backend handle");
    return *b;
}

}  // namespace detail

/// Deterministic pure function of (point, strategy): same inputs always
/// produce the identical prompt string, which is what makes response
/// caching across runs sound.
inline ChatRequest build_generation_prompt(const DialoguePoint& point, const PromptStrategy& strategy) {
    strategy.validate();
    const std::string body = serialize_point(point);
    std::string user;
    switch (strategy.name) {
        case StrategyName::with_examples: {
            user = body + "\n\n";
            user += "Generate a concise misconception label matching these good examples:\n";
            user += detail::bulleted(strategy.positive_examples);
            user += "Avoid verbose explanations like these bad examples:\n";
            user += detail::bulleted(strategy.anti_examples);
            user += "State the student's misconception in " + std::to_string(strategy.min_words) +
                    "-" + std::to_string(strategy.max_words) + " words. Output only the label.";
            break;
        }
        case StrategyName::concise_label: {
            user = body + "\n\n";
            user += "State the student's misconception as a concise label of " +
                    std::to_string(strategy.min_words) + "-" + std::to_string(strategy.max_words) +
                    " words. Output only the label.";
            break;
        }
        case StrategyName::few_shot: {
            user = "Here are worked examples of labelling a misconception from dialogue:\n\n";
            user += "Student: I added the tops together and the bottoms together.\n";
            user += "Label: Adds the numerators and the denominators when adding fractions\n\n";
            user += "Student: Minus times minus stays minus, right?\n";
            user += "Label: Believes multiplying two negatives gives a negative answer\n\n";
            user += "Student: I just worked through it in the order it was written.\n";
            user += "Label: Carries out operations from left to right regardless of priority order\n\n";
            user += body + "\n\nLabel:";
            break;
        }
        case StrategyName::original_verbose: {
            user = body + "\n\n";
            user += kVerboseInstruction;
            break;
        }
        case StrategyName::structured: {
            user = body + "\n\n";
            user += "Work through three parts: (1) Topic: the mathematical topic involved. "
                    "(2) Error: what the student did wrong. (3) Misconception: a label of " +
                    std::to_string(strategy.min_words) + "-" + std::to_string(strategy.max_words) +
                    " words naming the underlying misconception. Output the three numbered parts.";
            break;
        }
        case StrategyName::extract_key_concept: {
            user = body + "\n\n";
            user += "Extract the key mathematical concept the student misunderstands. Output a "
                    "short label of " + std::to_string(strategy.min_words) + "-" +
                    std::to_string(strategy.max_words) + " words naming the misconception.";
            break;
        }
    }
    ChatRequest req;
    req.system = kGenerationSystemPrompt;
    req.user = user;
    req.max_tokens = 256;
    req.temperature = 0.0;
    return req;
}

/// Reduces a raw completion to a single clean hypothesis line: first line
/// only, bullets and surrounding quotes stripped, whitespace collapsed.
/// Returns nullopt when nothing survives cleanup; callers flag the point
/// instead of aborting the run.
inline std::optional<std::string> postprocess_hypothesis(const std::string& raw) {
    std::string text = detail::trim(raw);
    const auto nl = text.find('\n');
    if (nl != std::string::npos) text = text.substr(0, nl);
    text = detail::trim(text);
    while (!text.empty() && (text.front() == '-' || text.front() == '*')) {
        text.erase(text.begin());
        text = detail::trim(text);
    }
    while (text.size() >= 2) {
        const char f = text.front(), b = text.back();
        if ((f == '"' && b == '"') || (f == '\'' && b == '\'') || (f == '`' && b == '`')) {
            text = detail::trim(text.substr(1, text.size() - 2));
        } else {
            break;
        }
    }
    text = detail::collapse_whitespace(text);
    if (text.empty()) return std::nullopt;
    return text;
}

inline std::optional<Hypothesis> generate_hypothesis(const DialoguePoint& point,
                                                     const PromptStrategy& strategy,
                                                     const BackendHandle& backend,
                                                     const ResponseCache* cache = nullptr) {
    ChatRequest req = build_generation_prompt(point, strategy);
    const ChatResponse resp = complete(req, detail::require_backend(backend), cache);
    auto cleaned = postprocess_hypothesis(resp.text);
    if (!cleaned) return std::nullopt;
    Hypothesis h;
    h.point_id = point.id;
    h.text = *cleaned;
    h.word_count = detail::count_words(*cleaned);
    h.strategy = strategy.name;
    h.raw_text = resp.text;
    return h;
}

inline constexpr int kMaxRerankCandidates = 50;

inline ChatRequest build_rerank_prompt(const std::string& hypothesis,
                                       const std::vector<int>& candidate_ids,
                                       const LabelCatalog& catalog) {
    if (candidate_ids.empty()) throw Error("rerank needs at least one candidate");
    if (static_cast<int>(candidate_ids.size()) > kMaxRerankCandidates)
        throw Error("rerank candidate list exceeds " + std::to_string(kMaxRerankCandidates));
    if (detail::trim(hypothesis).empty()) throw Error("rerank needs a non-empty prediction");
    const int k = static_cast<int>(candidate_ids.size());
    std::string user = "Prediction: " + hypothesis + "\n\nCandidates:\n";
    for (int i = 0; i < k; ++i) {
        user += std::to_string(i + 1) + ". " + catalog.text(candidate_ids[i]) + "\n";
    }
    user += "\n";
    user += kRerankInstruction;
    user += " Output only the " + std::to_string(k) +
            " reordered numbers as a comma-separated list.";
    ChatRequest req;
    req.system = "You rank misconception labels against a predicted misconception.";
    req.user = user;
    req.max_tokens = 128;
    req.temperature = 0.0;
    return req;
}

struct RerankOutcome {
    std::string point_id;
    std::vector<int> input_order;
    std::vector<int> output_order;
    bool parsed_ok = false;
    bool fallback_used = false;
};

namespace detail {

// All decimal runs on one line, left to right. Runs longer than nine
// digits poison the whole line (returns nullopt) rather than overflowing.
inline std::optional<std::vector<int>> integer_runs(const std::string& line) {
    std::vector<int> out;
    size_t i = 0;
    while (i < line.size()) {
        if (std::isdigit(static_cast<unsigned char>(line[i]))) {
            size_t j = i;
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            if (j - i > 9) return std::nullopt;
            out.push_back(std::stoi(line.substr(i, j - i)));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

inline bool is_permutation_of_1_to_k(const std::vector<int>& xs, int k) {
    if (static_cast<int>(xs.size()) != k) return false;
    std::vector<bool> seen(static_cast<size_t>(k), false);
    for (int x : xs) {
        if (x < 1 || x > k || seen[static_cast<size_t>(x - 1)]) return false;
        seen[static_cast<size_t>(x - 1)] = true;
    }
    return true;
}

}  // namespace detail

/// Scans for the first line that plausibly carries the list (has a digit
/// and, for k > 1, a comma), then requires its integers to be exactly a
/// permutation of 1..k. Anything else falls back to the input order with
/// fallback_used set; a malformed reply never aborts a run.
inline RerankOutcome parse_rerank_response(const std::string& raw, int k,
                                           const std::vector<int>& input_order,
                                           const std::string& point_id = "") {
    if (k < 1) throw Error("rerank parse needs k >= 1");
    if (static_cast<int>(input_order.size()) != k)
        throw Error("rerank input order does not have k entries");
    RerankOutcome out;
    out.point_id = point_id;
    out.input_order = input_order;
    for (const auto& line : detail::split_lines(raw)) {
        const bool has_digit =
            std::any_of(line.begin(), line.end(),
                        [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
        if (!has_digit) continue;
        if (k > 1 && line.find(',') == std::string::npos) continue;
        const auto runs = detail::integer_runs(line);
        if (runs && detail::is_permutation_of_1_to_k(*runs, k)) {
            out.parsed_ok = true;
            out.output_order.reserve(static_cast<size_t>(k));
            for (int pos : *runs)
                out.output_order.push_back(input_order[static_cast<size_t>(pos - 1)]);
            return out;
        }
        break;
    }
    out.parsed_ok = false;
    out.fallback_used = true;
    out.output_order = input_order;
    return out;
}

/// Splices a reranked top-k back onto the full ordering. The outcome's
/// input_order must be exactly the current top-k, otherwise the splice
/// would silently corrupt the list.
inline RankedList apply_rerank(const RankedList& full, const RerankOutcome& outcome) {
    const size_t k = outcome.input_order.size();
    if (k == 0 || k > full.ordering.size())
        throw Error("rerank outcome size does not fit the ranked list");
    if (outcome.output_order.size() != k)
        throw Error("rerank outcome output order has wrong size");
    for (size_t i = 0; i < k; ++i) {
        if (full.ordering[i] != outcome.input_order[i])
            throw Error("rerank outcome does not match the list's current top candidates");
    }
    RankedList next;
    next.point_id = full.point_id;
    next.ordering = outcome.output_order;
    next.ordering.insert(next.ordering.end(), full.ordering.begin() + static_cast<long>(k),
                         full.ordering.end());
    // Scores are stage-two cosines; they no longer describe the order.
    next.scores.reset();
    if (full.true_rank) {
        const int true_id = full.ordering[static_cast<size_t>(*full.true_rank - 1)];
        for (size_t i = 0; i < next.ordering.size(); ++i) {
            if (next.ordering[i] == true_id) {
                next.true_rank = static_cast<int>(i + 1);
                break;
            }
        }
    }
    return next;
}

inline RankedList rerank_top_k(const RankedList& full, const std::string& hypothesis, int k,
                               const LabelCatalog& catalog, const BackendHandle& backend,
                               const ResponseCache* cache, RerankOutcome* outcome_out = nullptr) {
    if (k < 1) throw Error("rerank needs k >= 1");
    const size_t kk = std::min<size_t>(static_cast<size_t>(k), full.ordering.size());
    std::vector<int> top(full.ordering.begin(), full.ordering.begin() + static_cast<long>(kk));
    ChatRequest req = build_rerank_prompt(hypothesis, top, catalog);
    const ChatResponse resp = complete(req, detail::require_backend(backend), cache);
    RerankOutcome outcome =
        parse_rerank_response(resp.text, static_cast<int>(kk), top, full.point_id);
    if (outcome_out) *outcome_out = outcome;
    return apply_rerank(full, outcome);
}

// --- zero-shot classification over the whole catalog ---

inline constexpr size_t kZeroShotLabelWarnThreshold = 2000;

inline ChatRequest build_zero_shot_prompt(const DialoguePoint& point, const LabelCatalog& catalog,
                                          int k) {
    if (catalog.empty()) throw Error("zero-shot needs a non-empty catalog");
    if (k < 1) throw Error("zero-shot needs k >= 1");
    if (static_cast<size_t>(catalog.size()) > kZeroShotLabelWarnThreshold) {
        std::cerr << "warning: zero-shot prompt enumerates " << catalog.size()
                  << " labels; expect context overflow on most models\n";
    }
    std::string user = serialize_point(point) + "\n\n";
    user += "Below is the complete list of known misconception labels:\n";
    for (int i = 0; i < catalog.size(); ++i) {
        user += std::to_string(i + 1) + ". " + catalog.text(i) + "\n";
    }
    user += "\nRank the top-" + std::to_string(k) +
            " most likely misconceptions for this student. Output only the " + std::to_string(k) +
            " label numbers, most likely first, as a comma-separated list.";
    ChatRequest req;
    req.system = kGenerationSystemPrompt;
    req.user = user;
    req.max_tokens = 512;
    req.temperature = 0.0;
    return req;
}

struct ZeroShotOutcome {
    RankedList ranking;
    bool parsed_ok = false;
};

/// One-pass classification: the model sees every label and names its top
/// k. Parsed numbers keep response order (duplicates and out-of-range
/// entries dropped); every unnamed label follows in ascending id order so
/// the result is always a full permutation of the catalog.
inline ZeroShotOutcome zero_shot_classify(const DialoguePoint& point, const LabelCatalog& catalog,
                                          const BackendHandle& backend, const ResponseCache* cache,
                                          int k = 10) {
    ChatRequest req = build_zero_shot_prompt(point, catalog, k);
    const ChatResponse resp = complete(req, detail::require_backend(backend), cache);
    const int n = static_cast<int>(catalog.size());
    std::vector<int> head;
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (const auto& line : detail::split_lines(resp.text)) {
        const auto runs = detail::integer_runs(line);
        if (!runs || runs->empty()) continue;
        for (int num : *runs) {
            if (num < 1 || num > n) continue;
            if (used[static_cast<size_t>(num - 1)]) continue;
            if (static_cast<int>(head.size()) >= k) break;
            used[static_cast<size_t>(num - 1)] = true;
            head.push_back(num - 1);
        }
        if (!head.empty()) break;
    }
    ZeroShotOutcome out;
    out.parsed_ok = !head.empty();
    out.ranking.point_id = point.id;
    out.ranking.ordering = head;
    for (int id = 0; id < n; ++id) {
        if (!used[static_cast<size_t>(id)]) out.ranking.ordering.push_back(id);
    }
    out.ranking.derive_true_rank(point.misconception_id);
    return out;
}

// --- deterministic scripted backends for offline runs and tests ---

/// Matches any rerank-shaped prompt and answers with "1, 2, ..., k": a
/// rerank that never changes the order.
inline ScriptedChatBackend::DynamicRule identity_rerank_rule() {
    return [](const ChatRequest& req) -> std::optional<std::string> {
        if (req.user.find(kRerankInstruction) == std::string::npos) return std::nullopt;
        const std::string marker = "Output only the ";
        const auto pos = req.user.rfind(marker);
        if (pos == std::string::npos) return std::nullopt;
        size_t i = pos + marker.size(), j = i;
        while (j < req.user.size() && std::isdigit(static_cast<unsigned char>(req.user[j]))) ++j;
        if (j == i) return std::nullopt;
        const int k = std::stoi(req.user.substr(i, j - i));
        std::string reply;
        for (int t = 1; t <= k; ++t) {
            if (t > 1) reply += ", ";
            reply += std::to_string(t);
        }
        return reply;
    };
}

/// Registers the ideal answer for every point: generation prompts get the
/// true label text, zero-shot prompts get the true label's number. Safe to
/// call repeatedly on one backend with different strategies or k values.
inline void add_oracle_rules(ScriptedChatBackend& backend,
                             const std::vector<DialoguePoint>& points,
                             const LabelCatalog& catalog, const PromptStrategy& strategy,
                             int zero_shot_k = 10) {
    for (const auto& p : points) {
        const ChatRequest gen = build_generation_prompt(p, strategy);
        backend.add_exact(gen.user, catalog.text(p.misconception_id));
        const ChatRequest zs = build_zero_shot_prompt(p, catalog, zero_shot_k);
        backend.add_exact(zs.user, std::to_string(p.misconception_id + 1));
    }
}

/// Fully offline stand-in for a chat model that is always right, with
/// identity reranking. The pipeline's ideal behaviour on top of it is known
/// in advance, which pins down end-to-end expectations.
inline std::shared_ptr<ScriptedChatBackend> make_oracle_backend(
    const std::vector<DialoguePoint>& points, const LabelCatalog& catalog,
    const PromptStrategy& strategy, int zero_shot_k = 10) {
    auto backend = std::make_shared<ScriptedChatBackend>("oracle");
    add_oracle_rules(*backend, points, catalog, strategy, zero_shot_k);
    backend->add_dynamic(identity_rerank_rule());
    return backend;
}

/// Reranker that is a guaranteed no-op; isolates the other stages in
/// ablations.
inline std::shared_ptr<ScriptedChatBackend> make_identity_rerank_backend() {
    auto backend = std::make_shared<ScriptedChatBackend>("identity");
    backend->add_dynamic(identity_rerank_rule());
    return backend;
}

}  // namespace mdiag
