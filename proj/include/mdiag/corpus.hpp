#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdiag/common.hpp"

namespace mdiag {

enum class Speaker { student, tutor };

inline std::string speaker_name(Speaker s) { return s == Speaker::student ? "student" : "tutor"; }

inline Speaker speaker_from_name(const std::string& s) {
    if (s == "student") return Speaker::student;
    if (s == "tutor") return Speaker::tutor;
    throw Error("unknown speaker: " + s);
}

struct DialogueTurn {
    Speaker speaker;
    std::string text;
    bool operator==(const DialogueTurn&) const = default;
};

struct AnswerOption {
    std::string key;
    std::string text;
    bool operator==(const AnswerOption&) const = default;
};

struct DialoguePoint {
    std::string id;
    std::string question_text;
    std::vector<AnswerOption> answer_options;
    std::string chosen_option;
    std::vector<DialogueTurn> dialogue;
    int misconception_id = -1;
    int likelihood = 0;
    bool operator==(const DialoguePoint&) const = default;
};

/// Closed set of misconception label texts; ids are dense 0..size()-1.
/// Texts are keyed with whitespace collapsed and case preserved.
class LabelCatalog {
public:
    int intern(const std::string& text) {
        std::string norm = detail::collapse_whitespace(text);
        if (norm.empty()) throw Error("misconception label text is empty");
        auto it = by_text_.find(norm);
        if (it != by_text_.end()) return it->second;
        int id = static_cast<int>(texts_.size());
        texts_.push_back(norm);
        by_text_.emplace(std::move(norm), id);
        return id;
    }

    std::optional<int> find(const std::string& text) const {
        auto it = by_text_.find(detail::collapse_whitespace(text));
        if (it == by_text_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& text(int label_id) const {
        if (label_id < 0 || label_id >= static_cast<int>(texts_.size())) {
            throw Error("label id out of range: " + std::to_string(label_id));
        }
        return texts_[static_cast<size_t>(label_id)];
    }

    int size() const { return static_cast<int>(texts_.size()); }
    bool empty() const { return texts_.empty(); }
    const std::vector<std::string>& texts() const { return texts_; }

    bool operator==(const LabelCatalog& other) const { return texts_ == other.texts_; }

private:
    std::vector<std::string> texts_;
    std::unordered_map<std::string, int> by_text_;
};

struct SplitAssignment {
    std::set<int> train;
    std::set<int> valid;
    std::set<int> test;
    uint64_t seed = 0;

    bool operator==(const SplitAssignment&) const = default;

    const std::set<int>& labels_of(const std::string& split) const {
        if (split == "train") return train;
        if (split == "valid") return valid;
        if (split == "test") return test;
        throw Error("unknown split name: " + split);
    }
};

struct Corpus {
    LabelCatalog catalog;
    std::vector<DialoguePoint> points;
};

namespace detail {

inline void validate_point(const DialoguePoint& p, const LabelCatalog& catalog) {
    if (p.id.empty()) throw Error("point has empty id");
    if (p.answer_options.empty()) throw Error("point " + p.id + ": no answer options");
    bool chosen_found = false;
    for (const auto& opt : p.answer_options) {
        if (opt.key == p.chosen_option) chosen_found = true;
    }
    if (!chosen_found) {
        throw Error("point " + p.id + ": chosen option '" + p.chosen_option +
                    "' is not among the option keys");
    }
    if (p.dialogue.empty()) throw Error("point " + p.id + ": dialogue is empty");
    bool has_student = false;
    for (const auto& t : p.dialogue) {
        if (t.speaker == Speaker::student) has_student = true;
    }
    if (!has_student) throw Error("point " + p.id + ": dialogue has no student turn");
    if (p.likelihood != 0 && p.likelihood != 25 && p.likelihood != 50 && p.likelihood != 75 &&
        p.likelihood != 100) {
        throw Error("point " + p.id + ": likelihood " + std::to_string(p.likelihood) +
                    " not in {0,25,50,75,100}");
    }
    if (p.misconception_id < 0 || p.misconception_id >= catalog.size()) {
        throw Error("point " + p.id + ": misconception id " +
                    std::to_string(p.misconception_id) + " has no catalog entry");
    }
}

}  // namespace detail

/// Loads a JSONL corpus. Record fields: id, question, options[{key,text}],
/// chosen, dialogue[{speaker,text}], misconception (text) or
/// misconception_id (integer), likelihood.
///
/// With a base catalog, every label must resolve against it; without one,
/// label texts are interned in file order and id-only records must point at
/// a label some record in the same file names.
inline Corpus load_corpus(const std::filesystem::path& path,
                          const LabelCatalog* base_catalog = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path.string());

    Corpus corpus;
    if (base_catalog) corpus.catalog = *base_catalog;

    struct Pending {
        DialoguePoint point;
        int line_no;
        std::optional<int> raw_label_id;  // set when the record carried misconception_id
    };
    std::vector<Pending> pending;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        try {
            Pending p;
            p.line_no = line_no;
            p.point.id = rec.at("id").get<std::string>();
            p.point.question_text = rec.at("question").get<std::string>();
            for (const auto& opt : rec.at("options")) {
                p.point.answer_options.push_back(
                    {opt.at("key").get<std::string>(), opt.at("text").get<std::string>()});
            }
            p.point.chosen_option = rec.at("chosen").get<std::string>();
            for (const auto& turn : rec.at("dialogue")) {
                p.point.dialogue.push_back({speaker_from_name(turn.at("speaker").get<std::string>()),
                                            turn.at("text").get<std::string>()});
            }
            p.point.likelihood = rec.at("likelihood").get<int>();
            if (rec.contains("misconception")) {
                std::string text = rec.at("misconception").get<std::string>();
                if (base_catalog) {
                    auto id = corpus.catalog.find(text);
                    if (!id) {
                        throw Error("unknown misconception text: \"" + text + "\"");
                    }
                    p.point.misconception_id = *id;
                } else {
                    p.point.misconception_id = corpus.catalog.intern(text);
                }
            } else if (rec.contains("misconception_id")) {
                p.raw_label_id = rec.at("misconception_id").get<int>();
            } else {
                throw Error("record has neither misconception nor misconception_id");
            }
            pending.push_back(std::move(p));
        } catch (const Error& e) {
            throw Error("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw Error("line " + std::to_string(line_no) + ": bad record: " + e.what());
        }
    }

    // id-only records resolve against the full catalog, so a text record
    // later in the file can still define the label they reference
    corpus.points.reserve(pending.size());
    for (auto& p : pending) {
        if (p.raw_label_id) p.point.misconception_id = *p.raw_label_id;
        try {
            detail::validate_point(p.point, corpus.catalog);
        } catch (const Error& e) {
            throw Error("line " + std::to_string(p.line_no) + ": " + e.what());
        }
        corpus.points.push_back(std::move(p.point));
    }
    return corpus;
}

inline nlohmann::json point_to_json(const DialoguePoint& p, const LabelCatalog& catalog) {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& o : p.answer_options) options.push_back({{"key", o.key}, {"text", o.text}});
    nlohmann::json dialogue = nlohmann::json::array();
    for (const auto& t : p.dialogue) {
        dialogue.push_back({{"speaker", speaker_name(t.speaker)}, {"text", t.text}});
    }
    return nlohmann::json{{"id", p.id},
                          {"question", p.question_text},
                          {"options", options},
                          {"chosen", p.chosen_option},
                          {"dialogue", dialogue},
                          {"misconception", catalog.text(p.misconception_id)},
                          {"likelihood", p.likelihood}};
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& p : corpus.points) {
        out += point_to_json(p, corpus.catalog).dump();
        out += '\n';
    }
    return out;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    detail::atomic_write_file(path, corpus_to_jsonl(corpus));
}

/// Keeps exactly the points with likelihood >= threshold, order preserved.
inline std::vector<DialoguePoint> filter_by_likelihood(const std::vector<DialoguePoint>& points,
                                                       int threshold) {
    if (threshold != 0 && threshold != 25 && threshold != 50 && threshold != 75 &&
        threshold != 100) {
        throw Error("likelihood threshold must be one of {0,25,50,75,100}");
    }
    std::vector<DialoguePoint> out;
    for (const auto& p : points) {
        if (p.likelihood >= threshold) out.push_back(p);
    }
    return out;
}

struct SplitFractions {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

/// Label-disjoint split. Labels are shuffled by seed, then each label's
/// point group goes to the split farthest below its datapoint-count target.
/// Ties prefer the larger target, then train before valid before test.
inline SplitAssignment split_by_misconception(const std::vector<DialoguePoint>& points,
                                              const LabelCatalog& catalog,
                                              SplitFractions fractions, uint64_t seed) {
    const double sum = fractions.train + fractions.valid + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9) throw Error("split fractions must sum to 1");
    if (points.empty()) throw Error("cannot split an empty corpus");

    std::map<int, int> group_sizes;  // label id -> point count
    for (const auto& p : points) {
        if (p.misconception_id < 0 || p.misconception_id >= catalog.size()) {
            throw Error("point " + p.id + ": misconception id out of catalog range");
        }
        group_sizes[p.misconception_id]++;
    }
    if (group_sizes.size() < 3) {
        throw Error("need at least 3 distinct misconception labels to form 3 splits, got " +
                    std::to_string(group_sizes.size()));
    }

    std::vector<int> labels;
    labels.reserve(group_sizes.size());
    for (const auto& [id, _] : group_sizes) labels.push_back(id);
    std::mt19937_64 rng(detail::derive_seed(seed, "split-shuffle"));
    detail::seeded_shuffle(labels, rng);

    const double total = static_cast<double>(points.size());
    const double targets[3] = {fractions.train * total, fractions.valid * total,
                               fractions.test * total};
    double assigned[3] = {0.0, 0.0, 0.0};
    SplitAssignment out;
    out.seed = seed;
    std::set<int>* sets[3] = {&out.train, &out.valid, &out.test};

    for (int label : labels) {
        int best = 0;
        double best_deficit = targets[0] - assigned[0];
        for (int s = 1; s < 3; ++s) {
            double deficit = targets[s] - assigned[s];
            if (deficit > best_deficit + 1e-12 ||
                (std::abs(deficit - best_deficit) <= 1e-12 && targets[s] > targets[best])) {
                best = s;
                best_deficit = deficit;
            }
        }
        sets[best]->insert(label);
        assigned[best] += static_cast<double>(group_sizes[label]);
    }
    return out;
}

inline nlohmann::json split_to_json(const SplitAssignment& split) {
    auto ids = [](const std::set<int>& s) { return std::vector<int>(s.begin(), s.end()); };
    return nlohmann::json{{"seed", split.seed},
                          {"train", ids(split.train)},
                          {"valid", ids(split.valid)},
                          {"test", ids(split.test)}};
}

inline SplitAssignment split_from_json(const nlohmann::json& j) {
    SplitAssignment s;
    s.seed = j.at("seed").get<uint64_t>();
    for (int id : j.at("train")) s.train.insert(id);
    for (int id : j.at("valid")) s.valid.insert(id);
    for (int id : j.at("test")) s.test.insert(id);
    return s;
}

inline void save_split(const SplitAssignment& split, const std::filesystem::path& path) {
    detail::atomic_write_file(path, split_to_json(split).dump(2) + "\n");
}

inline SplitAssignment load_split(const std::filesystem::path& path) {
    try {
        return split_from_json(nlohmann::json::parse(detail::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad split file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation.

namespace synth {

inline const std::vector<std::string>& label_verbs() {
    static const std::vector<std::string> v = {
        "Believes that", "Thinks that",  "Assumes that",          "Forgets that",
        "Does not see that", "Is convinced that", "Acts as though", "Takes it that"};
    return v;
}

inline const std::vector<std::string>& label_claims() {
    static const std::vector<std::string> v = {
        "adding the numerators and denominators adds fractions",
        "the decimal point moves the wrong way",
        "multiplying always makes a number larger",
        "dividing by a fraction shrinks the result",
        "subtraction can be done in either order",
        "a negative times a negative stays negative",
        "more digits always means a bigger number",
        "squaring a number doubles it",
        "percentages cannot exceed one hundred",
        "operations apply strictly left to right",
        "zero as an exponent gives zero",
        "equal angles mean equal side lengths",
        "area and perimeter grow at the same rate",
        "the equals sign just announces the answer"};
    return v;
}

inline const std::vector<std::string>& label_contexts() {
    static const std::vector<std::string> v = {
        "when working with fractions",      "when comparing decimals",
        "when solving linear equations",    "when estimating answers",
        "when rounding to significant figures", "when multiplying negative numbers",
        "when converting between units",    "when reading place value columns",
        "when simplifying ratios",          "when expanding brackets",
        "when finding percentages of amounts", "when calculating averages"};
    return v;
}

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> v = {
        "maybe", "sort", "basically", "really", "stuff",  "thing", "bit",
        "erm",   "guess", "probably", "anyway", "school", "lesson", "pretty"};
    return v;
}

inline std::string label_text(int label_id) {
    const auto& verbs = label_verbs();
    const auto& claims = label_claims();
    const auto& contexts = label_contexts();
    const size_t capacity = verbs.size() * claims.size() * contexts.size();
    size_t idx = static_cast<size_t>(label_id) % capacity;
    size_t variant = static_cast<size_t>(label_id) / capacity;
    size_t vi = idx % verbs.size();
    idx /= verbs.size();
    size_t ci = idx % claims.size();
    idx /= claims.size();
    size_t xi = idx;
    std::string text = verbs[vi] + " " + claims[ci] + " " + contexts[xi];
    if (variant > 0) text += " (variant " + std::to_string(variant) + ")";
    return text;
}

// Student wording of the label: each token is independently kept, replaced,
// or dropped. The keep/replace decisions draw from a per-point stream that
// does not depend on the noise level, so raising noise on the same seed
// strictly degrades the same token positions (coupled corpora).
inline std::string noisy_paraphrase(const std::string& label, double noise, std::mt19937_64& rng) {
    auto tokens = detail::tokenize_alnum(label);
    const auto& fillers = filler_words();
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
        double u = detail::unit_draw(rng);
        uint64_t replacement = detail::bounded_draw(rng, fillers.size());
        double drop_u = detail::unit_draw(rng);
        if (u < noise) {
            if (drop_u < 0.3) continue;  // dropped
            out.push_back(fillers[replacement]);
        } else {
            out.push_back(tok);
        }
    }
    if (out.empty()) out.push_back(fillers[0]);
    return detail::join(out, " ");
}

}  // namespace synth

/// Deterministic desk-scale corpus: templated MCQs, dialogues whose student
/// turns paraphrase the planted misconception with the given lexical noise.
/// Every label is used at least once; the first point of each label keeps
/// likelihood >= 75 so default filtering never orphans a label.
inline Corpus generate_synthetic_corpus(int n_points, int n_labels, uint64_t seed,
                                        double noise = 0.0) {
    if (n_labels < 3) throw Error("n_labels must be >= 3");
    if (n_points < n_labels) throw Error("n_points must be >= n_labels");
    if (noise < 0.0 || noise > 1.0) throw Error("noise must be in [0,1]");

    Corpus corpus;
    for (int l = 0; l < n_labels; ++l) {
        int id = corpus.catalog.intern(synth::label_text(l));
        if (id != l) throw Error("synthetic label collision at id " + std::to_string(l));
    }

    static const char* kOps[] = {"+", "-", "x", "/"};
    static const int kLikelihoods[] = {0, 25, 50, 75, 100};

    corpus.points.reserve(static_cast<size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        std::mt19937_64 q_rng(detail::derive_seed(seed, "question", static_cast<uint64_t>(i)));
        std::mt19937_64 n_rng(detail::derive_seed(seed, "noise", static_cast<uint64_t>(i)));

        DialoguePoint p;
        p.id = "synth-" + std::to_string(i);
        int label = (i < n_labels) ? i
                                   : static_cast<int>(detail::bounded_draw(q_rng, n_labels));
        p.misconception_id = label;

        int a = 2 + static_cast<int>(detail::bounded_draw(q_rng, 98));
        int b = 2 + static_cast<int>(detail::bounded_draw(q_rng, 98));
        const char* op = kOps[detail::bounded_draw(q_rng, 4)];
        p.question_text = "What is " + std::to_string(a) + " " + op + " " + std::to_string(b) + "?";

        int correct = 0;
        if (op[0] == '+') correct = a + b;
        else if (op[0] == '-') correct = a - b;
        else if (op[0] == 'x') correct = a * b;
        else correct = b == 0 ? a : a / b;
        int offsets[4] = {0, 0, 0, 0};
        offsets[1] = 1 + static_cast<int>(detail::bounded_draw(q_rng, 9));
        offsets[2] = -(1 + static_cast<int>(detail::bounded_draw(q_rng, 9)));
        offsets[3] = 10 + static_cast<int>(detail::bounded_draw(q_rng, 90));
        size_t correct_pos = detail::bounded_draw(q_rng, 4);
        std::swap(offsets[0], offsets[correct_pos]);
        static const char* kKeys[] = {"A", "B", "C", "D"};
        for (size_t k = 0; k < 4; ++k) {
            p.answer_options.push_back({kKeys[k], std::to_string(correct + offsets[k])});
        }
        size_t wrong = detail::bounded_draw(q_rng, 3);
        size_t chosen_pos = wrong >= correct_pos ? wrong + 1 : wrong;
        p.chosen_option = kKeys[chosen_pos];

        if (i < n_labels) {
            p.likelihood = (detail::bounded_draw(q_rng, 2) == 0) ? 75 : 100;
        } else {
            // skew toward the confident end, leave some sub-threshold points
            size_t draw = detail::bounded_draw(q_rng, 10);
            p.likelihood = draw < 7 ? kLikelihoods[3 + draw % 2] : kLikelihoods[draw % 3];
        }

        const std::string& truth = corpus.catalog.text(label);
        p.dialogue.push_back({Speaker::tutor, "Can you talk me through how you chose option " +
                                                  p.chosen_option + "?"});
        p.dialogue.push_back(
            {Speaker::student, "I think " + synth::noisy_paraphrase(truth, noise, n_rng) + "."});
        p.dialogue.push_back({Speaker::tutor, "What makes you say that?"});
        p.dialogue.push_back(
            {Speaker::student,
             "Well, " + synth::noisy_paraphrase(truth, noise, n_rng) + ", so I went with it."});

        detail::validate_point(p, corpus.catalog);
        corpus.points.push_back(std::move(p));
    }
    return corpus;
}

}  // namespace mdiag
