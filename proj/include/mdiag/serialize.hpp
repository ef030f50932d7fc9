#pragma once

#include <string>

#include "mdiag/corpus.hpp"

namespace mdiag {

inline std::string speaker_prefix(Speaker s) {
    return s == Speaker::student ? "Student: " : "Tutor: ";
}

/// Dialogue turns only, one line per turn, "Student: "/"Tutor: " prefixes.
/// This is the query text for the direct-embedding and keyword baselines.
inline std::string serialize_dialogue(const DialoguePoint& point) {
    std::string out;
    for (size_t i = 0; i < point.dialogue.size(); ++i) {
        if (i) out += '\n';
        out += speaker_prefix(point.dialogue[i].speaker) + point.dialogue[i].text;
    }
    return out;
}

/// Full plain-text block used in LLM prompts. Fixed layout (cache keys
/// depend on it):
///
///   Question: <text>
///   <key>) <option text>            one line per option
///   <key>) <option text> [CHOSEN]   the student's selection
///   Dialogue:
///   Student:/Tutor: <text>          one line per turn
inline std::string serialize_point(const DialoguePoint& point) {
    std::string out = "Question: " + point.question_text + "\n";
    for (const auto& opt : point.answer_options) {
        out += opt.key + ") " + opt.text;
        if (opt.key == point.chosen_option) out += " [CHOSEN]";
        out += '\n';
    }
    out += "Dialogue:\n";
    out += serialize_dialogue(point);
    return out;
}

}  // namespace mdiag
