#pragma once

#include <string>
#include <vector>

namespace mdiag {

/// Bumped whenever any template text changes; recorded in every report so
/// runs are comparable only within a template version.
inline constexpr const char* kPromptTemplateVersion = "prompts-v1";

inline constexpr const char* kGenerationSystemPrompt =
    "You diagnose mathematics misconceptions from student-tutor dialogue.";

// Concise expert-style labels shown as positive examples. The first one is
// the canonical exemplar of the target style.
inline const std::vector<std::string>& default_positive_examples() {
    static const std::vector<std::string> v = {
        "Carries out operations from left to right regardless of priority order",
        "Adds the numerators and the denominators when adding fractions",
        "Believes multiplying two negatives gives a negative answer",
        "Rounds down at five when rounding to the nearest ten",
        "Confuses the y-intercept with the gradient of a line"};
    return v;
}

// Verbose explanatory phrasings the generator must not imitate.
inline const std::vector<std::string>& default_anti_examples() {
    static const std::vector<std::string> v = {
        "The student fails to understand that when performing operations the order of priority "
        "matters, and therefore works through the calculation from left to right.",
        "It seems the student may be confused about how fractions are added, because they combined "
        "the tops and the bottoms separately instead of finding a common denominator first.",
        "This learner appears to hold the mistaken belief that multiplication always makes numbers "
        "larger, which is why they selected the biggest available option."};
    return v;
}

inline constexpr const char* kRerankInstruction =
    "Rerank these by semantic similarity to the prediction. Focus on: (1) Core mathematical "
    "concept, (2) Type of error, (3) Underlying reasoning flaw.";

inline constexpr const char* kVerboseInstruction =
    "Read the conversation and identify the core mathematical misconception in 1-2 sentences.";

}  // namespace mdiag
