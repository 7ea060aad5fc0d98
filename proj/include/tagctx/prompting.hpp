#pragma once

#include "tagctx/corpus.hpp"
#include "tagctx/tagging.hpp"

#include <string>

namespace tagctx::prompting {

enum class ConditionKind { NoContext, WithContext };

struct Condition {
    ConditionKind kind = ConditionKind::NoContext;
    std::string context_id; // empty for NoContext
    bool relevant = false;  // meaningful only for WithContext

    bool operator==(const Condition&) const = default;
};

std::string condition_label(const Condition& c); // "no-context" or "with-context"

struct PromptSpec {
    Condition condition;
    std::string question_id;
    std::string engine;
    std::string prompt_text;
};

struct PromptOptions {
    std::string instruction_suffix = "Provide details and include sources in the answer.";
    std::string context_preamble = "Answer the question using only the following context.\n";
};

/// True when the text already ends in the instruction suffix (either the
/// canonical "in the answer." form or the "in your answer" variant, with or
/// without the final period).
bool ends_with_instruction_suffix(std::string_view text, const PromptOptions& opts = {});

PromptSpec build_no_context_prompt(const corpus::Question& q, const PromptOptions& opts = {});

PromptSpec build_context_prompt(const tagging::TaggedContext& ctx, const corpus::Question& q,
                                const PromptOptions& opts = {});

} // namespace tagctx::prompting
