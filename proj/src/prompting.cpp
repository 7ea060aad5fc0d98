#include "tagctx/prompting.hpp"

#include <algorithm>
#include <cctype>

namespace tagctx::prompting {

namespace {

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool ends_with_any_form(std::string_view text, std::string_view suffix) {
    auto trimmed = rtrim(text);
    if (trimmed.ends_with(suffix)) return true;
    if (suffix.ends_with('.')) {
        suffix.remove_suffix(1);
        return trimmed.ends_with(suffix);
    }
    return false;
}

std::string variant_suffix(const std::string& suffix) {
    // "in the answer." is canonical; "in your answer." appears in the wild
    // and counts as already-suffixed.
    std::string variant = suffix;
    auto pos = variant.rfind("in the answer");
    if (pos != std::string::npos) variant.replace(pos, 13, "in your answer");
    return variant;
}

} // namespace

std::string condition_label(const Condition& c) {
    return c.kind == ConditionKind::NoContext ? "no-context" : "with-context";
}

bool ends_with_instruction_suffix(std::string_view text, const PromptOptions& opts) {
    return ends_with_any_form(text, opts.instruction_suffix) ||
           ends_with_any_form(text, variant_suffix(opts.instruction_suffix));
}

PromptSpec build_no_context_prompt(const corpus::Question& q, const PromptOptions& opts) {
    PromptSpec spec;
    spec.condition = Condition{ConditionKind::NoContext, "", false};
    spec.question_id = q.question_id;
    spec.prompt_text = ends_with_instruction_suffix(q.text, opts)
                           ? q.text
                           : q.text + " " + opts.instruction_suffix;
    return spec;
}

PromptSpec build_context_prompt(const tagging::TaggedContext& ctx, const corpus::Question& q,
                                const PromptOptions& opts) {
    PromptSpec spec;
    spec.condition = Condition{ConditionKind::WithContext, ctx.context_id, ctx.topic == q.topic};
    spec.question_id = q.question_id;
    spec.prompt_text = opts.context_preamble + ctx.tagged_text + "\n\nQuestion: " + q.text;
    if (!ends_with_instruction_suffix(q.text, opts)) {
        spec.prompt_text += " " + opts.instruction_suffix;
    }
    return spec;
}

} // namespace tagctx::prompting
