#ifndef CAUSALQ_PROMPTS_HPP
#define CAUSALQ_PROMPTS_HPP

#include <ostream>
#include <string>
#include <vector>

#include "causalq/triplets.hpp"

namespace causalq {

enum class PromptKind { mcqa_causal, temporal_masked, temporal_mcqa, intervention };
enum class Polarity { occurred, negated };
// Two published preambles for the causal MCQA prompt; v1 is the default.
enum class McqaTemplate { v1, v2 };

std::string to_string(PromptKind k);

// A prompt ready for scoring. `option_tokens` are the score keys (the
// leading-space letter tokens for next-token prompts, the bare words for
// the masked template); `option_texts` give what each token means in this
// prompt, which flips along with the options.
struct RenderedPrompt {
    PromptKind kind = PromptKind::mcqa_causal;
    std::string text;
    std::vector<std::string> option_tokens;
    std::vector<std::string> option_texts;
    // Where scoring attaches: "next_token" (text ends at "Answer:") or
    // "mask:<literal>" for the masked template.
    std::string answer_slot;
};

// "Which of the following events ... is a plausible {cause|effect} of the
// event {premise}?" with options A/B. flipped swaps the choice texts but
// not the letters. `in_context` is an optional block inserted after the
// preamble (few-shot experiments); empty means zero-shot.
RenderedPrompt render_mcqa_causal(const std::string& activity,
                                  const std::string& premise_text,
                                  const std::string& c1_text,
                                  const std::string& c2_text, Question question,
                                  McqaTemplate variant = McqaTemplate::v1,
                                  bool flipped = false,
                                  const std::string& in_context = "");

// Single masked sentence scored on the tokens "before"/"after".
RenderedPrompt render_temporal_masked(const std::string& e1_text,
                                      const std::string& e2_text,
                                      const std::string& mask_literal = "<mask>");

// Autoregressive temporal-order question with options "A: before"/"B: after".
RenderedPrompt render_temporal_mcqa(const std::string& activity,
                                    const std::string& e1_text,
                                    const std::string& e2_text);

// Intervention prompt: context, numbered trajectory, "Further, the event
// '{e1}' took place." (or "did NOT take place." when negated), question on
// e2's chances, options Increase/Decrease (Decrease first when flipped).
RenderedPrompt render_intervention(const std::string& activity,
                                   const std::vector<std::string>& trajectory_texts,
                                   const std::string& e1_text, Polarity polarity,
                                   const std::string& e2_text, bool flipped);

// Prints every embedded template with named placeholders, for audit.
void dump_templates(std::ostream& out);

} // namespace causalq

#endif
