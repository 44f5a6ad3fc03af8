#include "causalq/prompts.hpp"

#include <sstream>

namespace causalq {

std::string to_string(PromptKind k) {
    switch (k) {
        case PromptKind::mcqa_causal: return "mcqa_causal";
        case PromptKind::temporal_masked: return "temporal_masked";
        case PromptKind::temporal_mcqa: return "temporal_mcqa";
        case PromptKind::intervention: return "intervention";
    }
    return "";
}

namespace {

constexpr const char* kNextToken = "next_token";

void require(const std::string& value, const char* slot) {
    if (value.empty())
        throw ValidationError(std::string("empty prompt slot '") + slot + "'");
}

// Canonical form: "\n" endings, no trailing whitespace on any line, no
// trailing newline (next-token prompts must end exactly at "Answer:").
std::string normalize(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    size_t line_start = 0;
    auto flush_line = [&](size_t end) {
        size_t last = end;
        while (last > line_start &&
               (text[last - 1] == ' ' || text[last - 1] == '\t' || text[last - 1] == '\r'))
            --last;
        out.append(text, line_start, last - line_start);
    };
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            flush_line(i);
            out.push_back('\n');
            line_start = i + 1;
        }
    }
    flush_line(text.size());
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

} // namespace

RenderedPrompt render_mcqa_causal(const std::string& activity,
                                  const std::string& premise_text,
                                  const std::string& c1_text,
                                  const std::string& c2_text, Question question,
                                  McqaTemplate variant, bool flipped,
                                  const std::string& in_context) {
    require(activity, "activity");
    require(premise_text, "premise");
    require(c1_text, "choice1");
    require(c2_text, "choice2");
    const std::string& option_a = flipped ? c2_text : c1_text;
    const std::string& option_b = flipped ? c1_text : c2_text;

    std::ostringstream text;
    if (variant == McqaTemplate::v1) {
        text << "Consider the activity of " << activity << ".\n";
    } else {
        text << "The following are multiple choice questions about " << activity
             << ". You should directly answer the question by choosing the correct option.\n";
    }
    if (!in_context.empty()) text << in_context << "\n";
    text << "Which of the following events (given as options A or B) is a plausible "
         << to_string(question) << " of the event " << premise_text << "?\n"
         << "A. " << option_a << "\n"
         << "B. " << option_b << "\n"
         << "Answer:";

    RenderedPrompt out;
    out.kind = PromptKind::mcqa_causal;
    out.text = normalize(text.str());
    out.option_tokens = {" A", " B"};
    out.option_texts = {option_a, option_b};
    out.answer_slot = kNextToken;
    return out;
}

RenderedPrompt render_temporal_masked(const std::string& e1_text,
                                      const std::string& e2_text,
                                      const std::string& mask_literal) {
    require(e1_text, "e1");
    require(e2_text, "e2");
    require(mask_literal, "mask");
    RenderedPrompt out;
    out.kind = PromptKind::temporal_masked;
    out.text = normalize("In terms of 'before' and 'after', the event: \"" + e1_text +
                         "\" would have happened " + mask_literal +
                         " the event: \"" + e2_text + "\"");
    out.option_tokens = {"before", "after"};
    out.option_texts = {"before", "after"};
    out.answer_slot = "mask:" + mask_literal;
    return out;
}

RenderedPrompt render_temporal_mcqa(const std::string& activity,
                                    const std::string& e1_text,
                                    const std::string& e2_text) {
    require(activity, "activity");
    require(e1_text, "e1");
    require(e2_text, "e2");
    std::ostringstream text;
    text << "Consider the activity of " << activity << ".\n"
         << "Question: Determine the temporal order.\n"
         << "The following events took place: 1. " << e1_text << ", 2. " << e2_text
         << "\n"
         << "Did the first event occur 'before' or 'after' the second event? "
            "(choose from the given options)\n"
         << "A: before\n"
         << "B: after\n"
         << "Answer:";
    RenderedPrompt out;
    out.kind = PromptKind::temporal_mcqa;
    out.text = normalize(text.str());
    out.option_tokens = {" A", " B"};
    out.option_texts = {"before", "after"};
    out.answer_slot = kNextToken;
    return out;
}

RenderedPrompt render_intervention(const std::string& activity,
                                   const std::vector<std::string>& trajectory_texts,
                                   const std::string& e1_text, Polarity polarity,
                                   const std::string& e2_text, bool flipped) {
    require(activity, "activity");
    require(e1_text, "e1");
    require(e2_text, "e2");
    if (trajectory_texts.empty()) throw ValidationError("empty trajectory");
    for (const auto& line : trajectory_texts) require(line, "trajectory event");

    std::ostringstream text;
    text << "CAUSAL REASONING ANALYSIS:\n"
         << "Context: For the activity " << activity
         << ". During the activity, the following set of sequences occurred in order:\n";
    for (size_t i = 0; i < trajectory_texts.size(); ++i)
        text << (i + 1) << ". " << trajectory_texts[i] << "\n";
    text << "Further, the event '" << e1_text << "' "
         << (polarity == Polarity::occurred ? "took place." : "did NOT take place.")
         << "\n"
         << "Question: Given the above information, will the chances of the "
            "occurrence of the event '"
         << e2_text << "' increase or decrease?\n"
         << "A. " << (flipped ? "Decrease" : "Increase") << "\n"
         << "B. " << (flipped ? "Increase" : "Decrease") << "\n"
         << "Answer:";

    RenderedPrompt out;
    out.kind = PromptKind::intervention;
    out.text = normalize(text.str());
    out.option_tokens = {" A", " B"};
    out.option_texts = flipped ? std::vector<std::string>{"Decrease", "Increase"}
                               : std::vector<std::string>{"Increase", "Decrease"};
    out.answer_slot = kNextToken;
    return out;
}

void dump_templates(std::ostream& out) {
    out << "[mcqa_causal v1]\n"
        << render_mcqa_causal("{activity}", "{premise}", "{choice1}", "{choice2}",
                              Question::cause)
               .text
        << "\n\n[mcqa_causal v2]\n"
        << render_mcqa_causal("{activity}", "{premise}", "{choice1}", "{choice2}",
                              Question::cause, McqaTemplate::v2)
               .text
        << "\n\n[temporal_masked]\n"
        << render_temporal_masked("{first event text}", "{second event text}").text
        << "\n\n[temporal_mcqa]\n"
        << render_temporal_mcqa("{activity}", "{first event text}",
                                "{second event text}")
               .text
        << "\n\n[intervention do(E1)]\n"
        << render_intervention("{activity}", {"{trajectory event}"}, "{E1}",
                               Polarity::occurred, "{E2}", false)
               .text
        << "\n\n[intervention do(not E1)]\n"
        << render_intervention("{activity}", {"{trajectory event}"}, "{E1}",
                               Polarity::negated, "{E2}", false)
               .text
        << "\n\n[intervention flipped options]\n"
        << render_intervention("{activity}", {"{trajectory event}"}, "{E1}",
                               Polarity::occurred, "{E2}", true)
               .text
        << "\n";
}

} // namespace causalq
