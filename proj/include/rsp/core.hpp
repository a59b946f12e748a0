#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rsp/answer.hpp"

namespace rsp {

enum class StepKind { CStep, AStep };

// One reasoning action. `text` is the rendered XML block:
//
//   C-step  <step>\n<p>\n{analysis}\n</p>\n<code>\n{code}\n</code>\n<p>\n{output}\n</p>\n</step>
//   A-step  <step>\n<p>\n{analysis}\n</p>\n<p>\nFinal Answer:{answer}\n</p>\n</step>
//
// The code metadata is supplied by whoever produced the step; the engine
// never executes anything.
struct Step {
    StepKind kind = StepKind::CStep;
    std::string text;
    double mean_log_prob = 0.0; // natural log, averaged over tokens, <= 0
    bool contains_code = false;
    bool code_errored = false;
    std::optional<std::string> code_output;
    std::optional<Answer> extracted_answer; // A-steps only

    static Step code(std::string_view analysis, std::string_view code, std::string_view output,
                     double mean_log_prob, bool errored = false);
    static Step answer(std::string_view analysis, std::string_view answer, double mean_log_prob);

    bool is_answer() const { return kind == StepKind::AStep; }
    double prior() const;

    friend bool operator==(const Step& a, const Step& b) { return a.text == b.text; }
};

std::string render_code_step(std::string_view analysis, std::string_view code, std::string_view output);
std::string render_answer_step(std::string_view analysis, std::string_view answer);

// Throws MalformedStep when any Step invariant fails.
void validate_step(const Step& step);

// Answer carried by an A-step's text, normalized; absent for C-steps.
// Throws MalformedStep for an A-step without the "Final Answer:" marker.
std::optional<Answer> extract_answer(const Step& step);

// Reward scheme: 0 for non-terminal states, +1/-1 for a correct/incorrect
// terminal.
struct Reward {
    double value = 0.0;
    static Reward correct() { return {1.0}; }
    static Reward incorrect() { return {-1.0}; }
};

struct ReasoningState {
    std::string question_id;
    std::string question_text;
    std::vector<Step> steps;

    std::size_t depth() const { return steps.size(); }
    bool has_answer() const { return !steps.empty() && steps.back().is_answer(); }
    std::string rendered() const;
    std::optional<Answer> final_answer() const;
};

ReasoningState make_question(std::string id, std::string text);

// Concatenation transition. Throws ContractViolation when the state already
// holds an A-step or is at the depth cap.
ReasoningState apply_step(const ReasoningState& state, Step step, std::size_t t_max);

bool is_terminal(const ReasoningState& state, std::size_t t_max);

// Splits rendered text back into the question and its <step> blocks.
// Code flags and log-probabilities are not recoverable from text: errored is
// false and mean_log_prob 0 for every parsed step.
ReasoningState parse_rendered_state(std::string_view rendered, std::string question_id = {});

} // namespace rsp
