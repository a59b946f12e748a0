#include "rsp/core.hpp"
#include "rsp/errors.hpp"

namespace rsp {

std::string ReasoningState::rendered() const {
    std::size_t size = question_text.size();
    for (const auto& s : steps) size += s.text.size();
    std::string out;
    out.reserve(size);
    out += question_text;
    for (const auto& s : steps) out += s.text;
    return out;
}

std::optional<Answer> ReasoningState::final_answer() const {
    if (!has_answer()) return std::nullopt;
    return steps.back().extracted_answer;
}

ReasoningState make_question(std::string id, std::string text) {
    return ReasoningState{std::move(id), std::move(text), {}};
}

ReasoningState apply_step(const ReasoningState& state, Step step, std::size_t t_max) {
    if (state.has_answer()) throw ContractViolation("cannot extend a state that already holds a final answer");
    if (state.depth() >= t_max)
        throw ContractViolation("state is at the depth cap (" + std::to_string(t_max) + ")");
    ReasoningState next = state;
    next.steps.push_back(std::move(step));
    return next;
}

bool is_terminal(const ReasoningState& state, std::size_t t_max) {
    return state.has_answer() || state.depth() >= t_max;
}

ReasoningState parse_rendered_state(std::string_view rendered, std::string question_id) {
    ReasoningState state;
    state.question_id = std::move(question_id);
    auto first = rendered.find("<step>");
    state.question_text = std::string(rendered.substr(0, first));
    if (first == std::string_view::npos) return state;

    rendered.remove_prefix(first);
    while (!rendered.empty()) {
        if (!rendered.starts_with("<step>")) throw MalformedStep("text between steps");
        auto end = rendered.find("</step>");
        if (end == std::string_view::npos) throw MalformedStep("unterminated <step> block");
        Step step;
        step.text = std::string(rendered.substr(0, end + 7));
        rendered.remove_prefix(end + 7);

        if (step.text.find("Final Answer:") != std::string::npos) {
            step.kind = StepKind::AStep;
            step.extracted_answer = extract_answer(step);
        } else {
            step.kind = StepKind::CStep;
            step.contains_code = step.text.find("<code>") != std::string::npos;
            std::string_view body = step.text;
            auto open = body.rfind("<p>\n");
            auto close = body.rfind("\n</p>");
            if (step.contains_code && open != std::string_view::npos && close != std::string_view::npos &&
                close >= open + 4)
                step.code_output = std::string(body.substr(open + 4, close - open - 4));
        }
        state.steps.push_back(std::move(step));
    }
    return state;
}

} // namespace rsp
