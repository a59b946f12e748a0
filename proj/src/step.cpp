#include <cmath>

#include "rsp/core.hpp"
#include "rsp/errors.hpp"

namespace rsp {

namespace {

constexpr std::string_view kOpen = "<step>";
constexpr std::string_view kClose = "</step>";
constexpr std::string_view kMarker = "Final Answer:";

} // namespace

std::string render_code_step(std::string_view analysis, std::string_view code, std::string_view output) {
    std::string s;
    s.reserve(analysis.size() + code.size() + output.size() + 64);
    s += "<step>\n<p>\n";
    s += analysis;
    s += "\n</p>\n<code>\n";
    s += code;
    s += "\n</code>\n<p>\n";
    s += output;
    s += "\n</p>\n</step>";
    return s;
}

std::string render_answer_step(std::string_view analysis, std::string_view answer) {
    std::string s;
    s.reserve(analysis.size() + answer.size() + 64);
    s += "<step>\n<p>\n";
    s += analysis;
    s += "\n</p>\n<p>\nFinal Answer:";
    s += answer;
    s += "\n</p>\n</step>";
    return s;
}

Step Step::code(std::string_view analysis, std::string_view code, std::string_view output,
                double mean_log_prob, bool errored) {
    Step s;
    s.kind = StepKind::CStep;
    s.text = render_code_step(analysis, code, output);
    s.mean_log_prob = mean_log_prob;
    s.contains_code = true;
    s.code_errored = errored;
    s.code_output = std::string(output);
    return s;
}

Step Step::answer(std::string_view analysis, std::string_view answer, double mean_log_prob) {
    Step s;
    s.kind = StepKind::AStep;
    s.text = render_answer_step(analysis, answer);
    s.mean_log_prob = mean_log_prob;
    s.extracted_answer = make_answer(answer);
    return s;
}

double Step::prior() const { return std::exp(mean_log_prob); }

void validate_step(const Step& step) {
    if (step.text.empty()) throw MalformedStep("empty step text");
    if (!std::string_view(step.text).starts_with(kOpen) || !std::string_view(step.text).ends_with(kClose))
        throw MalformedStep("step text must be a <step>...</step> block");
    if (!std::isfinite(step.mean_log_prob) || step.mean_log_prob > 0.0)
        throw MalformedStep("mean_log_prob must be finite and <= 0, got " + std::to_string(step.mean_log_prob));
    if (step.is_answer() != step.extracted_answer.has_value())
        throw MalformedStep("an answer is present iff the step is an A-step");
    if (step.is_answer() && step.contains_code) throw MalformedStep("A-steps carry no code");
    if (step.is_answer() && step.text.find(kMarker) == std::string::npos)
        throw MalformedStep("A-step without \"Final Answer:\"");
}

std::optional<Answer> extract_answer(const Step& step) {
    if (!step.is_answer()) return std::nullopt;
    std::string_view text = step.text;
    auto pos = text.rfind(kMarker);
    if (pos == std::string_view::npos) throw MalformedStep("A-step without \"Final Answer:\"");
    text.remove_prefix(pos + kMarker.size());
    if (auto end = text.find("\n</p>"); end != std::string_view::npos) {
        text = text.substr(0, end);
    } else if (text.ends_with(kClose)) {
        text.remove_suffix(kClose.size());
    }
    return make_answer(text);
}

} // namespace rsp
