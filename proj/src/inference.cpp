#include "rsp/inference.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <unordered_set>

#include "rsp/errors.hpp"
#include "rsp/rng.hpp"

namespace rsp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void finish_report(InferenceReport& r, const ReasoningState& question, const ReasoningState& final_state,
                   double score) {
    r.final_state = final_state;
    r.score = score;
    r.steps_taken = static_cast<int>(final_state.depth() - question.depth());
    r.answer = final_state.final_answer();
    if (!r.answer && !r.failure) r.failure = "no final answer";
}

} // namespace

InferenceReport sbs_decode(const ReasoningState& question, const PolicyValueBackend& backend,
                           const SbsOptions& options, BeamTrace* trace) {
    if (options.b1 < 1 || options.b2 < 1) throw ContractViolation("beam sizes B1 and B2 must be >= 1");
    if (options.t_max < 1) throw ContractViolation("t_max must be >= 1");
    const auto start = Clock::now();
    const auto cap = static_cast<std::size_t>(options.t_max);

    std::vector<BeamCandidate> beam(static_cast<std::size_t>(options.b1),
                                    BeamCandidate{question, 0.0, is_terminal(question, cap)});
    auto open = [](const std::vector<BeamCandidate>& c) {
        return std::any_of(c.begin(), c.end(), [](const BeamCandidate& b) { return !b.terminal; });
    };

    for (int t = 0; t < options.t_max && open(beam); ++t) {
        std::vector<std::vector<BeamCandidate>> extensions(beam.size());
        std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
        for (std::size_t i = 0; i < beam.size(); ++i) {
            if (beam[i].terminal) continue;
            try {
                const std::uint64_t seed = mix_seed(options.seed, static_cast<std::uint64_t>(t), i);
                for (auto& p : sample_distinct(backend, beam[i].state, options.b2, options.temperature, seed)) {
                    validate_step(p.step);
                    BeamCandidate next;
                    next.state = apply_step(beam[i].state, std::move(p.step), cap);
                    next.score = clamp_value(backend.predict_value(next.state).value);
                    next.terminal = is_terminal(next.state, cap);
                    extensions[i].push_back(std::move(next));
                }
            } catch (...) {
#pragma omp critical(rsp_sbs_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);

        std::vector<BeamCandidate> queue;
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < beam.size(); ++i) {
            if (beam[i].terminal) {
                if (seen.insert(beam[i].state.rendered()).second) queue.push_back(std::move(beam[i]));
                continue;
            }
            for (auto& e : extensions[i]) {
                if (seen.insert(e.state.rendered()).second) queue.push_back(std::move(e));
            }
        }
        std::stable_sort(queue.begin(), queue.end(),
                         [](const BeamCandidate& a, const BeamCandidate& b) { return a.score > b.score; });
        if (queue.size() > static_cast<std::size_t>(options.b1)) queue.resize(static_cast<std::size_t>(options.b1));
        beam = std::move(queue);
        if (trace) trace->rounds.push_back(beam);
        if (beam.empty()) break;
    }

    InferenceReport report;
    report.strategy = "sbs";
    if (beam.empty()) {
        report.failure = "all candidates dead-ended";
        finish_report(report, question, question, 0.0);
    } else {
        report.candidates_returned = static_cast<int>(beam.size());
        finish_report(report, question, beam.front().state, beam.front().score);
    }
    report.elapsed_seconds = seconds_since(start);
    return report;
}

InferenceReport greedy_decode(const ReasoningState& question, const PolicyValueBackend& backend, int t_max) {
    SbsOptions options;
    options.b1 = 1;
    options.b2 = 1;
    options.t_max = t_max;
    options.temperature = 0.0;
    InferenceReport r = sbs_decode(question, backend, options);
    r.strategy = "greedy";
    return r;
}

SweepResult sweep_top_b1(const SearchTree& tree, int b1, int t_max) {
    if (b1 < 1) throw ContractViolation("B1 must be >= 1");
    SweepResult result;
    std::vector<NodeId> beam{0};
    auto expandable = [&](const std::vector<NodeId>& c) {
        return std::any_of(c.begin(), c.end(), [&](NodeId id) { return !tree.node(id).children.empty(); });
    };
    for (int t = 0; t < t_max && expandable(beam); ++t) {
        std::vector<NodeId> queue;
        for (NodeId id : beam) {
            const auto& children = tree.node(id).children;
            if (children.empty()) {
                queue.push_back(id);
            } else {
                queue.insert(queue.end(), children.begin(), children.end());
            }
        }
        std::stable_sort(queue.begin(), queue.end(),
                         [&](NodeId a, NodeId b) { return tree.node(a).stats.q > tree.node(b).stats.q; });
        if (queue.size() > static_cast<std::size_t>(b1)) queue.resize(static_cast<std::size_t>(b1));
        beam = queue;
        result.rounds.push_back(beam);
    }
    result.final_candidates = beam;
    return result;
}

InferenceReport mcts_decode(const ReasoningState& question, const PolicyValueBackend& backend,
                            const SearchConfig& config, int b1, std::uint64_t seed, SearchTree* tree_out) {
    if (config.lambda_mode != LambdaMode::AlwaysModel)
        throw ContractViolation("MCTS inference must evaluate with the value model only (AlwaysModel)");
    const auto start = Clock::now();
    SearchTree tree = build_tree(question, std::nullopt, backend, config, seed);
    SweepResult sweep = sweep_top_b1(tree, b1, config.t_max);
    const NodeId best = sweep.final_candidates.front();

    InferenceReport report;
    report.strategy = "mcts";
    report.candidates_returned = count_terminal_paths(tree);
    finish_report(report, question, tree.state_of(best), tree.node(best).stats.q);
    report.elapsed_seconds = seconds_since(start);
    if (tree_out) *tree_out = std::move(tree);
    return report;
}

std::optional<std::size_t> plurality_index(const std::vector<std::optional<Answer>>& answers) {
    struct Group {
        const Answer* representative;
        std::size_t count;
        std::size_t first;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (!answers[i]) continue;
        auto g = std::find_if(groups.begin(), groups.end(),
                              [&](const Group& g) { return answers_equivalent(*g.representative, *answers[i]); });
        if (g == groups.end()) {
            groups.push_back({&*answers[i], 1, i});
        } else {
            ++g->count;
        }
    }
    if (groups.empty()) return std::nullopt;
    // Groups are created in completion order, so the first maximum wins ties.
    auto best = std::max_element(groups.begin(), groups.end(),
                                 [](const Group& a, const Group& b) { return a.count < b.count; });
    return best->first;
}

InferenceReport majority_vote(const ReasoningState& question, const PolicyValueBackend& backend, int k,
                              double temperature, std::uint64_t seed, int t_max) {
    if (k < 1) throw ContractViolation("k must be >= 1");
    const auto start = Clock::now();
    std::vector<ReasoningState> finals(static_cast<std::size_t>(k));
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < k; ++i) {
        try {
            finals[static_cast<std::size_t>(i)] =
                rollout(question, backend, temperature, mix_seed(seed, static_cast<std::uint64_t>(i)), t_max);
        } catch (...) {
#pragma omp critical(rsp_vote_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::optional<Answer>> answers;
    for (const auto& f : finals) answers.push_back(f.final_answer());

    InferenceReport report;
    report.strategy = "maj";
    report.candidates_returned = k;
    if (auto winner = plurality_index(answers)) {
        finish_report(report, question, finals[*winner], 0.0);
    } else {
        report.failure = "no decode reached a final answer";
        finish_report(report, question, finals.front(), 0.0);
    }
    report.elapsed_seconds = seconds_since(start);
    return report;
}

int count_terminal_paths(const SearchTree& tree) {
    return static_cast<int>(std::count_if(tree.nodes.begin() + 1, tree.nodes.end(),
                                          [](const SearchNode& n) { return n.terminal; }));
}

EvalSummary summarize(const std::string& strategy, const std::vector<InferenceReport>& reports,
                      const std::vector<std::optional<Answer>>& golds) {
    if (reports.size() != golds.size()) throw ContractViolation("one gold slot per report expected");
    EvalSummary s;
    s.strategy = strategy;
    s.records = reports.size();
    std::size_t graded = 0, correct = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        s.avg_time_s += r.elapsed_seconds;
        s.avg_steps += r.steps_taken;
        s.n_solutions += r.candidates_returned;
        if (r.failure && !r.answer) ++s.failures;
        if (golds[i]) {
            ++graded;
            if (r.answer && answers_equivalent(*r.answer, *golds[i])) ++correct;
        }
    }
    if (!reports.empty()) {
        const double n = static_cast<double>(reports.size());
        s.avg_time_s /= n;
        s.avg_steps /= n;
        s.n_solutions /= n;
    }
    if (graded) s.accuracy = static_cast<double>(correct) / static_cast<double>(graded);
    return s;
}

} // namespace rsp
