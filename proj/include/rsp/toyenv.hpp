#pragma once

// A finite arithmetic-puzzle environment that can be enumerated exhaustively.
//
// A problem fixes a start value, a few operations ("+3", "*2", "/2", ...), a
// horizon and a target. Each C-step applies one operation to the running
// value; "/k" on a value not divisible by k fails (code_errored) and leaves
// the value unchanged. From the first C-step on, an A-step may report the
// running value; once `horizon` C-steps are taken it is the only move.
// Reward is +1 when the reported value equals the target, -1 otherwise.
//
// The policy table is a deterministic function of the problem and the move
// history, so the whole thing is stateless and reproducible. The question
// text encodes every field, so a backend can recover the problem from a
// rendered state alone.

#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rsp/policy.hpp"
#include "rsp/rng.hpp"

namespace rsp {

struct ToyOp {
    char symbol = '+'; // one of + - * /
    int operand = 1;

    std::string label() const;
    // Empty when the operation fails (inexact division).
    std::optional<std::int64_t> apply(std::int64_t x) const;
    friend bool operator==(const ToyOp&, const ToyOp&) = default;
};

struct ToyProblem {
    std::string id;
    std::int64_t start = 1;
    std::vector<ToyOp> ops; // distinct, 1..4 of them
    int horizon = 3;        // C-steps before the answer is forced, 1..6
    std::int64_t target = 0;

    int branching() const { return static_cast<int>(ops.size()) + 1; }
    std::vector<int> operand_pool() const;
    std::string question() const;
    Answer gold() const;
    ReasoningState root_state() const { return make_question(id, question()); }

    static ToyProblem parse(std::string_view question, std::string id = {});
    friend bool operator==(const ToyProblem&, const ToyProblem&) = default;
};

enum class ToyValueMode {
    Cold,   // value head never trained: always 0
    Oracle, // exact expected reward under the base policy
};

// Logit scale of the policy table; 0 gives a uniform policy.
struct ToyPolicy {
    double sharpness = 3.0;
};

// Compact position in a problem's state graph.
struct ToyNode {
    std::int64_t value = 0;
    int c_steps = 0;
    bool answered = false;
    std::int64_t answer = 0;
    std::uint64_t path_hash = 0;

    int depth() const { return c_steps + (answered ? 1 : 0); }
};

struct ToyMove {
    int id; // index into ops, or ops.size() for the answer move
    double probability;
};

class ToyEnv {
public:
    explicit ToyEnv(ToyProblem problem, ToyPolicy policy = {});

    const ToyProblem& problem() const { return problem_; }
    int answer_move() const { return static_cast<int>(problem_.ops.size()); }

    ToyNode root() const;
    bool is_terminal(const ToyNode& node, int t_max) const;
    double reward(const ToyNode& node) const;

    // Legal moves with base-table probabilities, in move-id order.
    std::vector<ToyMove> policy_table(const ToyNode& node) const;
    ToyNode child(const ToyNode& node, int move) const;
    Step render(const ToyNode& node, int move, double probability) const;

    // Replays a state's steps; throws ContractViolation for foreign steps.
    ToyNode locate(const ReasoningState& state) const;
    ReasoningState state_of(const std::vector<int>& moves) const;

    // Exact expected terminal reward under the base policy by backward
    // induction; depth-capped states without an answer score -1.
    double true_value(const ToyNode& node, int t_max) const;

    std::size_t count_states(int t_max) const;
    bool has_correct_path(int t_max) const;
    // Answer reached by always taking the most likely move.
    std::optional<std::int64_t> mode_answer(int t_max) const;

private:
    ToyProblem problem_;
    ToyPolicy policy_;
    std::uint64_t root_hash_;
};

struct ToyBackendOptions {
    ToyValueMode mode = ToyValueMode::Oracle;
    int t_max = 8;
    ToyPolicy policy{};
};

class ToyBackend final : public PolicyValueBackend {
public:
    explicit ToyBackend(ToyBackendOptions options = {}) : options_(options) {}

    // Samples without replacement from p_i^(1/T), renormalized; mean_log_prob
    // is the log of the base-table probability.
    std::vector<Proposal> propose_steps(const ProposalRequest& request) const override;
    ValuePrediction predict_value(const ReasoningState& state) const override;

    std::shared_ptr<const ToyEnv> env_for(const std::string& question_text) const;
    const ToyBackendOptions& options() const { return options_; }

private:
    ToyBackendOptions options_;
    mutable std::shared_mutex cache_mutex_;
    mutable std::unordered_map<std::string, std::shared_ptr<const ToyEnv>> cache_;
};

double toy_true_value(const ReasoningState& state, int t_max, ToyPolicy policy = {});

// Deterministic corpus; every problem has a correct path. Roughly a third of
// the problems have the target on the most-likely path, the rest elsewhere.
std::vector<ToyProblem> toy_corpus(std::size_t n, std::uint64_t seed);

} // namespace rsp
