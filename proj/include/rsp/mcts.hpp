#pragma once

// Value-guided MCTS over reasoning steps.
//
// Selection maximizes  q + c_puct * prior * sqrt(N_parent) / (1 + N_child),
// with prior = exp(mean_log_prob) of the step and q = q_init until the edge
// has been visited. Evaluation returns the terminal reward when the node is
// terminal (IndicatorTerminal) and the value model otherwise; AlwaysModel
// uses the value model everywhere, which is what inference needs.
//
// Every child created by an expansion is evaluated and its value backed up
// along root -> leaf -> child, so a leaf with k new children contributes k
// backups in that simulation.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rsp/core.hpp"
#include "rsp/policy.hpp"

namespace rsp {

enum class LambdaMode {
    IndicatorTerminal, // terminal nodes return their reward (data generation)
    AlwaysModel,       // value model everywhere (inference, no reward peeking)
};

struct SearchConfig {
    double c_puct = 1.25;
    int n_simulations = 40;
    int b2_expansion = 5;
    int t_max = 8;
    double temperature = 1.0;
    LambdaMode lambda_mode = LambdaMode::IndicatorTerminal;
    double q_init = 0.0;

    void validate() const;
};

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = UINT32_MAX;

struct NodeStats {
    double prior = 1.0;
    std::int64_t visits = 0;
    double total_value = 0.0;
    double q = 0.0; // total_value / visits once visited, q_init before
    std::optional<double> model_value;
};

struct SearchNode {
    NodeId id = 0;
    NodeId parent = kNoNode;
    std::optional<Step> step; // absent at the root
    NodeStats stats;
    std::vector<NodeId> children;
    int depth = 0;
    bool terminal = false;
    std::optional<double> reward; // terminal only; absent when no gold answer is known
};

struct SearchTree {
    ReasoningState question;
    std::optional<Answer> gold;
    SearchConfig config;
    std::uint64_t seed = 0;
    std::vector<SearchNode> nodes;
    int simulations_run = 0;
    std::int64_t backups = 0;
    std::int64_t open_leaves = 0; // non-terminal nodes without children

    static SearchTree make(ReasoningState question, std::optional<Answer> gold, SearchConfig config,
                           std::uint64_t seed);

    const SearchNode& root() const { return nodes.front(); }
    const SearchNode& node(NodeId id) const { return nodes.at(id); }
    SearchNode& node(NodeId id) { return nodes.at(id); }
    bool exhausted() const { return open_leaves == 0; }

    std::vector<NodeId> path_to(NodeId id) const; // root first
    ReasoningState state_of(NodeId id) const;
};

double prior_from_logprob(double mean_log_prob);

double puct_score(const NodeStats& child, std::int64_t parent_visits, double c_puct, double q_init = 0.0);

// Root-to-leaf path following argmax PUCT; ties go to the earliest child.
std::vector<NodeId> select(const SearchTree& tree);

// Outcome of expanding a leaf.
struct Expansion {
    std::vector<NodeId> children;
    bool dead_end = false; // no proposals: the leaf became terminal with reward -1
};

Expansion expand(SearchTree& tree, NodeId leaf, const PolicyValueBackend& backend);

// (1 - lambda) * V(s) + lambda * r with lambda = 1 on terminal nodes
// under IndicatorTerminal, 0 everywhere under AlwaysModel.
double evaluate(SearchTree& tree, NodeId id, const PolicyValueBackend& backend);

// N += 1, W += value, q = W / N for every node on the path, root included.
void backup(SearchTree& tree, std::span<const NodeId> path, double value);

void run_simulation(SearchTree& tree, const PolicyValueBackend& backend);

SearchTree build_tree(const ReasoningState& question, std::optional<Answer> gold, const PolicyValueBackend& backend,
                      const SearchConfig& config, std::uint64_t seed);

// Value targets: q of the incoming edge for visited non-terminal nodes, the
// reward for terminal nodes. The root and unvisited nodes are absent.
std::map<NodeId, double> q_targets(const SearchTree& tree);

// Reward of a finished state: +/-1 against gold; truncated or dead-end
// states score -1. Absent when an answer exists but no gold is known.
std::optional<double> terminal_reward(const ReasoningState& state, const std::optional<Answer>& gold);

// One policy rollout: sample a step at a time until terminal or dead end.
ReasoningState rollout(const ReasoningState& state, const PolicyValueBackend& backend, double temperature,
                       std::uint64_t seed, int t_max);

// Plain Monte Carlo value estimate: mean terminal reward over independent
// rollouts. Rollout i uses seed mix(seed, i), so the OpenMP version and the
// serial reference return identical results.
double mc_rollout_estimate(const ReasoningState& state, const Answer& gold, const PolicyValueBackend& backend,
                           int n_rollouts, std::uint64_t seed, int t_max = 8, double temperature = 1.0);
double mc_rollout_estimate_serial(const ReasoningState& state, const Answer& gold,
                                  const PolicyValueBackend& backend, int n_rollouts, std::uint64_t seed,
                                  int t_max = 8, double temperature = 1.0);

} // namespace rsp
