#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsp/mcts.hpp"

namespace rsp {

struct BeamCandidate {
    ReasoningState state;
    double score = 0.0; // value prediction (SBS) or edge q (MCTS sweep)
    bool terminal = false;
};

struct InferenceReport {
    std::string strategy;
    std::optional<Answer> answer; // absent when no final answer was reached
    ReasoningState final_state;
    double score = 0.0;
    double elapsed_seconds = 0.0;
    int steps_taken = 0;
    int candidates_returned = 0;
    std::optional<std::string> failure;
};

struct SbsOptions {
    int b1 = 3;
    int b2 = 5;
    int t_max = 8;
    double temperature = 1.0; // 0 selects the backend's greedy mode
    std::uint64_t seed = 0;
};

// Retained candidate set after each top-B1 cut, in rank order.
struct BeamTrace {
    std::vector<std::vector<BeamCandidate>> rounds;
};

// Step-level beam search. Starts from B1 copies of the question; each round
// every non-terminal candidate samples B2 steps and every extension is
// scored by the value model. Terminal candidates are carried into the next
// queue unchanged with their last score. Extensions that reproduce a state
// already in the queue are dropped. The queue is cut to the top B1 by score
// (stable, so ties keep queue order, which is candidate order then proposal
// order). Proposal and value calls for one round run in parallel.
InferenceReport sbs_decode(const ReasoningState& question, const PolicyValueBackend& backend,
                           const SbsOptions& options, BeamTrace* trace = nullptr);

// sbs_decode with B1 = B2 = 1 in the backend's deterministic mode.
InferenceReport greedy_decode(const ReasoningState& question, const PolicyValueBackend& backend, int t_max);

struct SweepResult {
    std::vector<std::vector<NodeId>> rounds; // retained nodes after each cut, rank order
    std::vector<NodeId> final_candidates;    // rank order; front is the answer
};

// Top-down sweep over a built tree: gather the children of every retained
// node, rank them by stored edge q (ties by queue order), keep the top B1.
// Retained nodes without children (terminal, or never expanded) are carried
// forward with their own q. Stops after t_max rounds or when no retained
// node has children.
SweepResult sweep_top_b1(const SearchTree& tree, int b1, int t_max);

// Builds the tree with value-only evaluation, then sweeps it.
InferenceReport mcts_decode(const ReasoningState& question, const PolicyValueBackend& backend,
                            const SearchConfig& config, int b1, std::uint64_t seed, SearchTree* tree_out = nullptr);

// k sampled decodes; answers are grouped by equivalence and the largest
// group wins, ties going to the group that completed first.
InferenceReport majority_vote(const ReasoningState& question, const PolicyValueBackend& backend, int k,
                              double temperature, std::uint64_t seed, int t_max = 8);

// Plurality winner over answers in completion order; empty when none.
std::optional<std::size_t> plurality_index(const std::vector<std::optional<Answer>>& answers);

// Distinct terminal nodes in a tree.
int count_terminal_paths(const SearchTree& tree);

struct EvalSummary {
    std::string strategy;
    std::optional<double> accuracy; // absent when no record has a gold answer
    double avg_time_s = 0.0;
    double avg_steps = 0.0;
    double n_solutions = 0.0;
    std::size_t records = 0;
    std::size_t failures = 0;
};

EvalSummary summarize(const std::string& strategy, const std::vector<InferenceReport>& reports,
                      const std::vector<std::optional<Answer>>& golds);

} // namespace rsp
