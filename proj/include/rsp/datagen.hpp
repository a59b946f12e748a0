#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsp/mcts.hpp"

namespace rsp {

enum class FilterLevel { Level1, Level2, Level3, Incorrect, Rejected };

const char* to_string(FilterLevel level);

struct SolutionPath {
    std::string question_id;
    std::string question;
    std::vector<Step> steps;
    std::optional<Answer> predicted_answer;
    bool correct = false;
    std::optional<FilterLevel> filter_level; // set by filter_solutions
    std::vector<double> per_step_targets;    // aligned with steps
    int tree_id = 0;
    NodeId path_index = 0; // terminal node id in its tree
    std::uint64_t seed = 0;

    // Concatenated step texts; the question is not part of the key.
    std::string solution_text() const;
};

struct DatasetManifest {
    int round = 1;
    int trees_per_question = 10;
    int max_pos = 4;
    int max_neg = 4;
    std::size_t records = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;

    // positives / negatives; absent when there are no negatives.
    std::optional<double> pos_neg_ratio() const;
};

// One path per visited terminal node, labelled against the tree's gold
// answer, with q-value targets along the path. tree_id is the index in
// `trees`.
std::vector<SolutionPath> harvest_paths(std::span<const SearchTree> trees);

// Level of a single path, ignoring duplicates.
FilterLevel classify_solution(const SolutionPath& path);

// Drops duplicates (by solution text, first occurrence kept) and paths whose
// every code step errored; incorrect paths pass through as Incorrect,
// correct ones are leveled. Input order is preserved.
std::vector<SolutionPath> filter_solutions(std::vector<SolutionPath> paths);

// Correct paths by level (Level1 first), shuffled within a level under the
// seed, at most max_pos; incorrect paths shuffled, at most max_neg.
// Positives come first in the result.
std::vector<SolutionPath> select_for_round(const std::vector<SolutionPath>& paths, int max_pos, int max_neg,
                                           std::uint64_t seed);

// beta * sum_t (prediction_t - target_t)^2
double value_loss(std::span<const double> targets, std::span<const double> predictions, double beta);

nlohmann::ordered_json path_to_json(const SolutionPath& path);
nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest);

// Manifest path written next to a dataset: "x.jsonl" -> "x.manifest.json".
std::string manifest_path_for(const std::string& destination);

void export_jsonl(std::span<const SolutionPath> paths, const DatasetManifest& manifest,
                  const std::string& destination);

} // namespace rsp
