#pragma once

// Self-describing JSON snapshot of a search tree.
//
// {
//   "schema": "rsp.search_tree", "version": 1,
//   "question": {"id": str, "text": str}, "gold_answer": str|null,
//   "seed": uint, "simulations_run": int, "backups": int,
//   "config": {"c_puct", "n_simulations", "b2_expansion", "t_max", "temperature",
//              "lambda_mode": "indicator_terminal"|"always_model", "q_init"},
//   "nodes": [{"id", "parent_id": int|null, "depth", "prior", "N", "W", "q",
//              "model_value": float|null, "terminal", "reward": float|null,
//              "children": [int], "step": null | {"kind": "c"|"a", "text", "mean_log_prob",
//              "contains_code", "code_errored", "code_output", "answer"}}]
// }
//
// Nodes are listed in id order; a parent always precedes its children.

#include <json.hpp>

#include "rsp/mcts.hpp"

namespace rsp {

inline constexpr const char* kSnapshotSchema = "rsp.search_tree";
inline constexpr int kSnapshotVersion = 1;

nlohmann::json tree_to_json(const SearchTree& tree);

// Throws SchemaError on a foreign or malformed document.
SearchTree tree_from_json(const nlohmann::json& doc);

void write_snapshot(const SearchTree& tree, const std::string& path);
SearchTree read_snapshot(const std::string& path);

} // namespace rsp
