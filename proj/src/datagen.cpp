#include "rsp/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "rsp/errors.hpp"
#include "rsp/rng.hpp"

namespace rsp {

using nlohmann::ordered_json;

const char* to_string(FilterLevel level) {
    switch (level) {
    case FilterLevel::Level1: return "level1";
    case FilterLevel::Level2: return "level2";
    case FilterLevel::Level3: return "level3";
    case FilterLevel::Incorrect: return "incorrect";
    case FilterLevel::Rejected: return "rejected";
    }
    return "unknown";
}

std::string SolutionPath::solution_text() const {
    std::string s;
    for (const auto& step : steps) s += step.text;
    return s;
}

std::optional<double> DatasetManifest::pos_neg_ratio() const {
    if (negatives == 0) return std::nullopt;
    return static_cast<double>(positives) / static_cast<double>(negatives);
}

std::vector<SolutionPath> harvest_paths(std::span<const SearchTree> trees) {
    std::vector<SolutionPath> paths;
    for (std::size_t ti = 0; ti < trees.size(); ++ti) {
        const SearchTree& tree = trees[ti];
        if (!tree.gold) throw ContractViolation("harvesting needs trees built with a gold answer");
        const auto targets = q_targets(tree);
        for (const auto& node : tree.nodes) {
            if (node.id == 0 || !node.terminal || node.stats.visits == 0) continue;
            SolutionPath p;
            p.question_id = tree.question.question_id;
            p.question = tree.question.question_text;
            p.tree_id = static_cast<int>(ti);
            p.path_index = node.id;
            p.seed = tree.seed;
            for (NodeId id : tree.path_to(node.id)) {
                if (id == 0) continue;
                p.steps.push_back(*tree.node(id).step);
                p.per_step_targets.push_back(targets.at(id));
            }
            p.predicted_answer = p.steps.back().is_answer() ? p.steps.back().extracted_answer : std::nullopt;
            p.correct = p.predicted_answer && answers_equivalent(*p.predicted_answer, *tree.gold);
            paths.push_back(std::move(p));
        }
    }
    return paths;
}

FilterLevel classify_solution(const SolutionPath& path) {
    std::size_t code_steps = 0, errored = 0;
    for (const auto& s : path.steps) {
        if (!s.contains_code) continue;
        ++code_steps;
        if (s.code_errored) ++errored;
    }
    if (code_steps > 0 && errored == code_steps) return FilterLevel::Rejected;
    if (!path.correct) return FilterLevel::Incorrect;
    if (path.predicted_answer) {
        for (const auto& s : path.steps) {
            if (s.code_output && answers_equivalent(make_answer(*s.code_output), *path.predicted_answer))
                return FilterLevel::Level1;
        }
    }
    return errored == 0 ? FilterLevel::Level2 : FilterLevel::Level3;
}

std::vector<SolutionPath> filter_solutions(std::vector<SolutionPath> paths) {
    std::vector<SolutionPath> kept;
    std::unordered_set<std::string> seen;
    for (auto& p : paths) {
        if (!seen.insert(p.solution_text()).second) continue;
        FilterLevel level = classify_solution(p);
        if (level == FilterLevel::Rejected) continue;
        p.filter_level = level;
        kept.push_back(std::move(p));
    }
    return kept;
}

std::vector<SolutionPath> select_for_round(const std::vector<SolutionPath>& paths, int max_pos, int max_neg,
                                           std::uint64_t seed) {
    if (max_pos < 0 || max_neg < 0) throw ContractViolation("selection caps must be >= 0");
    std::vector<const SolutionPath*> by_level[3];
    std::vector<const SolutionPath*> negatives;
    for (const auto& p : paths) {
        FilterLevel level = p.filter_level.value_or(classify_solution(p));
        switch (level) {
        case FilterLevel::Level1: by_level[0].push_back(&p); break;
        case FilterLevel::Level2: by_level[1].push_back(&p); break;
        case FilterLevel::Level3: by_level[2].push_back(&p); break;
        case FilterLevel::Incorrect: negatives.push_back(&p); break;
        case FilterLevel::Rejected: break;
        }
    }

    std::vector<SolutionPath> chosen;
    for (int l = 0; l < 3; ++l) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(l)));
        rng.shuffle(by_level[l]);
        for (const auto* p : by_level[l]) {
            if (static_cast<int>(chosen.size()) >= max_pos) break;
            chosen.push_back(*p);
        }
    }
    Rng rng(mix_seed(seed, 3));
    rng.shuffle(negatives);
    for (std::size_t i = 0; i < negatives.size() && static_cast<int>(i) < max_neg; ++i) chosen.push_back(*negatives[i]);
    return chosen;
}

double value_loss(std::span<const double> targets, std::span<const double> predictions, double beta) {
    if (targets.size() != predictions.size())
        throw ContractViolation("value_loss: " + std::to_string(targets.size()) + " targets vs " +
                                std::to_string(predictions.size()) + " predictions");
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return beta * sum;
}

ordered_json path_to_json(const SolutionPath& path) {
    ordered_json j;
    j["question_id"] = path.question_id;
    j["question"] = path.question;
    ordered_json steps = ordered_json::array();
    for (std::size_t i = 0; i < path.steps.size(); ++i)
        steps.push_back({{"text", path.steps[i].text}, {"target_value", path.per_step_targets.at(i)}});
    j["steps"] = std::move(steps);
    j["label"] = path.correct ? "correct" : "incorrect";
    j["filter_level"] = to_string(path.filter_level.value_or(classify_solution(path)));
    j["tree_id"] = path.tree_id;
    j["seed"] = path.seed;
    return j;
}

ordered_json manifest_to_json(const DatasetManifest& m) {
    ordered_json j;
    j["round"] = m.round;
    j["trees_per_question"] = m.trees_per_question;
    j["max_pos"] = m.max_pos;
    j["max_neg"] = m.max_neg;
    j["records"] = m.records;
    auto ratio = m.pos_neg_ratio();
    j["pos_neg_ratio"] = ratio ? ordered_json(*ratio) : ordered_json(nullptr);
    return j;
}

std::string manifest_path_for(const std::string& destination) {
    const std::string ext = ".jsonl";
    if (destination.size() > ext.size() && destination.ends_with(ext))
        return destination.substr(0, destination.size() - ext.size()) + ".manifest.json";
    return destination + ".manifest.json";
}

void export_jsonl(std::span<const SolutionPath> paths, const DatasetManifest& manifest,
                  const std::string& destination) {
    {
        std::ofstream out(destination, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + destination + " for writing");
        for (const auto& p : paths) out << path_to_json(p).dump() << '\n';
        if (!out) throw IoError("failed writing " + destination);
    }
    const std::string mpath = manifest_path_for(destination);
    std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + mpath + " for writing");
    out << manifest_to_json(manifest).dump(2) << '\n';
    if (!out) throw IoError("failed writing " + mpath);
}

} // namespace rsp
