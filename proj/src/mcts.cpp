#include "rsp/mcts.hpp"

#include <cmath>

#include "rsp/errors.hpp"
#include "rsp/rng.hpp"

namespace rsp {

void SearchConfig::validate() const {
    if (n_simulations < 1 || b2_expansion < 1 || t_max < 1)
        throw ConfigError("n_simulations, b2_expansion and t_max must all be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("tree-search temperature must be > 0");
    if (!std::isfinite(c_puct) || c_puct < 0.0) throw ConfigError("c_puct must be finite and >= 0");
    if (q_init < -1.0 || q_init > 1.0) throw ConfigError("q_init must lie in [-1, 1]");
}

SearchTree SearchTree::make(ReasoningState question, std::optional<Answer> gold, SearchConfig config,
                            std::uint64_t seed) {
    config.validate();
    SearchTree tree;
    tree.config = config;
    tree.seed = seed;
    tree.gold = std::move(gold);

    SearchNode root;
    root.depth = static_cast<int>(question.depth());
    root.stats.q = config.q_init;
    root.terminal = is_terminal(question, static_cast<std::size_t>(config.t_max));
    if (root.terminal) root.reward = terminal_reward(question, tree.gold);
    tree.open_leaves = root.terminal ? 0 : 1;
    tree.question = std::move(question);
    tree.nodes.push_back(std::move(root));
    return tree;
}

std::vector<NodeId> SearchTree::path_to(NodeId id) const {
    std::vector<NodeId> path;
    for (NodeId cur = id; cur != kNoNode; cur = nodes.at(cur).parent) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

ReasoningState SearchTree::state_of(NodeId id) const {
    ReasoningState state = question;
    for (NodeId n : path_to(id)) {
        if (nodes[n].step) state.steps.push_back(*nodes[n].step);
    }
    return state;
}

double prior_from_logprob(double mean_log_prob) {
    if (!(mean_log_prob <= 0.0)) throw ContractViolation("mean log-probability must be <= 0");
    return std::exp(mean_log_prob);
}

double puct_score(const NodeStats& child, std::int64_t parent_visits, double c_puct, double q_init) {
    const double q = child.visits > 0 ? child.q : q_init;
    return q + c_puct * child.prior * std::sqrt(static_cast<double>(parent_visits)) /
                   (1.0 + static_cast<double>(child.visits));
}

std::vector<NodeId> select(const SearchTree& tree) {
    std::vector<NodeId> path{0};
    const SearchNode* cur = &tree.root();
    while (!cur->children.empty()) {
        NodeId best = cur->children.front();
        double best_score = -INFINITY;
        for (NodeId c : cur->children) {
            double s = puct_score(tree.node(c).stats, cur->stats.visits, tree.config.c_puct, tree.config.q_init);
            if (s > best_score) {
                best_score = s;
                best = c;
            }
        }
        path.push_back(best);
        cur = &tree.node(best);
    }
    return path;
}

std::optional<double> terminal_reward(const ReasoningState& state, const std::optional<Answer>& gold) {
    if (!state.has_answer()) return -1.0;
    if (!gold) return std::nullopt;
    return answers_equivalent(*state.final_answer(), *gold) ? 1.0 : -1.0;
}

Expansion expand(SearchTree& tree, NodeId leaf, const PolicyValueBackend& backend) {
    if (tree.node(leaf).terminal) throw ContractViolation("cannot expand a terminal node");
    if (!tree.node(leaf).children.empty()) throw ContractViolation("node is already expanded");

    const auto t_max = static_cast<std::size_t>(tree.config.t_max);
    const ReasoningState state = tree.state_of(leaf);
    auto proposals = sample_distinct(backend, state, tree.config.b2_expansion, tree.config.temperature,
                                     mix_seed(tree.seed, leaf));
    --tree.open_leaves;

    Expansion result;
    if (proposals.empty()) {
        SearchNode& n = tree.node(leaf);
        n.terminal = true;
        n.reward = -1.0;
        result.dead_end = true;
        return result;
    }

    for (auto& p : proposals) {
        validate_step(p.step);
        ReasoningState child_state = apply_step(state, p.step, t_max);
        SearchNode child;
        child.id = static_cast<NodeId>(tree.nodes.size());
        child.parent = leaf;
        child.depth = tree.node(leaf).depth + 1;
        child.stats.prior = prior_from_logprob(p.step.mean_log_prob);
        child.stats.q = tree.config.q_init;
        child.terminal = is_terminal(child_state, t_max);
        if (child.terminal) {
            child.reward = terminal_reward(child_state, tree.gold);
        } else {
            ++tree.open_leaves;
        }
        child.step = std::move(p.step);
        tree.node(leaf).children.push_back(child.id);
        result.children.push_back(child.id);
        tree.nodes.push_back(std::move(child));
    }
    return result;
}

double evaluate(SearchTree& tree, NodeId id, const PolicyValueBackend& backend) {
    SearchNode& n = tree.node(id);
    if (n.terminal && tree.config.lambda_mode == LambdaMode::IndicatorTerminal) {
        if (!n.reward) throw ContractViolation("terminal reward needs a gold answer; use AlwaysModel for inference");
        return *n.reward;
    }
    double v = clamp_value(backend.predict_value(tree.state_of(id)).value);
    tree.node(id).stats.model_value = v;
    return v;
}

void backup(SearchTree& tree, std::span<const NodeId> path, double value) {
    if (!(std::fabs(value) <= 1.0)) throw ContractViolation("backed-up value must lie in [-1, 1]");
    for (NodeId id : path) {
        NodeStats& s = tree.node(id).stats;
        s.visits += 1;
        s.total_value += value;
        s.q = s.total_value / static_cast<double>(s.visits);
    }
    ++tree.backups;
}

void run_simulation(SearchTree& tree, const PolicyValueBackend& backend) {
    if (tree.exhausted()) throw ContractViolation("tree is exhausted: every reachable leaf is terminal");
    std::vector<NodeId> path = select(tree);
    const NodeId leaf = path.back();

    if (tree.node(leaf).terminal) {
        backup(tree, path, evaluate(tree, leaf, backend));
    } else {
        Expansion e = expand(tree, leaf, backend);
        if (e.dead_end) {
            backup(tree, path, evaluate(tree, leaf, backend));
        } else {
            path.push_back(kNoNode);
            for (NodeId c : e.children) {
                path.back() = c;
                backup(tree, path, evaluate(tree, c, backend));
            }
        }
    }
    ++tree.simulations_run;
}

SearchTree build_tree(const ReasoningState& question, std::optional<Answer> gold, const PolicyValueBackend& backend,
                      const SearchConfig& config, std::uint64_t seed) {
    SearchTree tree = SearchTree::make(question, std::move(gold), config, seed);
    while (tree.simulations_run < config.n_simulations && !tree.exhausted()) run_simulation(tree, backend);
    return tree;
}

std::map<NodeId, double> q_targets(const SearchTree& tree) {
    std::map<NodeId, double> targets;
    for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
        const SearchNode& n = tree.nodes[i];
        if (n.terminal) {
            if (n.reward) targets.emplace(n.id, *n.reward);
        } else if (n.stats.visits > 0) {
            targets.emplace(n.id, n.stats.q);
        }
    }
    return targets;
}

} // namespace rsp
