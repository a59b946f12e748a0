#include "rsp/toyenv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <functional>
#include <mutex>

#include "rsp/errors.hpp"

namespace rsp {

namespace {

std::string signature(const ToyProblem& p) {
    std::string s = "toy|start=" + std::to_string(p.start) + "|ops=";
    for (const auto& op : p.ops) s += op.label() + ",";
    s += "|horizon=" + std::to_string(p.horizon);
    return s;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ContractViolation("toy question: bad " + std::string(what) + " \"" + std::string(s) + "\"");
    return v;
}

std::string_view between(std::string_view text, std::string_view head, std::string_view tail) {
    auto a = text.find(head);
    if (a == std::string_view::npos) throw ContractViolation("not a toy question: missing \"" + std::string(head) + "\"");
    a += head.size();
    auto b = text.find(tail, a);
    if (b == std::string_view::npos) throw ContractViolation("not a toy question: missing \"" + std::string(tail) + "\"");
    return text.substr(a, b - a);
}

constexpr std::string_view kStepPrefix = "<step>\n<p>\nApply ";
constexpr std::string_view kStepInfix = " to the running value ";

} // namespace

std::string ToyOp::label() const { return std::string(1, symbol) + std::to_string(operand); }

std::optional<std::int64_t> ToyOp::apply(std::int64_t x) const {
    switch (symbol) {
    case '+': return x + operand;
    case '-': return x - operand;
    case '*': return x * operand;
    case '/':
        if (operand == 0 || x % operand != 0) return std::nullopt;
        return x / operand;
    }
    throw ContractViolation(std::string("unknown toy operation '") + symbol + "'");
}

std::vector<int> ToyProblem::operand_pool() const {
    std::vector<int> pool;
    for (const auto& op : ops) pool.push_back(op.operand);
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    return pool;
}

std::string ToyProblem::question() const {
    std::string q = "Start from " + std::to_string(start) + ". Each step applies one of the operations ";
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (i) q += ", ";
        q += ops[i].label();
    }
    q += " to the running value, and at most " + std::to_string(horizon) +
         " steps may be taken. Reach " + std::to_string(target) + " and report the final value.\n";
    return q;
}

Answer ToyProblem::gold() const { return make_answer(std::to_string(target)); }

ToyProblem ToyProblem::parse(std::string_view question, std::string id) {
    ToyProblem p;
    p.id = std::move(id);
    p.start = parse_int(between(question, "Start from ", ". "), "start");
    std::string_view list = between(question, "the operations ", " to the running value");
    while (!list.empty()) {
        auto comma = list.find(", ");
        std::string_view item = list.substr(0, comma);
        if (item.size() < 2 || std::string_view("+-*/").find(item[0]) == std::string_view::npos)
            throw ContractViolation("toy question: bad operation \"" + std::string(item) + "\"");
        p.ops.push_back({item[0], static_cast<int>(parse_int(item.substr(1), "operand"))});
        list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 2);
    }
    p.horizon = static_cast<int>(parse_int(between(question, "at most ", " steps"), "horizon"));
    p.target = parse_int(between(question, "Reach ", " and report"), "target");
    if (p.ops.empty() || p.ops.size() > 4) throw ContractViolation("toy question: need 1..4 operations");
    if (p.horizon < 1 || p.horizon > 6) throw ContractViolation("toy question: horizon must be in 1..6");
    return p;
}

ToyEnv::ToyEnv(ToyProblem problem, ToyPolicy policy)
    : problem_(std::move(problem)), policy_(policy), root_hash_(hash_text(signature(problem_))) {}

ToyNode ToyEnv::root() const {
    ToyNode n;
    n.value = problem_.start;
    n.path_hash = root_hash_;
    return n;
}

bool ToyEnv::is_terminal(const ToyNode& node, int t_max) const {
    return node.answered || node.depth() >= t_max;
}

double ToyEnv::reward(const ToyNode& node) const {
    return node.answered && node.answer == problem_.target ? 1.0 : -1.0;
}

std::vector<ToyMove> ToyEnv::policy_table(const ToyNode& node) const {
    std::vector<ToyMove> moves;
    if (node.answered) return moves;
    if (node.c_steps < problem_.horizon) {
        for (int i = 0; i < answer_move(); ++i) moves.push_back({i, 0.0});
    }
    if (node.c_steps >= 1) moves.push_back({answer_move(), 0.0});

    double total = 0.0;
    for (auto& m : moves) {
        double logit = policy_.sharpness * unit_interval(mix_seed(node.path_hash, static_cast<std::uint64_t>(m.id)));
        m.probability = std::exp(logit);
        total += m.probability;
    }
    for (auto& m : moves) m.probability /= total;
    return moves;
}

ToyNode ToyEnv::child(const ToyNode& node, int move) const {
    ToyNode c = node;
    c.path_hash = mix_seed(node.path_hash, static_cast<std::uint64_t>(move) + 1);
    if (move == answer_move()) {
        c.answered = true;
        c.answer = node.value;
    } else {
        c.value = problem_.ops.at(static_cast<std::size_t>(move)).apply(node.value).value_or(node.value);
        ++c.c_steps;
    }
    return c;
}

Step ToyEnv::render(const ToyNode& node, int move, double probability) const {
    const double log_p = std::min(0.0, std::log(probability));
    const std::string v = std::to_string(node.value);
    if (move == answer_move()) return Step::answer("The running value is " + v + ".", "$" + v + "$", log_p);

    const ToyOp& op = problem_.ops.at(static_cast<std::size_t>(move));
    const std::string k = std::to_string(op.operand);
    std::string code = "x = " + v + "\n";
    if (op.symbol == '/') {
        code += "assert x % " + k + " == 0\nx = x // " + k + "\n";
    } else {
        code += std::string("x = x ") + op.symbol + " " + k + "\n";
    }
    code += "print(x)";
    auto result = op.apply(node.value);
    std::string output = result ? std::to_string(*result) : "AssertionError";
    return Step::code("Apply " + op.label() + std::string(kStepInfix) + v + ".", code, output, log_p, !result);
}

ToyNode ToyEnv::locate(const ReasoningState& state) const {
    ToyNode node = root();
    for (const auto& step : state.steps) {
        if (node.answered) throw ContractViolation("toy state continues past its answer");
        int move = -1;
        if (step.is_answer()) {
            move = answer_move();
        } else {
            std::string_view text = step.text;
            if (!text.starts_with(kStepPrefix)) throw ContractViolation("step is not a toy move");
            text.remove_prefix(kStepPrefix.size());
            std::string_view label = text.substr(0, text.find(kStepInfix));
            for (int i = 0; i < answer_move(); ++i) {
                if (problem_.ops[static_cast<std::size_t>(i)].label() == label) move = i;
            }
        }
        auto table = policy_table(node);
        auto it = std::find_if(table.begin(), table.end(), [&](const ToyMove& m) { return m.id == move; });
        if (it == table.end() || render(node, move, it->probability).text != step.text)
            throw ContractViolation("step is not a legal move of this toy problem");
        node = child(node, move);
    }
    return node;
}

ReasoningState ToyEnv::state_of(const std::vector<int>& moves) const {
    ReasoningState state = problem_.root_state();
    ToyNode node = root();
    for (int m : moves) {
        auto table = policy_table(node);
        auto it = std::find_if(table.begin(), table.end(), [&](const ToyMove& t) { return t.id == m; });
        if (it == table.end()) throw ContractViolation("illegal toy move " + std::to_string(m));
        state.steps.push_back(render(node, m, it->probability));
        node = child(node, m);
    }
    return state;
}

double ToyEnv::true_value(const ToyNode& node, int t_max) const {
    if (is_terminal(node, t_max)) return reward(node);
    double v = 0.0;
    for (const auto& m : policy_table(node)) v += m.probability * true_value(child(node, m.id), t_max);
    return v;
}

std::size_t ToyEnv::count_states(int t_max) const {
    std::function<std::size_t(const ToyNode&)> count = [&](const ToyNode& n) -> std::size_t {
        std::size_t c = 1;
        if (is_terminal(n, t_max)) return c;
        for (const auto& m : policy_table(n)) c += count(child(n, m.id));
        return c;
    };
    return count(root());
}

bool ToyEnv::has_correct_path(int t_max) const {
    std::function<bool(const ToyNode&)> search = [&](const ToyNode& n) {
        if (is_terminal(n, t_max)) return reward(n) > 0;
        for (const auto& m : policy_table(n)) {
            if (search(child(n, m.id))) return true;
        }
        return false;
    };
    return search(root());
}

std::optional<std::int64_t> ToyEnv::mode_answer(int t_max) const {
    ToyNode n = root();
    while (!is_terminal(n, t_max)) {
        auto table = policy_table(n);
        auto best = std::max_element(table.begin(), table.end(), [](const ToyMove& a, const ToyMove& b) {
            return a.probability < b.probability;
        });
        n = child(n, best->id);
    }
    if (!n.answered) return std::nullopt;
    return n.answer;
}

std::shared_ptr<const ToyEnv> ToyBackend::env_for(const std::string& question_text) const {
    {
        std::shared_lock lock(cache_mutex_);
        if (auto it = cache_.find(question_text); it != cache_.end()) return it->second;
    }
    auto env = std::make_shared<const ToyEnv>(ToyProblem::parse(question_text), options_.policy);
    std::unique_lock lock(cache_mutex_);
    return cache_.emplace(question_text, std::move(env)).first->second;
}

std::vector<Proposal> ToyBackend::propose_steps(const ProposalRequest& request) const {
    validate_request(request);
    auto env = env_for(request.state.question_text);
    ToyNode node = env->locate(request.state);
    auto table = env->policy_table(node);
    if (table.empty()) throw ContractViolation("toy state has no legal moves");

    std::vector<ToyMove> picked;
    const auto n = std::min(table.size(), static_cast<std::size_t>(request.n_samples));
    if (request.temperature == 0.0) {
        std::stable_sort(table.begin(), table.end(),
                         [](const ToyMove& a, const ToyMove& b) { return a.probability > b.probability; });
        picked.assign(table.begin(), table.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        Rng rng(mix_seed(request.seed.value_or(0), node.path_hash));
        std::vector<double> weight;
        double top = -INFINITY;
        for (const auto& m : table) top = std::max(top, std::log(m.probability) / request.temperature);
        for (const auto& m : table) weight.push_back(std::exp(std::log(m.probability) / request.temperature - top));
        while (picked.size() < n) {
            double total = 0.0;
            for (double w : weight) total += w;
            double u = rng.uniform() * total;
            std::size_t i = 0;
            for (; i + 1 < weight.size(); ++i) {
                if (u < weight[i]) break;
                u -= weight[i];
            }
            picked.push_back(table[i]);
            table.erase(table.begin() + static_cast<std::ptrdiff_t>(i));
            weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }

    std::vector<Proposal> out;
    out.reserve(picked.size());
    for (const auto& m : picked) out.push_back({env->render(node, m.id, m.probability)});
    return out;
}

ValuePrediction ToyBackend::predict_value(const ReasoningState& state) const {
    if (options_.mode == ToyValueMode::Cold) return {0.0};
    auto env = env_for(state.question_text);
    return {env->true_value(env->locate(state), options_.t_max)};
}

double toy_true_value(const ReasoningState& state, int t_max, ToyPolicy policy) {
    ToyEnv env(ToyProblem::parse(state.question_text), policy);
    return env.true_value(env.locate(state), t_max);
}

std::vector<ToyProblem> toy_corpus(std::size_t n, std::uint64_t seed) {
    constexpr int kTMax = 8;
    std::vector<ToyOp> catalogue;
    for (int k = 1; k <= 9; ++k) catalogue.push_back({'+', k});
    for (int k = 1; k <= 5; ++k) catalogue.push_back({'-', k});
    for (int k = 2; k <= 3; ++k) catalogue.push_back({'*', k});
    for (int k = 2; k <= 3; ++k) catalogue.push_back({'/', k});

    std::vector<ToyProblem> corpus;
    corpus.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, i));
        ToyProblem p;
        char id[32];
        std::snprintf(id, sizeof id, "toy-%04zu", i);
        p.id = id;
        p.start = rng.between(1, 9);
        p.horizon = static_cast<int>(rng.between(2, 6));
        auto ops = catalogue;
        rng.shuffle(ops);
        ops.resize(static_cast<std::size_t>(rng.between(2, 4)));
        p.ops = ops;

        ToyEnv env(p);
        const std::int64_t mode = *env.mode_answer(kTMax);
        p.target = mode;
        // Problem 0 always puts the target off the most-likely path.
        const bool on_mode = i != 0 && rng.uniform() < 0.3;
        for (int attempt = 0; !on_mode && attempt < 64; ++attempt) {
            ToyNode node = env.root();
            while (!env.is_terminal(node, kTMax)) {
                auto table = env.policy_table(node);
                node = env.child(node, table[rng.below(table.size())].id);
            }
            if (node.answer != mode) {
                p.target = node.answer;
                break;
            }
        }
        corpus.push_back(std::move(p));
    }
    return corpus;
}

} // namespace rsp
