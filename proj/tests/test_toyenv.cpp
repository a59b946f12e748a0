#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "rsp/errors.hpp"
#include "rsp/mcts.hpp"
#include "rsp/toyenv.hpp"

using namespace rsp;

namespace {

ToyProblem problem(std::int64_t start, std::vector<ToyOp> ops, int horizon, std::int64_t target) {
    ToyProblem p;
    p.id = "p";
    p.start = start;
    p.ops = std::move(ops);
    p.horizon = horizon;
    p.target = target;
    return p;
}

constexpr ToyPolicy kUniform{0.0};

// Visits every node reachable from the root.
void for_each_node(const ToyEnv& env, int t_max, const std::function<void(const ToyNode&)>& f) {
    std::function<void(const ToyNode&)> walk = [&](const ToyNode& n) {
        f(n);
        if (env.is_terminal(n, t_max)) return;
        for (const auto& m : env.policy_table(n)) walk(env.child(n, m.id));
    };
    walk(env.root());
}

} // namespace

TEST_CASE("question text round-trips through parse") {
    auto p = problem(7, {{'+', 3}, {'*', 2}, {'/', 3}, {'-', 1}}, 4, 11);
    CHECK(p.question() ==
          "Start from 7. Each step applies one of the operations +3, *2, /3, -1 to the running value, and at most 4 "
          "steps may be taken. Reach 11 and report the final value.\n");
    auto back = ToyProblem::parse(p.question(), "p");
    CHECK(back == p);
    CHECK(p.branching() == 5);
    CHECK(p.operand_pool() == std::vector<int>{1, 2, 3});
    CHECK_THROWS_AS(ToyProblem::parse("What is 2 + 2?"), ContractViolation);
}

TEST_CASE("policy tables are distributions") {
    for (const auto& p : toy_corpus(20, 3)) {
        ToyEnv env(p);
        for_each_node(env, 8, [&](const ToyNode& n) {
            if (env.is_terminal(n, 8)) {
                return;
            }
            double total = 0.0;
            for (const auto& m : env.policy_table(n)) {
                CHECK(m.probability > 0.0);
                CHECK(m.probability <= 1.0);
                total += m.probability;
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        });
    }
}

TEST_CASE("the first move is never an answer and the horizon forces one") {
    auto p = problem(2, {{'+', 1}, {'*', 2}}, 2, 6);
    ToyEnv env(p);
    auto root = env.policy_table(env.root());
    CHECK(root.size() == 2);
    auto mid = env.policy_table(env.child(env.root(), 0));
    CHECK(mid.size() == 3);
    auto last = env.policy_table(env.child(env.child(env.root(), 0), 1));
    REQUIRE(last.size() == 1);
    CHECK(last[0].id == env.answer_move());
    CHECK(last[0].probability == 1.0);
}

TEST_CASE("inexact division errors and keeps the value") {
    auto p = problem(7, {{'/', 2}, {'+', 1}}, 3, 4);
    ToyEnv env(p);
    auto s = env.state_of({0});
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].contains_code);
    CHECK(s.steps[0].code_errored);
    CHECK(s.steps[0].code_output == std::optional<std::string>("AssertionError"));
    CHECK(env.child(env.root(), 0).value == 7);

    auto ok = env.state_of({1, 0});
    CHECK_FALSE(ok.steps[1].code_errored);
    CHECK(ok.steps[1].code_output == std::optional<std::string>("4"));
    CHECK(env.child(env.child(env.root(), 1), 0).value == 4);
}

TEST_CASE("locate replays rendered states and rejects forgeries") {
    auto p = problem(3, {{'+', 2}, {'*', 3}}, 3, 15);
    ToyEnv env(p);
    auto s = env.state_of({1, 0, 2});
    auto n = env.locate(s);
    CHECK(n.answered);
    CHECK(n.answer == 11);
    CHECK(env.reward(n) == -1.0);

    auto forged = s;
    forged.steps[0].text.replace(forged.steps[0].text.find("9"), 1, "8");
    CHECK_THROWS_AS(env.locate(forged), ContractViolation);
}

TEST_CASE("toy_true_value examples") {
    // Terminal correct state.
    auto sure = problem(3, {{'+', 1}}, 1, 4);
    ToyEnv sure_env(sure, kUniform);
    CHECK(toy_true_value(sure_env.state_of({0, 1}), 8, kUniform) == 1.0);

    // Two equiprobable children, one always correct, one always wrong.
    auto coin = problem(1, {{'+', 1}, {'+', 2}}, 1, 2);
    CHECK(toy_true_value(coin.root_state(), 8, kUniform) == doctest::Approx(0.0).epsilon(1e-15));

    // Start 1, ops +1/+2, two steps, target 3. From 2: +1 wins, +2 and
    // answering lose, so -1/3. From 3: +1 and +2 lose, answering wins, so
    // -1/3. The root averages the two.
    auto two = problem(1, {{'+', 1}, {'+', 2}}, 2, 3);
    ToyEnv env(two, kUniform);
    CHECK(toy_true_value(env.state_of({0}), 8, kUniform) == doctest::Approx(-1.0 / 3.0));
    CHECK(toy_true_value(env.state_of({1}), 8, kUniform) == doctest::Approx(-1.0 / 3.0));
    CHECK(toy_true_value(two.root_state(), 8, kUniform) == doctest::Approx(-1.0 / 3.0));

    // Depth cap below the horizon truncates: t_max = 1 leaves no room to answer.
    CHECK(toy_true_value(two.root_state(), 1, kUniform) == -1.0);
}

TEST_CASE("toy_true_value satisfies the Bellman identity") {
    for (const auto& p : toy_corpus(15, 8)) {
        ToyEnv env(p);
        for_each_node(env, 8, [&](const ToyNode& n) {
            if (env.is_terminal(n, 8)) {
                CHECK(env.true_value(n, 8) == env.reward(n));
                return;
            }
            double sum = 0.0;
            for (const auto& m : env.policy_table(n)) sum += m.probability * env.true_value(env.child(n, m.id), 8);
            CHECK(env.true_value(n, 8) == doctest::Approx(sum).epsilon(1e-12));
        });
    }
}

TEST_CASE("oracle predictions equal the true value") {
    ToyBackend oracle;
    for (const auto& p : toy_corpus(10, 12)) {
        ToyEnv env(p);
        Rng rng(hash_text(p.id));
        std::vector<int> moves;
        ToyNode n = env.root();
        while (!env.is_terminal(n, 8)) {
            auto state = env.state_of(moves);
            CHECK(oracle.predict_value(state).value == toy_true_value(state, 8));
            auto table = env.policy_table(n);
            const int m = table[rng.below(table.size())].id;
            moves.push_back(m);
            n = env.child(n, m);
        }
    }
}

TEST_CASE("rollouts converge to the true value") {
    ToyBackend backend;
    for (const auto& p : toy_corpus(4, 30)) {
        const double truth = toy_true_value(p.root_state(), 8);
        const double est = mc_rollout_estimate(p.root_state(), p.gold(), backend, 10000, 1);
        CHECK(std::fabs(est - truth) <= 0.03);
    }
}

TEST_CASE("propose follows the policy table") {
    auto p = problem(2, {{'+', 1}, {'+', 2}, {'*', 2}, {'-', 1}}, 3, 4);
    ToyBackendOptions o;
    o.policy = kUniform;
    ToyBackend uniform(o);
    auto four = uniform.propose_steps({p.root_state(), 4, 1.0, 0});
    REQUIRE(four.size() == 4);
    for (auto& pr : four) CHECK(pr.step.prior() == doctest::Approx(0.25).epsilon(1e-12));

    auto three = problem(2, {{'+', 1}, {'+', 2}, {'*', 2}}, 3, 4);
    CHECK(uniform.propose_steps({three.root_state(), 10, 1.0, 0}).size() == 3);

    // Sampling frequency of the first proposal matches the table at T = 1.
    ToyBackend sharp;
    ToyEnv env(p);
    auto table = env.policy_table(env.root());
    std::vector<int> counts(table.size(), 0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto pr = sharp.propose_steps({p.root_state(), 1, 1.0, static_cast<std::uint64_t>(i)});
        for (std::size_t k = 0; k < table.size(); ++k)
            if (pr[0].step.text == env.render(env.root(), table[k].id, table[k].probability).text) ++counts[k];
    }
    for (std::size_t k = 0; k < table.size(); ++k)
        CHECK(std::fabs(counts[k] / static_cast<double>(n) - table[k].probability) < 0.015);
}

TEST_CASE("corpus is deterministic and solvable") {
    auto a = toy_corpus(200, 7);
    auto b = toy_corpus(200, 7);
    CHECK(a == b);
    CHECK(a != toy_corpus(200, 8));
    bool greedy_wrong_but_solvable = false;
    bool has_division = false;
    for (const auto& p : a) {
        ToyEnv env(p);
        CHECK(p.branching() <= 5);
        CHECK(p.horizon <= 6);
        CHECK(env.count_states(8) <= 100000);
        CHECK(env.has_correct_path(8));
        if (env.mode_answer(8) != p.target) greedy_wrong_but_solvable = true;
        for (const auto& op : p.ops) has_division |= op.symbol == '/';
    }
    CHECK(greedy_wrong_but_solvable);
    CHECK(has_division);
    CHECK(toy_corpus(1, 7).front().id == "toy-0000");
}

TEST_CASE("some corpus problems have greedy paths that miss") {
    // Problem 0 always puts the target off the mode path.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto p = toy_corpus(1, seed).front();
        ToyEnv env(p);
        CHECK(env.mode_answer(8) != p.target);
        CHECK(env.has_correct_path(8));
    }
}
