#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rsp/datagen.hpp"
#include "rsp/errors.hpp"
#include "rsp/toyenv.hpp"
#include "support/scripted_backend.hpp"

using namespace rsp;
using rsp::testing::labelled_answer;
using rsp::testing::labelled_step;
using rsp::testing::ScriptedBackend;

namespace {

namespace fs = std::filesystem;

SolutionPath path_of(std::vector<Step> steps, bool correct, const std::string& id = "q") {
    SolutionPath p;
    p.question_id = id;
    p.question = "Q?\n";
    p.steps = std::move(steps);
    p.predicted_answer = p.steps.back().extracted_answer;
    p.correct = correct;
    p.per_step_targets.assign(p.steps.size(), 0.0);
    p.per_step_targets.back() = correct ? 1.0 : -1.0;
    return p;
}

// Every code cell fails, yet the final answer happens to be right.
SolutionPath all_errors_path() {
    return path_of({Step::code("Try the formula.", "f(", "SyntaxError", -0.4, true),
                    Step::code("Retry.", "g()", "NameError", -0.4, true), Step::answer("So", "12", -0.2)},
                   true);
}

SolutionPath printed_answer_path() {
    return path_of({Step::code("Multiply.", "print(500*100)", "50000", -0.1), Step::answer("Done.", "$50000$", -0.1)},
                   true);
}

// Code prints the complex roots, but the answer is their sum.
SolutionPath complex_roots_path() {
    return path_of({Step::code("Solve x^2+1=0.", "print(solve(x**2+1))", "[-I, I]", -0.2),
                    Step::answer("The roots sum to zero.", "0", -0.2)},
                   true);
}

SolutionPath mixed_errors_path() {
    return path_of({Step::code("Try.", "f(", "SyntaxError", -0.3, true), Step::code("Again.", "print(2+2)", "4", -0.3),
                    Step::answer("So", "7", -0.3)},
                   true);
}

SolutionPath wrong_path() {
    return path_of({Step::code("Guess.", "print(3)", "3", -0.3), Step::answer("So", "3", -0.3)}, false);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("rsp_datagen_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("harvest yields one labelled path per visited terminal") {
    ScriptedBackend b;
    b.proposals[""] = {labelled_step("a"), labelled_step("b")};
    b.proposals["a"] = {labelled_answer("a1", "1"), labelled_answer("a2", "2"), labelled_answer("a3", "3")};
    b.proposals["b"] = {labelled_answer("b1", "1.0"), labelled_answer("b4", "4")};
    b.values = {{"a", 0.3}, {"b", -0.2}};
    SearchConfig c;
    c.n_simulations = 50;
    std::vector<SearchTree> trees{build_tree(make_question("q", "Q?\n"), make_answer("1"), b, c, 0)};
    REQUIRE(trees[0].exhausted());

    auto paths = harvest_paths(trees);
    REQUIRE(paths.size() == 5);
    int correct = 0;
    const auto targets = q_targets(trees[0]);
    for (const auto& p : paths) {
        correct += p.correct;
        REQUIRE(p.steps.size() == 2);
        REQUIRE(p.per_step_targets.size() == 2);
        const auto ids = trees[0].path_to(p.path_index);
        CHECK(p.per_step_targets[0] == trees[0].node(ids[1]).stats.q);
        CHECK(p.per_step_targets[0] == targets.at(ids[1]));
        CHECK(p.per_step_targets[1] == (p.correct ? 1.0 : -1.0));
        CHECK(p.tree_id == 0);
    }
    CHECK(correct == 2);
}

TEST_CASE("harvest ignores trees without terminals and needs gold") {
    ScriptedBackend b;
    b.proposals[""] = {labelled_step("a")};
    b.proposals["a"] = {labelled_step("b")};
    SearchConfig c;
    c.n_simulations = 1;
    std::vector<SearchTree> trees{build_tree(make_question("q", "Q?\n"), make_answer("1"), b, c, 0)};
    CHECK(harvest_paths(trees).empty());

    trees[0].gold.reset();
    CHECK_THROWS_AS(harvest_paths(trees), ContractViolation);
}

TEST_CASE("harvested paths satisfy the target invariants on the toy corpus") {
    ToyBackendOptions o;
    o.mode = ToyValueMode::Cold;
    ToyBackend backend(o);
    for (const auto& p : toy_corpus(5, 2)) {
        std::vector<SearchTree> trees;
        for (std::uint64_t s = 0; s < 3; ++s) trees.push_back(build_tree(p.root_state(), p.gold(), backend, SearchConfig{}, s));
        for (const auto& path : harvest_paths(trees)) {
            CHECK(path.per_step_targets.size() == path.steps.size());
            for (double t : path.per_step_targets) CHECK(std::abs(t) <= 1.0);
            CHECK(std::abs(path.per_step_targets.back()) == 1.0);
        }
    }
}

TEST_CASE("classification of the reference examples") {
    CHECK(classify_solution(all_errors_path()) == FilterLevel::Rejected);
    CHECK(classify_solution(printed_answer_path()) == FilterLevel::Level1);
    CHECK(classify_solution(complex_roots_path()) == FilterLevel::Level2);
    CHECK(classify_solution(mixed_errors_path()) == FilterLevel::Level3);
    CHECK(classify_solution(wrong_path()) == FilterLevel::Incorrect);

    auto wrong_errors = all_errors_path();
    wrong_errors.correct = false;
    CHECK(classify_solution(wrong_errors) == FilterLevel::Rejected);
}

TEST_CASE("filter drops duplicates and all-error paths, keeping order") {
    std::vector<SolutionPath> in{printed_answer_path(), all_errors_path(), complex_roots_path(), wrong_path(),
                                 printed_answer_path(), wrong_path(), mixed_errors_path()};
    in[4].tree_id = 7;
    auto out = filter_solutions(in);
    REQUIRE(out.size() == 4);
    CHECK(out[0].filter_level == FilterLevel::Level1);
    CHECK(out[0].tree_id == 0);
    CHECK(out[1].filter_level == FilterLevel::Level2);
    CHECK(out[2].filter_level == FilterLevel::Incorrect);
    CHECK(out[3].filter_level == FilterLevel::Level3);
    // The incorrect path is otherwise untouched.
    CHECK(out[2].solution_text() == wrong_path().solution_text());
    CHECK(out[2].per_step_targets == wrong_path().per_step_targets);

    std::set<std::string> texts;
    for (const auto& p : out) CHECK(texts.insert(p.solution_text()).second);
    CHECK(filter_solutions({}).empty());
}

TEST_CASE("selection prefers higher levels and respects caps") {
    std::vector<SolutionPath> pool;
    for (int i = 0; i < 6; ++i) {
        auto p = printed_answer_path();
        p.tree_id = i;
        p.filter_level = FilterLevel::Level1;
        pool.push_back(p);
    }
    for (int i = 0; i < 2; ++i) {
        auto p = complex_roots_path();
        p.tree_id = 10 + i;
        p.filter_level = FilterLevel::Level2;
        pool.push_back(p);
    }
    auto chosen = select_for_round(pool, 4, 4, 1);
    REQUIRE(chosen.size() == 4);
    for (const auto& p : chosen) CHECK(p.filter_level == FilterLevel::Level1);

    std::vector<SolutionPath> mixed;
    for (int i = 0; i < 2; ++i) {
        auto p = complex_roots_path();
        p.tree_id = i;
        p.filter_level = FilterLevel::Level2;
        mixed.push_back(p);
    }
    for (int i = 0; i < 10; ++i) {
        auto p = wrong_path();
        p.tree_id = 100 + i;
        p.filter_level = FilterLevel::Incorrect;
        mixed.push_back(p);
    }
    auto picked = select_for_round(mixed, 4, 4, 3);
    REQUIRE(picked.size() == 6);
    CHECK(picked[0].correct);
    CHECK(picked[1].correct);
    for (std::size_t i = 2; i < 6; ++i) CHECK_FALSE(picked[i].correct);

    auto again = select_for_round(mixed, 4, 4, 3);
    for (std::size_t i = 0; i < picked.size(); ++i) CHECK(again[i].tree_id == picked[i].tree_id);

    // Different seeds eventually pick different negatives.
    bool differs = false;
    for (std::uint64_t s = 4; s < 20 && !differs; ++s) {
        auto other = select_for_round(mixed, 4, 4, s);
        for (std::size_t i = 2; i < 6; ++i) differs |= other[i].tree_id != picked[i].tree_id;
    }
    CHECK(differs);
    CHECK_THROWS_AS(select_for_round(mixed, -1, 4, 0), ContractViolation);
}

TEST_CASE("value loss") {
    std::vector<double> t{1.0, -1.0}, p{0.5, -0.5};
    CHECK(value_loss(t, t, 0.1) == 0.0);
    std::vector<double> one{1.0}, zero{0.0};
    CHECK(value_loss(one, zero, 1.0) == 1.0);
    CHECK(value_loss(t, p, 0.1) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(value_loss(t, p, 0.2) == doctest::Approx(2 * value_loss(t, p, 0.1)));
    CHECK_THROWS_AS(value_loss(t, one, 0.1), ContractViolation);
}

TEST_CASE("export writes one line per path plus a manifest") {
    TempDir dir;
    const auto dest = (dir.path / "data.jsonl").string();
    DatasetManifest m;
    export_jsonl({}, m, dest);
    CHECK(slurp(dest).empty());
    CHECK(manifest_path_for(dest) == (dir.path / "data.manifest.json").string());
    auto manifest = nlohmann::json::parse(slurp(manifest_path_for(dest)));
    CHECK(manifest["records"] == 0);
    CHECK(manifest.size() == 6);
    CHECK(manifest["pos_neg_ratio"].is_null());

    auto p = printed_answer_path();
    p.per_step_targets = {0.123456789012345678, 1.0};
    p.filter_level = FilterLevel::Level1;
    p.seed = 42;
    std::vector<SolutionPath> paths{p, wrong_path()};
    m.records = 2;
    m.positives = 1;
    m.negatives = 1;
    export_jsonl(paths, m, dest);
    const std::string first = slurp(dest);
    std::istringstream lines(first);
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(lines, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["steps"][0]["target_value"].get<double>() == p.per_step_targets[0]);
    CHECK(rows[0]["steps"][0]["text"] == p.steps[0].text);
    CHECK(rows[0]["label"] == "correct");
    CHECK(rows[0]["filter_level"] == "level1");
    CHECK(rows[0]["seed"] == 42);
    CHECK(rows[1]["label"] == "incorrect");
    CHECK(nlohmann::json::parse(slurp(manifest_path_for(dest)))["pos_neg_ratio"] == 1.0);

    export_jsonl(paths, m, dest);
    CHECK(slurp(dest) == first);

    CHECK_THROWS_AS(export_jsonl(paths, m, (dir.path / "missing" / "x.jsonl").string()), IoError);
}
