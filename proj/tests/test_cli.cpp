#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsp/commands.hpp"
#include "rsp/errors.hpp"
#include "rsp/remote_backend.hpp"
#include "rsp/snapshot.hpp"
#include "rsp/toyenv.hpp"

using namespace rsp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("rsp_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ToyBackend toy(ToyValueMode mode) {
    ToyBackendOptions o;
    o.mode = mode;
    return ToyBackend(o);
}

} // namespace

TEST_CASE("defaults mirror the reference hyperparameters") {
    RunConfig c;
    CHECK(c.search.c_puct == 1.25);
    CHECK(c.search.n_simulations == 40);
    CHECK(c.search.b2_expansion == 5);
    CHECK(c.search.t_max == 8);
    CHECK(c.trees_per_question == 10);
    CHECK(c.max_pos == 4);
    CHECK(c.max_neg == 4);
    CHECK(c.solve_temperature() == 1.0);
    c.strategy = Strategy::Mcts;
    CHECK(c.solve_temperature() == 0.6);
    c.temperature = 0.3;
    CHECK(c.solve_temperature() == 0.3);
    CHECK(c.generate_temperature() == 0.3);
}

TEST_CASE("settings and config files") {
    TempDir dir("config");
    RunConfig c;
    spit(dir.path / "run.cfg", "# Table of knobs\nc_puct = 2.0\nN=12\n\nstrategy = mcts  # inline\nB1 = 2\nseed = 9\n");
    apply_config_file(c, (dir.path / "run.cfg").string());
    CHECK(c.search.c_puct == 2.0);
    CHECK(c.search.n_simulations == 12);
    CHECK(c.strategy == Strategy::Mcts);
    CHECK(c.b1 == 2);
    CHECK(c.seed == 9);

    // Flags are applied after the file and win.
    apply_setting(c, "c_puct", "0.5");
    CHECK(c.search.c_puct == 0.5);

    CHECK_THROWS_AS(apply_setting(c, "nonsense", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(c, "N", "many"), ConfigError);
    CHECK_THROWS_AS(apply_setting(c, "strategy", "dfs"), ConfigError);
    spit(dir.path / "bad.cfg", "c_puct = 1\nwhat\n");
    try {
        apply_config_file(c, (dir.path / "bad.cfg").string());
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_config_file(c, (dir.path / "missing.cfg").string()), ConfigError);
}

TEST_CASE("dataset parsing reports line numbers") {
    std::istringstream good("{\"id\":\"a\",\"question\":\"Q1\",\"gold_answer\":\"1\"}\n\n{\"id\":\"b\",\"question\":\"Q2\"}\n");
    auto recs = read_dataset(good);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].gold_answer == std::optional<std::string>("1"));
    CHECK_FALSE(recs[1].gold_answer);

    std::istringstream bad("{\"id\":\"a\",\"question\":\"Q1\"}\n{\"id\":\"b\"}\n");
    try {
        read_dataset(bad);
        FAIL("expected a DatasetError");
    } catch (const DatasetError& e) {
        CHECK(e.line() == 2);
    }
    std::istringstream junk("{\"id\":\"a\",\"question\":\"Q1\"}\n\nnot json\n");
    try {
        read_dataset(junk);
        FAIL("expected a DatasetError");
    } catch (const DatasetError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(read_dataset_file("/nonexistent/data.jsonl"), DatasetError);

    std::ostringstream out;
    auto corpus = toy_dataset(toy_corpus(3, 1));
    write_dataset(corpus, out);
    std::istringstream back(out.str());
    auto again = read_dataset(back);
    REQUIRE(again.size() == 3);
    CHECK(again[2].question == corpus[2].question);
    CHECK(again[2].gold_answer == corpus[2].gold_answer);
}

TEST_CASE("solve on an empty dataset") {
    RunConfig c;
    auto backend = toy(ToyValueMode::Oracle);
    auto r = cmd_solve({}, c, backend);
    CHECK(r.summary.records == 0);
    CHECK(r.reports.empty());
    CHECK_FALSE(summary_to_json(r.summary, c).contains("accuracy"));
}

TEST_CASE("solve without gold answers omits accuracy") {
    auto recs = toy_dataset(toy_corpus(4, 2));
    for (auto& r : recs) r.gold_answer.reset();
    RunConfig c;
    auto backend = toy(ToyValueMode::Oracle);
    auto r = cmd_solve(recs, c, backend);
    CHECK(r.reports.size() == 4);
    CHECK_FALSE(r.summary.accuracy);
    auto j = summary_to_json(r.summary, c);
    CHECK_FALSE(j.contains("accuracy"));
    auto row = report_to_json(r.reports[0], recs[0]);
    CHECK(row["gold_answer"].is_null());
    CHECK(row["correct"].is_null());
}

TEST_CASE("solve is deterministic and independent of jobs") {
    auto recs = toy_dataset(toy_corpus(12, 5));
    auto backend = toy(ToyValueMode::Oracle);
    for (Strategy s : {Strategy::Greedy, Strategy::Sbs, Strategy::Mcts, Strategy::Maj}) {
        RunConfig c;
        c.strategy = s;
        c.seed = 3;
        auto a = cmd_solve(recs, c, backend);
        c.jobs = 4;
        auto b = cmd_solve(recs, c, backend);
        REQUIRE(a.reports.size() == b.reports.size());
        for (std::size_t i = 0; i < a.reports.size(); ++i) {
            CHECK(a.reports[i].final_state.rendered() == b.reports[i].final_state.rendered());
            CHECK(a.reports[i].strategy == to_string(s));
        }
        CHECK(a.summary.accuracy == b.summary.accuracy);
    }
}

TEST_CASE("solve with SBS beats greedy on the toy corpus") {
    auto recs = toy_dataset(toy_corpus(200, 7));
    auto backend = toy(ToyValueMode::Oracle);
    RunConfig c;
    c.strategy = Strategy::Greedy;
    auto greedy = cmd_solve(recs, c, backend);
    c.strategy = Strategy::Sbs;
    auto sbs = cmd_solve(recs, c, backend);
    REQUIRE(greedy.summary.accuracy);
    REQUIRE(sbs.summary.accuracy);
    CHECK(*sbs.summary.accuracy >= *greedy.summary.accuracy);
    CHECK(*sbs.summary.accuracy <= 1.0);
}

TEST_CASE("backend failures become per-question entries") {
    auto recs = toy_dataset(toy_corpus(2, 0));
    RunConfig c;
    c.backend = "http://127.0.0.1:1";
    auto backend = make_backend(c, ToyValueMode::Oracle);
    auto r = cmd_solve(recs, c, *backend);
    CHECK(r.backend_failures == 2);
    REQUIRE(r.reports.size() == 2);
    for (const auto& rep : r.reports) CHECK(rep.failure);
    CHECK(*r.summary.accuracy == 0.0);
}

TEST_CASE("backend selection and the URL override") {
    RunConfig c;
    CHECK(dynamic_cast<ToyBackend*>(make_backend(c, ToyValueMode::Cold).get()));
    c.backend = "remote";
    CHECK_THROWS_AS(make_backend(c, ToyValueMode::Cold), ConfigError);
    c.backend_url = "http://localhost:9";
    auto plain = make_backend(c, ToyValueMode::Cold);
    CHECK(dynamic_cast<RemoteBackend*>(plain.get())->url() == "http://localhost:9");
    setenv("RSP_BACKEND_URL", "http://127.0.0.1:7777", 1);
    auto over = make_backend(c, ToyValueMode::Cold);
    unsetenv("RSP_BACKEND_URL");
    CHECK(dynamic_cast<RemoteBackend*>(over.get())->url() == "http://127.0.0.1:7777");
    c.backend = "gpu";
    CHECK_THROWS_AS(make_backend(c, ToyValueMode::Cold), ConfigError);
}

TEST_CASE("generate requires gold answers before doing any work") {
    TempDir dir("nogold");
    auto recs = toy_dataset(toy_corpus(3, 0));
    recs[1].gold_answer.reset();
    RunConfig c;
    auto backend = toy(ToyValueMode::Cold);
    const auto dest = dir.path / "out.jsonl";
    try {
        cmd_generate(recs, c, backend, dest.string());
        FAIL("expected a DatasetError");
    } catch (const DatasetError& e) {
        CHECK(std::string(e.what()).find(recs[1].id) != std::string::npos);
    }
    CHECK_FALSE(fs::exists(dest));
}

TEST_CASE("generate is byte-identical across runs and job counts") {
    TempDir dir("determinism");
    auto recs = toy_dataset(toy_corpus(6, 4));
    RunConfig c;
    c.trees_per_question = 3;
    auto backend = toy(ToyValueMode::Cold);
    const auto a = dir.path / "a.jsonl", b = dir.path / "b.jsonl";
    auto ma = cmd_generate(recs, c, backend, a.string());
    c.jobs = 3;
    auto mb = cmd_generate(recs, c, backend, b.string());
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(manifest_path_for(a.string())) == slurp(manifest_path_for(b.string())));
    CHECK(ma.records == mb.records);
    CHECK(ma.records == ma.positives + ma.negatives);
    CHECK(ma.records > 0);
}

TEST_CASE("an unsolvable question contributes no positives") {
    TempDir dir("unsolved");
    auto recs = toy_dataset(toy_corpus(3, 4));
    recs[1].gold_answer = "123456789";
    RunConfig c;
    c.trees_per_question = 2;
    auto backend = toy(ToyValueMode::Cold);
    const auto dest = dir.path / "out.jsonl";
    cmd_generate(recs, c, backend, dest.string());
    std::istringstream lines(slurp(dest));
    std::string line;
    int seen = 0;
    while (std::getline(lines, line)) {
        auto j = nlohmann::json::parse(line);
        if (j["question_id"] != recs[1].id) continue;
        ++seen;
        CHECK(j["label"] == "incorrect");
    }
    CHECK(seen > 0);
}

TEST_CASE("generate on corpus(20) keeps positives and negatives roughly balanced") {
    TempDir dir("ratio");
    auto recs = toy_dataset(toy_corpus(20, 0));
    RunConfig c;
    auto backend = toy(ToyValueMode::Cold);
    auto m = cmd_generate(recs, c, backend, (dir.path / "out.jsonl").string());
    auto ratio = m.pos_neg_ratio();
    REQUIRE(ratio);
    MESSAGE("positives=" << m.positives << " negatives=" << m.negatives << " ratio=" << *ratio);
    CHECK(*ratio >= 0.5);
    CHECK(*ratio <= 2.0);
}

TEST_CASE("inspect reports") {
    TempDir dir("inspect");
    auto p = toy_corpus(1, 3).front();
    auto backend = toy(ToyValueMode::Cold);

    SearchConfig one;
    one.n_simulations = 1;
    auto single = build_tree(p.root_state(), p.gold(), backend, one, 0);
    CHECK(inspect_tree(single, 1).expanded_layers == 1);

    SearchConfig many;
    many.n_simulations = 400;
    auto tree = build_tree(p.root_state(), p.gold(), backend, many, 0);
    auto rep = inspect_tree(tree, 2);
    std::size_t correct_edge = 0, correct_total = 0, wrong_edge = 0, wrong_total = 0;
    for (std::size_t i = 0; i < rep.q_histogram_correct.size(); ++i) {
        correct_total += rep.q_histogram_correct[i];
        wrong_total += rep.q_histogram_incorrect[i];
    }
    correct_edge = rep.q_histogram_correct.back();
    wrong_edge = rep.q_histogram_incorrect.front();
    CHECK(wrong_total > 0);
    CHECK(wrong_edge == wrong_total);
    CHECK(correct_edge == correct_total);
    CHECK(rep.sweep.final_candidates.size() <= 2);

    const auto snap = dir.path / "tree.json";
    write_snapshot(tree, snap.string());
    const std::string text = cmd_inspect(snap.string(), 2);
    CHECK(text.find(p.id) != std::string::npos);
    CHECK(text == rep.render(tree));

    spit(dir.path / "empty.json", "");
    CHECK_THROWS_AS(cmd_inspect((dir.path / "empty.json").string(), 1), SchemaError);
    spit(dir.path / "wrong.json", "{\"schema_version\": 999}");
    CHECK_THROWS_AS(cmd_inspect((dir.path / "wrong.json").string(), 1), SchemaError);
}
