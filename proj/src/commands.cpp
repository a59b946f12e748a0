#include "rsp/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "rsp/errors.hpp"
#include "rsp/remote_backend.hpp"
#include "rsp/rng.hpp"
#include "rsp/snapshot.hpp"

namespace rsp {

using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& value, long long lo) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
    if (used != value.size()) throw ConfigError(key + ": expected an integer, got '" + value + "'");
    if (v < lo) throw ConfigError(key + ": must be >= " + std::to_string(lo) + ", got " + value);
    return v;
}

double to_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    if (used != value.size() || !std::isfinite(v)) throw ConfigError(key + ": expected a number, got '" + value + "'");
    return v;
}

double non_negative(const std::string& key, const std::string& value) {
    double v = to_double(key, value);
    if (v < 0) throw ConfigError(key + ": must be >= 0, got " + value);
    return v;
}

Strategy parse_strategy(const std::string& value) {
    if (value == "greedy") return Strategy::Greedy;
    if (value == "sbs") return Strategy::Sbs;
    if (value == "mcts") return Strategy::Mcts;
    if (value == "maj" || value == "majority") return Strategy::Maj;
    throw ConfigError("strategy: expected greedy, sbs, mcts or maj, got '" + value + "'");
}

std::string file_stem_for(const std::string& id) {
    std::string s;
    for (char c : id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s.empty() ? "question" : s;
}

void dump_tree(const SearchTree& tree, const std::string& dir, std::size_t qi, std::size_t ti) {
    std::filesystem::create_directories(dir);
    const std::string name = std::to_string(qi) + "_" + file_stem_for(tree.question.question_id) + "_tree" +
                             std::to_string(ti) + ".json";
    write_snapshot(tree, (std::filesystem::path(dir) / name).string());
}

} // namespace

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Sbs: return "sbs";
    case Strategy::Mcts: return "mcts";
    case Strategy::Maj: return "maj";
    }
    return "unknown";
}

double RunConfig::solve_temperature() const {
    if (temperature) return *temperature;
    return strategy == Strategy::Mcts ? 0.6 : 1.0;
}

double RunConfig::generate_temperature() const { return temperature.value_or(1.0); }

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "backend") {
        if (value.empty()) throw ConfigError("backend: empty value");
        c.backend = value;
    } else if (key == "backend_url") {
        c.backend_url = value;
    } else if (key == "toy_value") {
        if (value == "cold") c.toy_value = ToyValueMode::Cold;
        else if (value == "oracle") c.toy_value = ToyValueMode::Oracle;
        else throw ConfigError("toy_value: expected cold or oracle, got '" + value + "'");
    } else if (key == "c_puct") {
        c.search.c_puct = non_negative(key, value);
    } else if (key == "N" || key == "n_simulations" || key == "simulations") {
        c.search.n_simulations = static_cast<int>(to_int(key, value, 1));
    } else if (key == "B2" || key == "b2") {
        c.search.b2_expansion = static_cast<int>(to_int(key, value, 1));
    } else if (key == "T" || key == "t_max" || key == "max_depth") {
        c.search.t_max = static_cast<int>(to_int(key, value, 1));
    } else if (key == "q_init") {
        c.search.q_init = to_double(key, value);
    } else if (key == "strategy") {
        c.strategy = parse_strategy(value);
    } else if (key == "B1" || key == "b1") {
        c.b1 = static_cast<int>(to_int(key, value, 1));
    } else if (key == "k") {
        c.k = static_cast<int>(to_int(key, value, 1));
    } else if (key == "temperature") {
        c.temperature = non_negative(key, value);
    } else if (key == "round") {
        c.round = static_cast<int>(to_int(key, value, 1));
    } else if (key == "trees_per_question") {
        c.trees_per_question = static_cast<int>(to_int(key, value, 1));
    } else if (key == "max_pos") {
        c.max_pos = static_cast<int>(to_int(key, value, 0));
    } else if (key == "max_neg") {
        c.max_neg = static_cast<int>(to_int(key, value, 0));
    } else if (key == "beta") {
        c.beta = non_negative(key, value);
    } else if (key == "seed") {
        c.seed = static_cast<std::uint64_t>(to_int(key, value, 0));
    } else if (key == "jobs") {
        c.jobs = static_cast<int>(to_int(key, value, 1));
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

void apply_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
        try {
            apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

std::unique_ptr<PolicyValueBackend> make_backend(const RunConfig& config, ToyValueMode default_toy_value) {
    if (config.backend == "toy") {
        ToyBackendOptions o;
        o.mode = config.toy_value.value_or(default_toy_value);
        o.t_max = config.search.t_max;
        return std::make_unique<ToyBackend>(o);
    }
    std::string url;
    if (config.backend == "remote") {
        url = config.backend_url;
    } else if (config.backend.starts_with("http://") || config.backend.starts_with("https://")) {
        url = config.backend;
    } else {
        throw ConfigError("backend: expected toy, remote or an http(s) URL, got '" + config.backend + "'");
    }
    if (const char* env = std::getenv("RSP_BACKEND_URL"); env && *env) url = env;
    if (url.empty()) throw ConfigError("remote backend needs a URL (backend_url or RSP_BACKEND_URL)");
    return std::make_unique<RemoteBackend>(url);
}

std::vector<DatasetRecord> read_dataset(std::istream& in) {
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(std::string("invalid JSON: ") + e.what(), n);
        }
        if (!j.is_object()) throw DatasetError("record must be a JSON object", n);
        DatasetRecord r;
        if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer()))
            throw DatasetError("missing or invalid \"id\"", n);
        r.id = j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
        if (!j.contains("question") || !j["question"].is_string() || j["question"].get<std::string>().empty())
            throw DatasetError("missing or invalid \"question\"", n);
        r.question = j["question"].get<std::string>();
        if (j.contains("gold_answer") && !j["gold_answer"].is_null()) {
            if (j["gold_answer"].is_string()) r.gold_answer = j["gold_answer"].get<std::string>();
            else if (j["gold_answer"].is_number()) r.gold_answer = j["gold_answer"].dump();
            else throw DatasetError("\"gold_answer\" must be a string or number", n);
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<DatasetRecord> read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot read dataset " + path);
    return read_dataset(in);
}

std::vector<DatasetRecord> toy_dataset(const std::vector<ToyProblem>& problems) {
    std::vector<DatasetRecord> out;
    for (const auto& p : problems) out.push_back({p.id, p.question(), p.gold().raw});
    return out;
}

void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.id;
        j["question"] = r.question;
        if (r.gold_answer) j["gold_answer"] = *r.gold_answer;
        out << j.dump() << '\n';
    }
}

SolveResult cmd_solve(const std::vector<DatasetRecord>& records, const RunConfig& config,
                      const PolicyValueBackend& backend, const std::string& trees_dir) {
    config.search.validate();
    const double temperature = config.solve_temperature();
    if (config.strategy == Strategy::Mcts) {
        SearchConfig sc = config.search;
        sc.temperature = temperature;
        sc.validate();
    }
    SolveResult result;
    result.reports.resize(records.size());
    std::exception_ptr hard_failure;
    std::size_t backend_failures = 0;

#pragma omp parallel for schedule(dynamic, 1) num_threads(config.jobs)
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto question = make_question(records[i].id, records[i].question);
        const std::uint64_t seed = mix_seed(config.seed, i);
        InferenceReport& report = result.reports[i];
        try {
            switch (config.strategy) {
            case Strategy::Greedy:
                report = greedy_decode(question, backend, config.search.t_max);
                break;
            case Strategy::Sbs: {
                SbsOptions o;
                o.b1 = config.b1;
                o.b2 = config.search.b2_expansion;
                o.t_max = config.search.t_max;
                o.temperature = temperature;
                o.seed = seed;
                report = sbs_decode(question, backend, o);
                break;
            }
            case Strategy::Mcts: {
                SearchConfig sc = config.search;
                sc.lambda_mode = LambdaMode::AlwaysModel;
                sc.temperature = temperature;
                SearchTree tree;
                report = mcts_decode(question, backend, sc, config.b1, seed, trees_dir.empty() ? nullptr : &tree);
                if (!trees_dir.empty()) {
#pragma omp critical(rsp_tree_dump)
                    dump_tree(tree, trees_dir, i, 0);
                }
                break;
            }
            case Strategy::Maj:
                report = majority_vote(question, backend, config.k, temperature, seed, config.search.t_max);
                break;
            }
        } catch (const IoError&) {
#pragma omp critical(rsp_solve_failure)
            if (!hard_failure) hard_failure = std::current_exception();
        } catch (const Error& e) {
            if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const MalformedStep*>(&e)) {
#pragma omp atomic
                ++backend_failures;
            }
            report = InferenceReport{};
            report.strategy = to_string(config.strategy);
            report.final_state = question;
            report.failure = e.what();
        }
    }
    if (hard_failure) std::rethrow_exception(hard_failure);

    std::vector<std::optional<Answer>> golds;
    for (const auto& r : records) golds.push_back(r.gold_answer ? std::optional(make_answer(*r.gold_answer)) : std::nullopt);
    result.summary = summarize(to_string(config.strategy), result.reports, golds);
    result.backend_failures = backend_failures;
    return result;
}

ordered_json report_to_json(const InferenceReport& report, const DatasetRecord& record) {
    ordered_json j;
    j["id"] = record.id;
    j["strategy"] = report.strategy;
    j["answer"] = report.answer ? ordered_json(report.answer->raw) : ordered_json(nullptr);
    j["gold_answer"] = record.gold_answer ? ordered_json(*record.gold_answer) : ordered_json(nullptr);
    if (record.gold_answer && report.answer)
        j["correct"] = answers_equivalent(*report.answer, make_answer(*record.gold_answer));
    else if (record.gold_answer)
        j["correct"] = false;
    else
        j["correct"] = nullptr;
    j["score"] = report.score;
    j["steps_taken"] = report.steps_taken;
    j["candidates_returned"] = report.candidates_returned;
    j["elapsed_s"] = report.elapsed_seconds;
    j["failure"] = report.failure ? ordered_json(*report.failure) : ordered_json(nullptr);
    j["solution"] = report.final_state.rendered();
    return j;
}

ordered_json summary_to_json(const EvalSummary& s, const RunConfig& c) {
    ordered_json j;
    j["strategy"] = s.strategy;
    j["records"] = s.records;
    if (s.accuracy) j["accuracy"] = *s.accuracy;
    j["avg_time_s"] = s.avg_time_s;
    j["avg_steps"] = s.avg_steps;
    j["n_solutions"] = s.n_solutions;
    j["failures"] = s.failures;
    j["seed"] = c.seed;
    ordered_json cfg;
    cfg["backend"] = c.backend;
    cfg["c_puct"] = c.search.c_puct;
    cfg["N"] = c.search.n_simulations;
    cfg["B1"] = c.b1;
    cfg["B2"] = c.search.b2_expansion;
    cfg["T"] = c.search.t_max;
    cfg["k"] = c.k;
    cfg["temperature"] = c.solve_temperature();
    cfg["jobs"] = c.jobs;
    j["config"] = std::move(cfg);
    return j;
}

std::uint64_t tree_seed(std::uint64_t base, std::size_t question_index, std::size_t tree_index) {
    return mix_seed(base, question_index, tree_index);
}

DatasetManifest cmd_generate(const std::vector<DatasetRecord>& records, const RunConfig& config,
                             const PolicyValueBackend& backend, const std::string& destination,
                             const std::string& trees_dir) {
    config.search.validate();
    for (const auto& r : records)
        if (!r.gold_answer) throw DatasetError("record '" + r.id + "' has no gold_answer; generation needs one");

    SearchConfig sc = config.search;
    sc.lambda_mode = LambdaMode::IndicatorTerminal;
    sc.temperature = config.generate_temperature();
    sc.validate();

    const auto per_q = static_cast<std::size_t>(config.trees_per_question);
    const std::size_t total = records.size() * per_q;
    std::vector<SearchTree> trees(total);
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1) num_threads(config.jobs)
    for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t qi = idx / per_q, ti = idx % per_q;
        try {
            const auto& r = records[qi];
            trees[idx] = build_tree(make_question(r.id, r.question), make_answer(*r.gold_answer), backend, sc,
                                    tree_seed(config.seed, qi, ti));
        } catch (...) {
#pragma omp critical(rsp_generate_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    DatasetManifest manifest;
    manifest.round = config.round;
    manifest.trees_per_question = config.trees_per_question;
    manifest.max_pos = config.max_pos;
    manifest.max_neg = config.max_neg;

    std::vector<SolutionPath> selected;
    for (std::size_t qi = 0; qi < records.size(); ++qi) {
        std::span<const SearchTree> group(trees.data() + qi * per_q, per_q);
        if (!trees_dir.empty())
            for (std::size_t ti = 0; ti < per_q; ++ti) dump_tree(group[ti], trees_dir, qi, ti);
        auto kept = filter_solutions(harvest_paths(group));
        auto chosen = select_for_round(kept, config.max_pos, config.max_neg, mix_seed(config.seed ^ 0x5e1ec7ULL, qi));
        std::sort(chosen.begin(), chosen.end(), [](const SolutionPath& a, const SolutionPath& b) {
            return std::tie(a.tree_id, a.path_index) < std::tie(b.tree_id, b.path_index);
        });
        for (auto& p : chosen) {
            (p.correct ? manifest.positives : manifest.negatives)++;
            selected.push_back(std::move(p));
        }
    }
    manifest.records = selected.size();
    export_jsonl(selected, manifest, destination);
    return manifest;
}

InspectReport inspect_tree(const SearchTree& tree, int b1) {
    InspectReport r;
    r.question_id = tree.question.question_id;
    r.simulations_run = tree.simulations_run;
    r.nodes = tree.nodes.size();
    r.q_histogram.assign(10, 0);
    r.q_histogram_correct.assign(10, 0);
    r.q_histogram_incorrect.assign(10, 0);
    std::vector<bool> expanded_at;
    auto bin = [](double q) {
        const int b = static_cast<int>(std::floor((q + 1.0) / 0.2));
        return static_cast<std::size_t>(std::clamp(b, 0, 9));
    };
    for (const auto& n : tree.nodes) {
        const auto d = static_cast<std::size_t>(n.depth);
        if (r.depth_counts.size() <= d) {
            r.depth_counts.resize(d + 1, 0);
            expanded_at.resize(d + 1, false);
        }
        ++r.depth_counts[d];
        if (!n.children.empty()) expanded_at[d] = true;
        if (n.stats.visits > 0) {
            const auto v = static_cast<std::size_t>(std::log2(static_cast<double>(n.stats.visits)));
            if (r.visit_histogram.size() <= v) r.visit_histogram.resize(v + 1, 0);
            ++r.visit_histogram[v];
            if (n.id != 0) {
                ++r.q_histogram[bin(n.stats.q)];
                if (n.terminal && n.reward) (*n.reward > 0 ? r.q_histogram_correct : r.q_histogram_incorrect)[bin(n.stats.q)]++;
            }
        }
    }
    r.expanded_layers = static_cast<int>(std::count(expanded_at.begin(), expanded_at.end(), true));
    r.sweep = sweep_top_b1(tree, b1, tree.config.t_max);
    return r;
}

std::string InspectReport::render(const SearchTree& tree) const {
    std::ostringstream o;
    o << "question: " << question_id << '\n';
    o << "simulations: " << simulations_run << "  nodes: " << nodes << "  expanded layers: " << expanded_layers << '\n';
    o << "nodes per depth:\n";
    for (std::size_t d = 0; d < depth_counts.size(); ++d) o << "  depth " << d << ": " << depth_counts[d] << '\n';
    o << "visit counts:\n";
    for (std::size_t b = 0; b < visit_histogram.size(); ++b) {
        const auto lo = std::size_t{1} << b, hi = (std::size_t{2} << b) - 1;
        o << "  [" << lo;
        if (hi != lo) o << "-" << hi;
        o << "]: " << visit_histogram[b] << '\n';
    }
    auto hist = [&](const char* title, const std::vector<std::size_t>& h) {
        o << title << '\n';
        for (std::size_t b = 0; b < h.size(); ++b) {
            char label[32];
            std::snprintf(label, sizeof label, "  [%+.1f, %+.1f%c: ", -1.0 + 0.2 * b, -0.8 + 0.2 * b, b == 9 ? ']' : ')');
            o << label << h[b] << '\n';
        }
    };
    hist("q (visited nodes):", q_histogram);
    hist("q (correct terminals):", q_histogram_correct);
    hist("q (incorrect terminals):", q_histogram_incorrect);
    o << "sweep:\n";
    for (std::size_t t = 0; t < sweep.rounds.size(); ++t) {
        o << "  round " << t + 1 << ":";
        for (NodeId id : sweep.rounds[t]) o << ' ' << id << "(q=" << tree.node(id).stats.q << ')';
        o << '\n';
    }
    if (!sweep.final_candidates.empty()) {
        const auto best = tree.state_of(sweep.final_candidates.front());
        auto answer = best.final_answer();
        o << "best path answer: " << (answer ? answer->raw : std::string("(none)")) << '\n';
    }
    return o.str();
}

std::string cmd_inspect(const std::string& snapshot_path, int b1) {
    const SearchTree tree = read_snapshot(snapshot_path);
    return inspect_tree(tree, b1).render(tree);
}

} // namespace rsp
