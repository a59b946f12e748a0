// rsp: solve, generate, inspect and corpus subcommands.
//
// Exit codes: 0 ok, 1 other failure, 2 bad configuration, 3 bad dataset,
// 4 backend failure (for solve: after the remaining questions finished).
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "rsp/commands.hpp"
#include "rsp/errors.hpp"

namespace {

// Flag name -> config key. Flags win over the config file, which wins over
// the built-in defaults.
const std::map<std::string, std::string> kFlagKeys = {
    {"backend", "backend"},   {"toy-value", "toy_value"},
    {"strategy", "strategy"}, {"b1", "B1"},
    {"b2", "B2"},             {"n-sims", "N"},
    {"c-puct", "c_puct"},     {"t-max", "T"},
    {"temperature", "temperature"}, {"k", "k"},
    {"trees-per-question", "trees_per_question"}, {"max-pos", "max_pos"},
    {"max-neg", "max_neg"},   {"beta", "beta"},
    {"round", "round"},       {"seed", "seed"},
    {"jobs", "jobs"},
};

struct Flags {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "key = value settings file");
        for (const auto& [flag, key] : kFlagKeys)
            options[flag] = app.add_option("--" + flag, values[flag], "sets " + key);
    }

    rsp::RunConfig resolve() const {
        rsp::RunConfig config;
        if (!config_path.empty()) rsp::apply_config_file(config, config_path);
        for (const auto& [flag, opt] : options)
            if (opt->count() > 0) rsp::apply_setting(config, kFlagKeys.at(flag), values.at(flag));
        return config;
    }
};

std::string sibling(const std::string& path, const std::string& suffix) {
    const std::string ext = ".jsonl";
    if (path.size() > ext.size() && path.ends_with(ext)) return path.substr(0, path.size() - ext.size()) + suffix;
    return path + suffix;
}

int run_solve(const Flags& flags, const std::string& input, const std::string& out, const std::string& trees) {
    const rsp::RunConfig config = flags.resolve();
    const auto records = rsp::read_dataset_file(input);
    const auto backend = rsp::make_backend(config, rsp::ToyValueMode::Oracle);
    const auto result = rsp::cmd_solve(records, config, *backend, trees);

    const auto summary = rsp::summary_to_json(result.summary, config);
    if (!out.empty()) {
        std::ofstream o(out, std::ios::binary | std::ios::trunc);
        if (!o) throw rsp::IoError("cannot open " + out + " for writing");
        for (std::size_t i = 0; i < records.size(); ++i)
            o << rsp::report_to_json(result.reports[i], records[i]).dump() << '\n';
        std::ofstream s(sibling(out, ".summary.json"), std::ios::binary | std::ios::trunc);
        s << summary.dump(2) << '\n';
    }
    std::cout << summary.dump(2) << '\n';
    for (std::size_t i = 0; i < records.size(); ++i)
        if (result.reports[i].failure) std::cerr << records[i].id << ": " << *result.reports[i].failure << '\n';
    // Every question was attempted and reported; still signal backend trouble.
    return result.backend_failures > 0 ? 4 : 0;
}

int run_generate(const Flags& flags, const std::string& input, const std::string& out, const std::string& trees) {
    const rsp::RunConfig config = flags.resolve();
    const auto records = rsp::read_dataset_file(input);
    const auto backend = rsp::make_backend(config, rsp::ToyValueMode::Cold);
    const auto manifest = rsp::cmd_generate(records, config, *backend, out, trees);
    std::cout << rsp::manifest_to_json(manifest).dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Step-level MCTS for code-augmented reasoning"};
    app.require_subcommand(1);

    Flags solve_flags, generate_flags;
    std::string solve_in, solve_out, solve_trees;
    auto* solve = app.add_subcommand("solve", "run an inference strategy over a JSONL dataset");
    solve->add_option("input", solve_in, "dataset JSONL")->required();
    solve->add_option("--out", solve_out, "per-question reports JSONL (summary goes next to it)");
    solve->add_option("--dump-trees", solve_trees, "directory for MCTS tree snapshots");
    solve_flags.attach(*solve);

    std::string gen_in, gen_out, gen_trees;
    auto* generate = app.add_subcommand("generate", "build search trees and export training records");
    generate->add_option("input", gen_in, "dataset JSONL with gold answers")->required();
    generate->add_option("--out", gen_out, "training JSONL (manifest goes next to it)")->required();
    generate->add_option("--dump-trees", gen_trees, "directory for tree snapshots");
    generate_flags.attach(*generate);

    std::string snapshot;
    int inspect_b1 = 3;
    auto* inspect = app.add_subcommand("inspect", "summarize a tree snapshot");
    inspect->add_option("snapshot", snapshot, "snapshot JSON")->required();
    inspect->add_option("--b1", inspect_b1, "sweep width")->check(CLI::PositiveNumber);

    std::size_t corpus_n = 20;
    std::uint64_t corpus_seed = 0;
    std::string corpus_out;
    auto* corpus = app.add_subcommand("corpus", "write the built-in arithmetic puzzles as a dataset");
    corpus->add_option("--n", corpus_n, "number of problems");
    corpus->add_option("--seed", corpus_seed, "corpus seed");
    corpus->add_option("--out", corpus_out, "destination (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return run_solve(solve_flags, solve_in, solve_out, solve_trees);
        if (generate->parsed()) return run_generate(generate_flags, gen_in, gen_out, gen_trees);
        if (inspect->parsed()) {
            std::cout << rsp::cmd_inspect(snapshot, inspect_b1);
            return 0;
        }
        if (corpus->parsed()) {
            const auto records = rsp::toy_dataset(rsp::toy_corpus(corpus_n, corpus_seed));
            if (corpus_out.empty()) {
                rsp::write_dataset(records, std::cout);
            } else {
                std::ofstream o(corpus_out, std::ios::binary | std::ios::trunc);
                if (!o) throw rsp::IoError("cannot open " + corpus_out + " for writing");
                rsp::write_dataset(records, o);
            }
            return 0;
        }
    } catch (const rsp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const rsp::DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << '\n';
        return 3;
    } catch (const rsp::TransportError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return 4;
    } catch (const rsp::MalformedStep& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
