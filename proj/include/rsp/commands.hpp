#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsp/datagen.hpp"
#include "rsp/inference.hpp"
#include "rsp/toyenv.hpp"

namespace rsp {

enum class Strategy { Greedy, Sbs, Mcts, Maj };

const char* to_string(Strategy s);

// Everything a command needs. Search defaults: c_puct 1.25, N = 40
// simulations, B2 = 5, max depth 8.
struct RunConfig {
    std::string backend = "toy"; // "toy", "remote", or a server URL
    std::string backend_url;     // RSP_BACKEND_URL overrides this
    std::optional<ToyValueMode> toy_value; // default: cold for generate, oracle for solve

    SearchConfig search;
    Strategy strategy = Strategy::Sbs;
    int b1 = 3;
    int k = 5;
    // Unset means: 1.0 for data generation, SBS and maj@k; 0.6 for the
    // tree built by MCTS inference.
    std::optional<double> temperature;

    int round = 1;
    int trees_per_question = 10;
    int max_pos = 4;
    int max_neg = 4;
    double beta = 0.01;

    std::uint64_t seed = 0;
    int jobs = 1;

    double solve_temperature() const;
    double generate_temperature() const;
};

// Applies one `key = value` setting (c_puct, B1, B2, N, T, temperature,
// beta, ...; see README for the list).
// Throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Flat `key = value` document; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::string& path);

std::unique_ptr<PolicyValueBackend> make_backend(const RunConfig& config, ToyValueMode default_toy_value);

struct DatasetRecord {
    std::string id;
    std::string question;
    std::optional<std::string> gold_answer;
};

// JSONL of {"id", "question", "gold_answer"?}. Blank lines are skipped.
// Throws DatasetError carrying the 1-based line number.
std::vector<DatasetRecord> read_dataset(std::istream& in);
std::vector<DatasetRecord> read_dataset_file(const std::string& path);

std::vector<DatasetRecord> toy_dataset(const std::vector<ToyProblem>& problems);
void write_dataset(const std::vector<DatasetRecord>& records, std::ostream& out);

struct SolveResult {
    EvalSummary summary;
    std::vector<InferenceReport> reports; // input order
    std::size_t backend_failures = 0;     // questions lost to transport or malformed-step errors
};

// Runs the configured strategy on every record; a backend failure on one
// question becomes a failure entry and the run continues. Questions run in
// parallel over `config.jobs` threads; question i uses seed mix(seed, i).
SolveResult cmd_solve(const std::vector<DatasetRecord>& records, const RunConfig& config,
                      const PolicyValueBackend& backend, const std::string& trees_dir = {});

nlohmann::ordered_json report_to_json(const InferenceReport& report, const DatasetRecord& record);
nlohmann::ordered_json summary_to_json(const EvalSummary& summary, const RunConfig& config);

std::uint64_t tree_seed(std::uint64_t base, std::size_t question_index, std::size_t tree_index);

// Builds trees_per_question trees per record, then harvests, filters,
// selects and exports. Records are written in input order, then by
// (tree_id, terminal node id). Throws DatasetError when a record has no
// gold answer.
DatasetManifest cmd_generate(const std::vector<DatasetRecord>& records, const RunConfig& config,
                             const PolicyValueBackend& backend, const std::string& destination,
                             const std::string& trees_dir = {});

struct InspectReport {
    std::string question_id;
    int simulations_run = 0;
    std::size_t nodes = 0;
    std::vector<std::size_t> depth_counts;          // nodes per depth
    int expanded_layers = 0;                         // depths holding an expanded node
    std::vector<std::size_t> visit_histogram;        // buckets 1, 2-3, 4-7, ...
    std::vector<std::size_t> q_histogram;            // 10 bins over [-1, 1], visited non-root nodes
    std::vector<std::size_t> q_histogram_correct;    // terminal nodes with reward +1
    std::vector<std::size_t> q_histogram_incorrect;  // terminal nodes with reward -1
    SweepResult sweep;

    std::string render(const SearchTree& tree) const;
};

InspectReport inspect_tree(const SearchTree& tree, int b1);
std::string cmd_inspect(const std::string& snapshot_path, int b1);

} // namespace rsp
