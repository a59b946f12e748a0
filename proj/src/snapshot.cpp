#include "rsp/snapshot.hpp"

#include <fstream>
#include <sstream>

#include "rsp/errors.hpp"
#include "rsp/remote_backend.hpp"

namespace rsp {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

} // namespace

json tree_to_json(const SearchTree& tree) {
    const SearchConfig& c = tree.config;
    json doc;
    doc["schema"] = kSnapshotSchema;
    doc["version"] = kSnapshotVersion;
    doc["question"] = {{"id", tree.question.question_id}, {"text", tree.question.question_text}};
    doc["gold_answer"] = tree.gold ? json(tree.gold->raw) : json(nullptr);
    doc["seed"] = tree.seed;
    doc["simulations_run"] = tree.simulations_run;
    doc["backups"] = tree.backups;
    doc["config"] = {{"c_puct", c.c_puct},
                     {"n_simulations", c.n_simulations},
                     {"b2_expansion", c.b2_expansion},
                     {"t_max", c.t_max},
                     {"temperature", c.temperature},
                     {"lambda_mode", c.lambda_mode == LambdaMode::AlwaysModel ? "always_model" : "indicator_terminal"},
                     {"q_init", c.q_init}};
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        json j;
        j["id"] = n.id;
        j["parent_id"] = n.parent == kNoNode ? json(nullptr) : json(n.parent);
        j["depth"] = n.depth;
        j["prior"] = n.stats.prior;
        j["N"] = n.stats.visits;
        j["W"] = n.stats.total_value;
        j["q"] = n.stats.q;
        j["model_value"] = optional_number(n.stats.model_value);
        j["terminal"] = n.terminal;
        j["reward"] = optional_number(n.reward);
        j["children"] = n.children;
        j["step"] = n.step ? wire::proposal(Proposal{*n.step}) : json(nullptr);
        nodes.push_back(std::move(j));
    }
    doc["nodes"] = std::move(nodes);
    return doc;
}

SearchTree tree_from_json(const json& doc) {
    if (!doc.is_object() || doc.value("schema", "") != kSnapshotSchema)
        throw SchemaError("not a search-tree snapshot (expected schema \"" + std::string(kSnapshotSchema) + "\")");
    if (doc.value("version", -1) != kSnapshotVersion)
        throw SchemaError("unsupported snapshot version " + doc.value("version", json(nullptr)).dump() +
                          " (this build reads version " + std::to_string(kSnapshotVersion) + ")");
    try {
        SearchTree tree;
        tree.question = make_question(doc.at("question").at("id").get<std::string>(),
                                      doc.at("question").at("text").get<std::string>());
        if (const auto& g = doc.at("gold_answer"); !g.is_null()) tree.gold = make_answer(g.get<std::string>());
        tree.seed = doc.at("seed").get<std::uint64_t>();
        tree.simulations_run = doc.at("simulations_run").get<int>();
        tree.backups = doc.at("backups").get<std::int64_t>();

        const json& c = doc.at("config");
        tree.config.c_puct = c.at("c_puct").get<double>();
        tree.config.n_simulations = c.at("n_simulations").get<int>();
        tree.config.b2_expansion = c.at("b2_expansion").get<int>();
        tree.config.t_max = c.at("t_max").get<int>();
        tree.config.temperature = c.at("temperature").get<double>();
        const auto mode = c.at("lambda_mode").get<std::string>();
        if (mode != "always_model" && mode != "indicator_terminal") throw SchemaError("unknown lambda_mode " + mode);
        tree.config.lambda_mode = mode == "always_model" ? LambdaMode::AlwaysModel : LambdaMode::IndicatorTerminal;
        tree.config.q_init = c.at("q_init").get<double>();

        const json& nodes = doc.at("nodes");
        if (!nodes.is_array() || nodes.empty()) throw SchemaError("snapshot has no nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const json& j = nodes[i];
            SearchNode n;
            n.id = j.at("id").get<NodeId>();
            if (n.id != i) throw SchemaError("node ids must be dense and in order");
            n.parent = j.at("parent_id").is_null() ? kNoNode : j.at("parent_id").get<NodeId>();
            if ((i == 0) != (n.parent == kNoNode) || (i > 0 && n.parent >= i))
                throw SchemaError("node " + std::to_string(i) + " has an invalid parent");
            n.depth = j.at("depth").get<int>();
            n.stats.prior = j.at("prior").get<double>();
            n.stats.visits = j.at("N").get<std::int64_t>();
            n.stats.total_value = j.at("W").get<double>();
            n.stats.q = j.at("q").get<double>();
            n.stats.model_value = read_optional(j, "model_value");
            n.terminal = j.at("terminal").get<bool>();
            n.reward = read_optional(j, "reward");
            n.children = j.at("children").get<std::vector<NodeId>>();
            if (const auto& s = j.at("step"); !s.is_null()) n.step = wire::parse_proposal(s).step;
            if ((i == 0) == n.step.has_value()) throw SchemaError("only the root may lack a step");
            tree.nodes.push_back(std::move(n));
        }
        for (const auto& n : tree.nodes) {
            for (NodeId c : n.children) {
                if (c >= tree.nodes.size() || tree.nodes[c].parent != n.id)
                    throw SchemaError("child list of node " + std::to_string(n.id) + " is inconsistent");
            }
            if (!n.terminal && n.children.empty()) ++tree.open_leaves;
        }
        return tree;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed snapshot: ") + e.what());
    } catch (const MalformedStep& e) {
        throw SchemaError(std::string("malformed snapshot step: ") + e.what());
    }
}

void write_snapshot(const SearchTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write snapshot " + path);
    out << tree_to_json(tree).dump(1) << "\n";
    if (!out) throw IoError("failed writing snapshot " + path);
}

SearchTree read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) throw SchemaError(path + ": empty snapshot");
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return tree_from_json(doc);
}

} // namespace rsp
