#include "rsp/remote_backend.hpp"

#include <iostream>
#include <thread>

#include <httplib.h>

#include "rsp/errors.hpp"

namespace rsp {

using nlohmann::json;

namespace wire {

json propose_request(const ProposalRequest& request) {
    json j;
    j["state"] = request.state.rendered();
    j["n_samples"] = request.n_samples;
    j["temperature"] = request.temperature;
    j["seed"] = request.seed ? json(*request.seed) : json(nullptr);
    return j;
}

json value_request(const ReasoningState& state) { return json{{"state", state.rendered()}}; }

json proposal(const Proposal& p) {
    const Step& s = p.step;
    json j;
    j["kind"] = s.is_answer() ? "a" : "c";
    j["text"] = s.text;
    j["mean_log_prob"] = s.mean_log_prob;
    j["contains_code"] = s.contains_code;
    j["code_errored"] = s.code_errored;
    j["code_output"] = s.code_output ? json(*s.code_output) : json(nullptr);
    j["answer"] = s.extracted_answer ? json(s.extracted_answer->raw) : json(nullptr);
    return j;
}

Proposal parse_proposal(const json& j) {
    try {
        Step s;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind != "c" && kind != "a") throw MalformedStep("proposal kind must be \"c\" or \"a\", got \"" + kind + "\"");
        s.kind = kind == "a" ? StepKind::AStep : StepKind::CStep;
        s.text = j.at("text").get<std::string>();
        s.mean_log_prob = j.at("mean_log_prob").get<double>();
        s.contains_code = j.at("contains_code").get<bool>();
        s.code_errored = j.at("code_errored").get<bool>();
        if (const auto& out = j.at("code_output"); !out.is_null()) s.code_output = out.get<std::string>();
        const auto& answer = j.at("answer");
        if (s.is_answer()) {
            s.extracted_answer = answer.is_null() ? extract_answer(s) : make_answer(answer.get<std::string>());
        } else if (!answer.is_null()) {
            throw MalformedStep("C-step proposal carries an answer");
        }
        validate_step(s);
        return Proposal{std::move(s)};
    } catch (const json::exception& e) {
        throw MalformedStep(std::string("bad proposal object: ") + e.what());
    }
}

std::vector<Proposal> parse_propose_response(const json& j) {
    if (!j.is_object() || !j.contains("proposals") || !j["proposals"].is_array())
        throw MalformedStep("propose response lacks a \"proposals\" array");
    std::vector<Proposal> out;
    for (const auto& p : j["proposals"]) out.push_back(parse_proposal(p));
    return dedup_proposals(std::move(out));
}

double parse_value_response(const json& j) {
    if (!j.is_object() || !j.contains("value") || !j["value"].is_number())
        throw MalformedStep("value response lacks a numeric \"value\"");
    return j["value"].get<double>();
}

} // namespace wire

RemoteBackend::RemoteBackend(std::string base_url, RemoteOptions options)
    : url_(std::move(base_url)), options_(options) {
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    if (url_.empty()) throw ConfigError("remote backend URL is empty");
    if (options_.attempts < 1) throw ConfigError("remote backend needs at least one attempt");
}

RemoteBackend::~RemoteBackend() = default;

std::unique_ptr<httplib::Client> RemoteBackend::acquire() const {
    {
        std::lock_guard lock(pool_mutex_);
        if (!pool_.empty()) {
            auto c = std::move(pool_.back());
            pool_.pop_back();
            return c;
        }
    }
    auto c = std::make_unique<httplib::Client>(url_);
    if (!c->is_valid()) throw ConfigError("invalid backend URL: " + url_);
    c->set_connection_timeout(options_.timeout);
    c->set_read_timeout(options_.timeout);
    c->set_write_timeout(options_.timeout);
    c->set_keep_alive(true);
    c->set_default_headers({{kWireVersionHeader, kWireVersion}});
    return c;
}

void RemoteBackend::release(std::unique_ptr<httplib::Client> client) const {
    std::lock_guard lock(pool_mutex_);
    if (pool_.size() < options_.pool_size) pool_.push_back(std::move(client));
}

json RemoteBackend::post(const std::string& path, const json& body) const {
    const std::string payload = body.dump();
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
        auto client = acquire();
        auto res = client->Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
        } else if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            release(std::move(client));
        } else if (res->status != 200) {
            throw TransportError("POST " + url_ + path + " rejected with HTTP " + std::to_string(res->status) +
                                 ": " + res->body);
        } else {
            release(std::move(client));
            try {
                return json::parse(res->body);
            } catch (const json::parse_error& e) {
                throw MalformedStep("POST " + url_ + path + " returned invalid JSON: " + e.what());
            }
        }
        if (attempt < options_.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("POST " + url_ + path + " failed after " + std::to_string(options_.attempts) +
                         " attempts (" + last_error + ")");
}

std::vector<Proposal> RemoteBackend::propose_steps(const ProposalRequest& request) const {
    validate_request(request);
    auto proposals = wire::parse_propose_response(post("/propose", wire::propose_request(request)));
    if (static_cast<int>(proposals.size()) > request.n_samples) proposals.resize(request.n_samples);
    return proposals;
}

ValuePrediction RemoteBackend::predict_value(const ReasoningState& state) const {
    double raw = wire::parse_value_response(post("/value", wire::value_request(state)));
    bool clamped = false;
    double v = clamp_value(raw, &clamped);
    if (clamped) std::cerr << "warning: remote value " << raw << " clamped to " << v << "\n";
    return {v};
}

} // namespace rsp
