#pragma once

// Client for an external policy/value model server.
//
// Wire protocol (JSON bodies, header `x-rsp-version: 1`):
//
//   POST /propose  {"state": str, "n_samples": int, "temperature": float, "seed": int|null}
//               -> {"proposals": [{"kind": "c"|"a", "text": str, "mean_log_prob": float,
//                                  "contains_code": bool, "code_errored": bool,
//                                  "code_output": str|null, "answer": str|null}]}
//   POST /value    {"state": str} -> {"value": float}

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsp/policy.hpp"

namespace httplib {
class Client;
}

namespace rsp {

inline constexpr const char* kWireVersionHeader = "x-rsp-version";
inline constexpr const char* kWireVersion = "1";

namespace wire {

nlohmann::json propose_request(const ProposalRequest& request);
nlohmann::json value_request(const ReasoningState& state);

nlohmann::json proposal(const Proposal& p);
Proposal parse_proposal(const nlohmann::json& j);

// Parses and validates a /propose response; duplicates are merged.
std::vector<Proposal> parse_propose_response(const nlohmann::json& j);

// Raw value from a /value response, before clamping.
double parse_value_response(const nlohmann::json& j);

} // namespace wire

struct RemoteOptions {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
    std::chrono::seconds timeout{120};
    std::size_t pool_size = 8;
};

class RemoteBackend final : public PolicyValueBackend {
public:
    explicit RemoteBackend(std::string base_url, RemoteOptions options = {});
    ~RemoteBackend() override;

    std::vector<Proposal> propose_steps(const ProposalRequest& request) const override;
    ValuePrediction predict_value(const ReasoningState& state) const override;

    const std::string& url() const { return url_; }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;
    std::unique_ptr<httplib::Client> acquire() const;
    void release(std::unique_ptr<httplib::Client> client) const;

    std::string url_;
    RemoteOptions options_;
    mutable std::mutex pool_mutex_;
    mutable std::vector<std::unique_ptr<httplib::Client>> pool_;
};

} // namespace rsp
