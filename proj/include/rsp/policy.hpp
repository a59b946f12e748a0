#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rsp/core.hpp"

namespace rsp {

// temperature == 0 selects the backend's deterministic (greedy) mode:
// proposals are the most likely steps, most likely first.
struct ProposalRequest {
    ReasoningState state;
    int n_samples = 1;
    double temperature = 1.0;
    std::optional<std::uint64_t> seed;
};

struct Proposal {
    Step step;
};

struct ValuePrediction {
    double value = 0.0; // in [-1, 1]
};

// Policy (step proposer) and value model behind one interface.
// Implementations must tolerate concurrent calls.
class PolicyValueBackend {
public:
    virtual ~PolicyValueBackend() = default;

    // Between 1 and n_samples proposals, distinct by step text. May return
    // none when the state has no continuation (dead end).
    virtual std::vector<Proposal> propose_steps(const ProposalRequest& request) const = 0;

    virtual ValuePrediction predict_value(const ReasoningState& state) const = 0;
};

void validate_request(const ProposalRequest& request);

// Keeps the first occurrence of each step text.
std::vector<Proposal> dedup_proposals(std::vector<Proposal> proposals);

// Asks for `want` distinct proposals, re-sampling with fresh seeds until
// `want` are collected, 2 * want proposals have been requested, or a round
// brings nothing new.
std::vector<Proposal> sample_distinct(const PolicyValueBackend& backend, const ReasoningState& state, int want,
                                      double temperature, std::uint64_t seed);

// Clamps into [-1, 1]; reports whether clamping happened.
double clamp_value(double v, bool* clamped = nullptr);

} // namespace rsp
