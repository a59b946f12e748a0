#include "rsp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rsp/errors.hpp"
#include "rsp/rng.hpp"

namespace rsp {

void validate_request(const ProposalRequest& request) {
    if (request.n_samples < 1) throw ContractViolation("n_samples must be >= 1");
    if (!(request.temperature >= 0.0) || !std::isfinite(request.temperature))
        throw ContractViolation("temperature must be finite and >= 0");
    if (request.state.has_answer()) throw ContractViolation("cannot propose steps for a terminal state");
}

std::vector<Proposal> dedup_proposals(std::vector<Proposal> proposals) {
    std::unordered_set<std::string> seen;
    std::vector<Proposal> out;
    out.reserve(proposals.size());
    for (auto& p : proposals) {
        if (seen.insert(p.step.text).second) out.push_back(std::move(p));
    }
    return out;
}

std::vector<Proposal> sample_distinct(const PolicyValueBackend& backend, const ReasoningState& state, int want,
                                      double temperature, std::uint64_t seed) {
    std::vector<Proposal> out;
    std::unordered_set<std::string> seen;
    int requested = 0;
    for (int round = 0; static_cast<int>(out.size()) < want && requested < 2 * want; ++round) {
        int n = std::min(want - static_cast<int>(out.size()), 2 * want - requested);
        requested += n;
        ProposalRequest req{state, n, temperature, mix_seed(seed, static_cast<std::uint64_t>(round))};
        bool fresh = false;
        for (auto& p : backend.propose_steps(req)) {
            if (static_cast<int>(out.size()) >= want) break;
            if (seen.insert(p.step.text).second) {
                out.push_back(std::move(p));
                fresh = true;
            }
        }
        // Deterministic proposers repeat themselves; another round is wasted.
        if (!fresh || temperature == 0.0) break;
    }
    return out;
}

double clamp_value(double v, bool* clamped) {
    double c = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
    if (clamped) *clamped = c != v;
    return c;
}

} // namespace rsp
