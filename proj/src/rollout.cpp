#include <exception>
#include <vector>

#include "rsp/mcts.hpp"
#include "rsp/errors.hpp"
#include "rsp/rng.hpp"

namespace rsp {

ReasoningState rollout(const ReasoningState& state, const PolicyValueBackend& backend, double temperature,
                       std::uint64_t seed, int t_max) {
    const auto cap = static_cast<std::size_t>(t_max);
    ReasoningState s = state;
    for (std::uint64_t i = 0; !is_terminal(s, cap); ++i) {
        auto proposals = backend.propose_steps({s, 1, temperature, mix_seed(seed, i)});
        if (proposals.empty()) break;
        s = apply_step(s, std::move(proposals.front().step), cap);
    }
    return s;
}

double mc_rollout_estimate_serial(const ReasoningState& state, const Answer& gold,
                                  const PolicyValueBackend& backend, int n_rollouts, std::uint64_t seed, int t_max,
                                  double temperature) {
    if (n_rollouts < 1) throw ContractViolation("n_rollouts must be >= 1");
    double sum = 0.0;
    for (int i = 0; i < n_rollouts; ++i) {
        auto end = rollout(state, backend, temperature, mix_seed(seed, static_cast<std::uint64_t>(i)), t_max);
        sum += *terminal_reward(end, gold);
    }
    return sum / n_rollouts;
}

double mc_rollout_estimate(const ReasoningState& state, const Answer& gold, const PolicyValueBackend& backend,
                           int n_rollouts, std::uint64_t seed, int t_max, double temperature) {
    if (n_rollouts < 1) throw ContractViolation("n_rollouts must be >= 1");
    std::vector<double> rewards(static_cast<std::size_t>(n_rollouts));
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n_rollouts; ++i) {
        try {
            auto end = rollout(state, backend, temperature, mix_seed(seed, static_cast<std::uint64_t>(i)), t_max);
            rewards[static_cast<std::size_t>(i)] = *terminal_reward(end, gold);
        } catch (...) {
#pragma omp critical(rsp_rollout_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum / n_rollouts;
}

} // namespace rsp
