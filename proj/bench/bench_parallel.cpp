// Serial vs OpenMP timings for the rollout estimator and for solve.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <omp.h>

#include "rsp/commands.hpp"
#include "rsp/mcts.hpp"
#include "rsp/toyenv.hpp"

namespace {

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main(int argc, char** argv) {
    const int rollouts = argc > 1 ? std::atoi(argv[1]) : 20000;
    const auto problems = rsp::toy_corpus(40, 11);
    rsp::ToyBackend backend;
    const int threads = omp_get_max_threads();
    std::printf("threads: %d\n", threads);

    double serial_v = 0, parallel_v = 0;
    const auto& p = problems.front();
    const double ts = seconds([&] {
        serial_v = rsp::mc_rollout_estimate_serial(p.root_state(), p.gold(), backend, rollouts, 5);
    });
    const double tp = seconds([&] {
        parallel_v = rsp::mc_rollout_estimate(p.root_state(), p.gold(), backend, rollouts, 5);
    });
    std::printf("mc_rollout  n=%d  serial %.3fs  parallel %.3fs  speedup %.2fx  same=%s\n", rollouts, ts, tp,
                ts / tp, serial_v == parallel_v ? "yes" : "NO");

    const auto records = rsp::toy_dataset(problems);
    rsp::RunConfig config;
    config.strategy = rsp::Strategy::Mcts;
    config.jobs = 1;
    const double s1 = seconds([&] { rsp::cmd_solve(records, config, backend); });
    config.jobs = threads;
    const double sn = seconds([&] { rsp::cmd_solve(records, config, backend); });
    std::printf("solve mcts  %zu questions  jobs=1 %.3fs  jobs=%d %.3fs  speedup %.2fx\n", records.size(), s1,
                threads, sn, s1 / sn);
    return serial_v == parallel_v ? 0 : 1;
}
