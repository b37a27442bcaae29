#include "mergesim/parallel.hpp"

#include <cstdlib>
#include <mutex>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mergesim {

int worker_count() {
    if (const char* env = std::getenv("MERGESIM_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void parallel_for(int n, ExecMode mode, const std::function<void(int)>& fn) {
#ifdef _OPENMP
    if (mode == ExecMode::Parallel) {
        int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
#else
    (void)mode;
#endif
    for (int i = 0; i < n; ++i) fn(i);
}

std::vector<EpisodeLog> evaluate_seeds(const ControllerFactory& factory,
                                       const ScenarioConfig& cfg,
                                       std::span<const std::uint64_t> seeds,
                                       ExecMode mode) {
    std::vector<EpisodeLog> logs(seeds.size());
    std::exception_ptr error;
    std::mutex error_mutex;
    parallel_for(static_cast<int>(seeds.size()), mode, [&](int i) {
        try {
            auto controller = factory();
            logs[i] = run_episode(*controller, cfg, seeds[i]);
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    });
    if (error) std::rethrow_exception(error);
    return logs;
}

}  // namespace mergesim
