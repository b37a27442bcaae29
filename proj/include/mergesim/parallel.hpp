#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mergesim/engine.hpp"

namespace mergesim {

// Every parallel kernel has a serial twin used as the reference in tests;
// results are bitwise identical between the two modes.
enum class ExecMode { Serial, Parallel };

// OpenMP worker count, overridable via MERGESIM_THREADS.
int worker_count();

// Static-chunked OpenMP loop (or a plain loop in Serial mode). Bodies must
// only write to their own index's slots.
void parallel_for(int n, ExecMode mode, const std::function<void(int)>& fn);

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

// One episode per seed, each with a fresh controller; output order follows
// the seed list regardless of scheduling.
std::vector<EpisodeLog> evaluate_seeds(const ControllerFactory& factory,
                                       const ScenarioConfig& cfg,
                                       std::span<const std::uint64_t> seeds,
                                       ExecMode mode);

}  // namespace mergesim
