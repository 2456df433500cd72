#pragma once

// Index-parallel loop capped by the ADN_THREADS environment variable.
// Each task writes only its own slot, so results never depend on scheduling.

#include <cstddef>
#include <functional>

namespace adn {

/// ADN_THREADS if set to a positive integer, else the hardware concurrency.
int thread_budget();

/// Runs fn(i) for i in [0, n). The first exception thrown by any task is
/// rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace adn
