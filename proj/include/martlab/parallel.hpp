#pragma once

#include <cstddef>
#include <functional>

namespace martlab {

unsigned default_thread_count();

// Static block partition of [0, n) over worker threads. `body(i, worker)`
// must write only to slot i (or worker-local state), which keeps results
// independent of the scheduling; all randomness is counter-based per index.
void parallel_for(std::size_t n, unsigned n_threads,
                  const std::function<void(std::size_t, unsigned)>& body);

}  // namespace martlab
