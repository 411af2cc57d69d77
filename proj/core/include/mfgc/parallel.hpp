#pragma once

#include <cstddef>
#include <functional>

namespace mfgc {

// Worker cap shared by every parallel loop in the library. Zero means "use
// MFGC_THREADS from the environment, else hardware concurrency".
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n). Iterations must be independent. The first
// exception thrown (lowest index wins) is rethrown on the calling thread after
// all workers finish, so failures are reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mfgc
