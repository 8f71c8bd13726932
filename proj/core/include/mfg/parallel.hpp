#pragma once

#include <functional>

namespace mfg {

// Worker count used by every parallel loop in the library. Results never
// depend on it: loops only write to disjoint, index-addressed slots and all
// reductions are performed afterwards in index order.
void set_thread_count(int threads);
int thread_count();

// Runs body(i) for i in [0, count), split into contiguous blocks.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace mfg
