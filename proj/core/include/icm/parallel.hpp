#pragma once

#include <functional>

namespace icm::num {

// Runs fn(i) for i in [0, n) on up to `threads` workers.  Iterations must
// write only to their own output slots; scheduling never affects results.
// threads <= 1 runs serially.  The first exception thrown by any iteration
// is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace icm::num
