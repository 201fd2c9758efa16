#pragma once

#include <functional>

namespace cpsl {

/// Caps the worker count used by parallelFor. 0 selects the hardware
/// concurrency (or CPSL_THREADS when set).
void setThreadCount(int n);
int threadCount();

/// Runs fn(begin, end) over disjoint chunks of [first, last) on a shared
/// pool. Blocks until every chunk has finished. Nested calls run inline.
void parallelFor(int first, int last, const std::function<void(int, int)>& fn, int grain = 1);

}  // namespace cpsl
