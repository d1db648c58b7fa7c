#pragma once

#include <cstddef>
#include <functional>

namespace levylab {

// Global worker budget. Work is always split into chunks of a fixed grain,
// so numerical results are identical for any thread count; threads only
// change who executes a chunk.
void set_thread_count(unsigned n);   // 0 = hardware concurrency
unsigned thread_count();

// Runs fn(begin, end) over [0, n) in chunks of `grain` items. Each chunk
// must write only to its own slots; do reductions serially afterwards.
void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t)>& fn);

// convenience: per-item version
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace levylab
