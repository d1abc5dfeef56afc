#pragma once

#include <cstddef>
#include <functional>

namespace physmorph {

// Global worker count. 1 = serial. Set from the CLI / PHYSMORPH_THREADS.
void set_thread_count(int n);
int thread_count();

// Runs fn(chunk_index, begin, end) over `count` items split into a FIXED
// number of chunks that does not depend on the worker count. Any scatter
// kernel that accumulates into per-chunk buffers and reduces them in chunk
// order therefore produces bit-identical results in serial and parallel
// modes. The number of chunks is returned by chunk_count(count).
std::size_t chunk_count(std::size_t count);
void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Plain parallel map over [0, count) index ranges; no reduction involved.
void parallel_ranges(std::size_t count,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace physmorph
