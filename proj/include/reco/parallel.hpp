#pragma once

#include <cstddef>
#include <functional>

namespace reco {

// Global worker cap shared by all parallel regions (the CLI --threads flag).
// 0 means hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_cap();

// Runs fn(i) for i in [0, n) on up to thread_cap() workers. Blocks until
// done. Work items must be independent; callers that need a deterministic
// result write to index i of a pre-sized output and reduce afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Same, but hands each worker a contiguous [begin, end) chunk.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace reco
