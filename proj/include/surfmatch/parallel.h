#ifndef SURFMATCH_PARALLEL_H_
#define SURFMATCH_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace surfmatch {

// Work is split into chunks of this many items regardless of the thread
// count, so per-chunk partial results (and their ordered combination) do not
// depend on how many threads ran them.
inline constexpr std::size_t kChunkSize = 4096;

// 0 means hardware concurrency.
int ResolveThreadCount(int requested);

std::size_t ChunkCount(std::size_t num_items);

// Calls fn(chunk_index, begin, end) once for every chunk of [0, num_items).
// Chunks are distributed dynamically over `num_threads` workers; callers
// must write results into per-chunk slots to stay deterministic.
void ParallelForChunks(
    std::size_t num_items, int num_threads,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace surfmatch

#endif  // SURFMATCH_PARALLEL_H_
