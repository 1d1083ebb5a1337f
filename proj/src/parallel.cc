#include "surfmatch/parallel.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace surfmatch {

int ResolveThreadCount(int requested) {
  if (requested > 0) {
    return requested;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::size_t ChunkCount(std::size_t num_items) {
  return (num_items + kChunkSize - 1) / kChunkSize;
}

void ParallelForChunks(
    std::size_t num_items, int num_threads,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  const std::size_t num_chunks = ChunkCount(num_items);
  const auto run_chunk = [&](std::size_t chunk) {
    const std::size_t begin = chunk * kChunkSize;
    fn(chunk, begin, std::min(num_items, begin + kChunkSize));
  };

  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(ResolveThreadCount(num_threads)), num_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) {
      run_chunk(c);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t c = next++; c < num_chunks; c = next++) {
        try {
          run_chunk(c);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace surfmatch
