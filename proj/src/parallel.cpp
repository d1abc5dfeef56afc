#include "physmorph/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace physmorph {

namespace {
int g_threads = 1;
constexpr std::size_t kChunks = 64;
}  // namespace

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads; }

std::size_t chunk_count(std::size_t count) { return std::min(count, kChunks); }

void parallel_chunks(std::size_t count,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t chunks = chunk_count(count);
    auto run_chunk = [&](std::size_t c) {
        std::size_t begin = count * c / chunks;
        std::size_t end = count * (c + 1) / chunks;
        if (begin < end) fn(c, begin, end);
    };

    int workers = std::min<std::size_t>(g_threads, chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t c = next.fetch_add(1);
                if (c >= chunks) return;
                run_chunk(c);
            }
        });
    }
    for (auto& t : pool) t.join();
}

void parallel_ranges(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    parallel_chunks(count, [&](std::size_t, std::size_t b, std::size_t e) { fn(b, e); });
}

}  // namespace physmorph
