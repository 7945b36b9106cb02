#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace qsmooth {

/// Deterministic fan-out over n_items units of work. Items are grouped into a
/// fixed number of chunks; each chunk owns an accumulator filled sequentially,
/// and chunk accumulators are combined in chunk order. The reduction tree is
/// therefore independent of the worker count, so results are bit-identical
/// whether run on one thread or many.
///
/// Work:    void(std::size_t item_index, Acc& chunk_accumulator)
/// Combine: void(Acc& total, const Acc& chunk)
template <class Acc, class Work, class Combine>
Acc run_chunked(std::size_t n_items, const Acc& init, Work&& work,
                Combine&& combine, std::size_t n_chunks = 64,
                std::size_t n_workers = 0) {
    if (n_chunks == 0) n_chunks = 1;
    if (n_chunks > n_items && n_items > 0) n_chunks = n_items;
    if (n_workers == 0) {
        n_workers = std::thread::hardware_concurrency();
        if (n_workers == 0) n_workers = 1;
    }
    n_workers = std::min(n_workers, n_chunks);

    std::vector<Acc> chunk_acc(n_chunks, init);
    auto run_chunk = [&](std::size_t c) {
        const std::size_t lo = n_items * c / n_chunks;
        const std::size_t hi = n_items * (c + 1) / n_chunks;
        for (std::size_t i = lo; i < hi; ++i) work(i, chunk_acc[c]);
    };

    if (n_workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t c = next.fetch_add(1); c < n_chunks;
                     c = next.fetch_add(1))
                    run_chunk(c);
            });
        for (auto& t : pool) t.join();
    }

    Acc total = init;
    for (const Acc& a : chunk_acc) combine(total, a);
    return total;
}

} // namespace qsmooth
