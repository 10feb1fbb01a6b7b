#pragma once

// Streaming moments and the fixed-block parallel map used by every sampler.
// Samples are grouped into blocks of kBlockSize consecutive indices; each
// block is reduced sequentially and blocks are merged in index order, so the
// result depends only on the index range, never on the worker count.

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <thread>
#include <vector>

namespace amlmc {

/// Welford accumulator with Chan's pairwise merge.
struct RunningStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }

    void merge(const RunningStats& o) noexcept {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double total = na + nb;
        const double delta = o.mean - mean;
        mean += delta * (nb / total);
        m2 += o.m2 + delta * delta * (na * nb / total);
        n += o.n;
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    double variance() const noexcept {
        return n > 1 ? std::max(0.0, m2 / static_cast<double>(n - 1)) : 0.0;
    }
    double std_error() const noexcept {
        return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

/// Elementwise RunningStats over fixed-length vectors.
struct VectorStats {
    std::uint64_t n = 0;
    std::vector<double> mean;
    std::vector<double> m2;

    void add(const std::vector<double>& x) {
        if (n == 0) {
            mean.assign(x.size(), 0.0);
            m2.assign(x.size(), 0.0);
        } else if (x.size() != mean.size()) {
            throw std::invalid_argument("VectorStats: length mismatch");
        }
        ++n;
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double delta = x[i] - mean[i];
            mean[i] += delta * inv;
            m2[i] += delta * (x[i] - mean[i]);
        }
    }

    void merge(const VectorStats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        if (o.mean.size() != mean.size()) throw std::invalid_argument("VectorStats: length mismatch");
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double total = na + nb;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double delta = o.mean[i] - mean[i];
            mean[i] += delta * (nb / total);
            m2[i] += o.m2[i] + delta * delta * (na * nb / total);
        }
        n += o.n;
    }

    double variance(std::size_t i) const {
        return n > 1 ? std::max(0.0, m2.at(i) / static_cast<double>(n - 1)) : 0.0;
    }

    /// Index of the largest mean (first one on ties).
    std::size_t argmax() const {
        if (mean.empty()) throw std::logic_error("VectorStats: empty");
        return static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    }
};

inline constexpr std::uint64_t kBlockSize = 64;

/// hardware_concurrency, capped by AMLMC_MAX_WORKERS when set.
inline unsigned default_workers() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AMLMC_MAX_WORKERS")) {
        errno = 0;
        char* end = nullptr;
        const unsigned long cap = std::strtoul(env, &end, 10);
        if (errno == 0 && end != env && *end == '\0' && cap > 0) {
            hw = std::min<unsigned long>(hw, cap);
        }
    }
    return hw;
}

/// Splits [begin, end) into blocks and calls fn(block_begin, block_end, result)
/// for each on up to `workers` threads. Results come back in block order. The
/// first exception by block order is rethrown after all workers finish.
template <class R, class Fn>
std::vector<R> map_blocks(std::uint64_t begin, std::uint64_t end, unsigned workers, Fn&& fn) {
    if (end < begin) throw std::invalid_argument("map_blocks: empty range reversed");
    const std::uint64_t n_blocks = (end - begin + kBlockSize - 1) / kBlockSize;
    std::vector<R> results(n_blocks);
    std::vector<std::exception_ptr> errors(n_blocks);
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::uint64_t lo = begin + b * kBlockSize;
            const std::uint64_t hi = std::min(end, lo + kBlockSize);
            try {
                fn(lo, hi, results[b]);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const unsigned n_threads =
        static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, workers), n_blocks));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace amlmc
