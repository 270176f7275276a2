// SPDX-License-Identifier: Apache-2.0
//
// cfduplex: cell-free MIMO uplink/downlink spectral-efficiency simulator
// Copyright (C) 2026 the cfduplex authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace cfduplex {

// Tree-ordered reduction. The bracketing is a function of the element count
// only, so results are byte-identical regardless of how partials were
// produced (thread count, scheduling order).
template <typename T> T pairwise_reduce(std::vector<T> parts) {
    if (parts.empty()) throw std::invalid_argument("pairwise_reduce: empty");
    std::size_t n = parts.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i)
            parts[i] = parts[i] + parts[i + half];
        n = half;
    }
    return parts[0];
}

inline double pairwise_sum(const std::vector<double> &v) {
    if (v.empty()) return 0.0;
    return pairwise_reduce(v);
}

// Quantile with linear interpolation between order statistics: position
// q*(n-1) on the sorted sample. q=0.10 is the "90% likely" level.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = std::clamp(q, 0.0, 1.0) * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] + frac * (v[hi] - v[lo]);
}

// Empirical CDF points (x_(i), (i+1)/n) over the sorted sample.
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.emplace_back(v[i], double(i + 1) / v.size());
    return out;
}

// Runs fn(block_index, begin, end) over [0, n) split into fixed-size blocks.
// Block boundaries depend only on n and block size, so per-block outputs can
// be reduced deterministically no matter how many workers ran.
inline void parallel_blocks(long n, long block, int threads,
                            const std::function<void(std::size_t, long, long)> &fn) {
    if (n <= 0) return;
    block = std::max<long>(1, block);
    const std::size_t n_blocks = static_cast<std::size_t>((n + block - 1) / block);
    threads = std::max(1, threads);
    if (threads == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b, b * block, std::min<long>(n, (b + 1) * block));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            fn(b, b * block, std::min<long>(n, long(b + 1) * block));
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto &th : pool) th.join();
}

} // namespace cfduplex
