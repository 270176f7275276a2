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

#include <complex>
#include <cstdint>
#include <random>

namespace cfduplex {

// splitmix64 mixing round. Used only to derive independent sub-seeds; the
// actual sample streams come from std::mt19937_64 seeded with the result.
inline std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic sub-seed for (index, stream) under a base seed. Feeding the
// combined word through a splitmix round decorrelates adjacent trial indices,
// so per-trial streams may run in any order (or in parallel) and still
// reproduce byte-identical results.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index,
                                 std::uint64_t stream = 0) {
    std::uint64_t s = base ^ (0x9E3779B97F4A7C15ULL * (index + 1)) ^
                      (0xC2B2AE3D27D4EB4FULL * (stream + 1));
    return splitmix64(s);
}

// Thin wrapper bundling the engine with the draws this project needs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double normal() { return normal_(eng_); }

    // Uniform on [lo, hi).
    double uniform(double lo = 0.0, double hi = 1.0) {
        return lo + (hi - lo) * unif_(eng_);
    }

    // Circularly symmetric complex Gaussian with E|x|^2 = variance.
    std::complex<double> cnormal(double variance) {
        const double s = std::sqrt(0.5 * variance);
        return {s * normal_(eng_), s * normal_(eng_)};
    }

    // Integer uniform on [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
    }

    std::mt19937_64 &engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

} // namespace cfduplex
