/*
 * Copyright 2026 The rqat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based randomness: every draw is a pure function of (seed, keys), so
// results do not depend on the order in which cells or samples are visited.

namespace rqat::keyed {

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a) noexcept { return mix(mix(seed) ^ a); }

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return mix(key(seed, a) ^ mix(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    return mix(key(seed, a, b) ^ mix(c + 0x2545f4914f6cdd1dULL));
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double uniform01(std::uint64_t k) noexcept { return static_cast<double>(mix(k) >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller over two keyed uniforms.
inline double normal(std::uint64_t k) noexcept {
    double u1 = uniform01(k ^ 0x5851f42d4c957f2dULL);
    const double u2 = uniform01(k ^ 0x14057b7ef767814fULL);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rqat::keyed
