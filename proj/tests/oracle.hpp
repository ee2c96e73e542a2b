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


// Reference computations for the tests. Each one enumerates or evaluates
// directly instead of reusing library code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline double level(const std::vector<double>& r, double c, std::uint32_t code) {
    double v = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j)
        if ((code >> j) & 1u) v += r[j];
    return v + c;
}

inline double perturbed_level(const std::vector<double>& r, const double* f, double c, std::uint32_t code) {
    double v = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j)
        if ((code >> j) & 1u) v += f[j] * r[j];
    return v + c;
}

struct Pick {
    std::uint32_t code = 0;
    double value = 0.0;
    bool found = false;
};

/// argmin_code |x - level(code)| over codes accepted by `allowed`, smallest code on ties.
template <class Allowed>
Pick brute_nearest(const std::vector<double>& r, double c, double x, Allowed allowed, const double* f = nullptr) {
    Pick best;
    double dist = std::numeric_limits<double>::infinity();
    for (std::uint32_t code = 0; code < (1u << r.size()); ++code) {
        if (!allowed(code)) continue;
        const double v = f ? perturbed_level(r, f, c, code) : level(r, c, code);
        const double d = std::abs(x - v);
        if (d < dist) {
            dist = d;
            best = {code, v, true};
        }
    }
    return best;
}

inline Pick brute_nearest(const std::vector<double>& r, double c, double x) {
    return brute_nearest(r, c, x, [](std::uint32_t) { return true; });
}

/// Code reachable under stuck-at masks.
inline bool reachable(std::uint32_t code, std::uint32_t sa0, std::uint32_t sa1) {
    return (code & sa0) == 0 && (code & sa1) == sa1;
}

/// Sorted distinct-order midpoints of all levels (for distance-to-threshold checks).
inline double distance_to_threshold(std::vector<double> levels, double x) {
    std::sort(levels.begin(), levels.end());
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) d = std::min(d, std::abs(x - 0.5 * (levels[i] + levels[i + 1])));
    return d;
}

inline std::vector<double> all_levels(const std::vector<double>& r, double c, const double* f = nullptr) {
    std::vector<double> out;
    for (std::uint32_t code = 0; code < (1u << r.size()); ++code)
        out.push_back(f ? perturbed_level(r, f, c, code) : level(r, c, code));
    return out;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
