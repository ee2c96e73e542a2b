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


// Random crossbar layers compared against a dense evaluation over dequantized
// (fault-applied, perturbed) weights.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "rqat/crossbar.hpp"

namespace crossbar_check {

enum class Injection { none, faults, variability, both };

inline rqat::CrossbarLayer sample_layer(std::mt19937_64& rng, Injection inj) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> nb(1, 6), na(1, 8);
    std::uniform_int_distribution<std::size_t> dim(1, 24);
    rqat::CrossbarLayer L;
    L.rows = dim(rng);
    L.cols = dim(rng);
    L.params.bits = nb(rng);
    L.params.multipliers.resize(static_cast<std::size_t>(L.params.bits));
    for (auto& r : L.params.multipliers) r = 0.3 * g(rng);
    L.params.offset = 0.3 * g(rng);
    L.codes.resize(L.rows * L.cols);
    for (auto& c : L.codes) c = static_cast<rqat::Code>(rng() & ((1u << L.params.bits) - 1u));
    L.act = rqat::make_act_quantizer(na(rng), 0.05 + std::abs(g(rng)));
    const bool faults = inj == Injection::faults || inj == Injection::both;
    const bool var = inj == Injection::variability || inj == Injection::both;
    if (faults) L.faults = rqat::sample_fault_map(L.codes.size(), L.params.bits, 0.2, rng());
    if (var) L.variability = rqat::sample_variability_map(L.codes.size(), L.params.bits, 0.3, rng());
    L.model = var ? rqat::ArrayModel::analog : (rng() & 1u ? rqat::ArrayModel::analog : rqat::ArrayModel::digital);
    return L;
}

inline std::vector<double> sample_input(std::mt19937_64& rng, const rqat::CrossbarLayer& L) {
    std::uniform_real_distribution<double> u(-0.2, 1.1);
    std::vector<double> x(L.cols);
    for (auto& v : x) v = u(rng) * L.act.scale * L.act.q_p;
    return x;
}

/// Dense reference: s_a * sum_i q_i * w_oi with w from the stored (faulted,
/// perturbed) codes. Also returns s_a * sum_i |q_i * w_oi| per row.
inline void dense(const rqat::CrossbarLayer& L, const std::vector<double>& x, std::vector<double>& y,
                  std::vector<double>& magnitude) {
    y.assign(L.rows, 0.0);
    magnitude.assign(L.rows, 0.0);
    for (std::size_t o = 0; o < L.rows; ++o) {
        for (std::size_t i = 0; i < L.cols; ++i) {
            const double q = std::clamp(std::nearbyint(x[i] / L.act.scale), 0.0, static_cast<double>(L.act.q_p));
            const std::size_t cell = o * L.cols + i;
            std::uint32_t code = L.codes[cell];
            if (L.faults) code = (code & ~L.faults->stuck_at_0[cell]) | L.faults->stuck_at_1[cell];
            const double w = L.variability
                                 ? oracle::perturbed_level(L.params.multipliers, L.variability->row(cell).data(),
                                                           L.params.offset, code)
                                 : oracle::level(L.params.multipliers, L.params.offset, code);
            y[o] += q * w;
            magnitude[o] += std::abs(q * w);
        }
        y[o] *= L.act.scale;
        magnitude[o] *= L.act.scale;
    }
}

/// Largest |bit-sliced - dense| / max(|dense|, row magnitude * 1e-9, 1e-300).
inline double max_relative_error(const rqat::CrossbarLayer& L, const std::vector<double>& x) {
    const auto y = rqat::bit_sliced_matvec(x, L);
    std::vector<double> d, mag;
    dense(L, x, d, mag);
    double worst = 0.0;
    for (std::size_t o = 0; o < L.rows; ++o)
        worst = std::max(worst, std::abs(y[o] - d[o]) / std::max({std::abs(d[o]), 1e-9 * mag[o], 1e-300}));
    return worst;
}

}  // namespace crossbar_check
