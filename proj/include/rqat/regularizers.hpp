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

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rqat/hardware.hpp"
#include "rqat/quantizer.hpp"

namespace rqat {

/// How the per-layer factor alpha_l is formed. `lsq_count` uses the
/// trainable element count (LSQ convention), `bit_count` the bit width.
enum class AlphaMode { lsq_count, bit_count };

std::string_view to_string(AlphaMode mode);
AlphaMode alpha_mode_from_string(std::string_view name);

struct RegularizerConfig {
    double lambda = 100.0;
    double delta_factor = 10.0;
    AlphaMode alpha_mode = AlphaMode::lsq_count;
};

struct LayerScale {
    double alpha = 1.0;
    int q_p = 1;
    std::size_t count = 0;
};

/// alpha = 1/sqrt(count * Q_P) (or bits * Q_P in bit_count mode). Rejects
/// configurations with Q_P = 0 (1-bit signed).
LayerScale layer_scale(int bits, bool is_signed, std::size_t count, AlphaMode mode = AlphaMode::lsq_count);

/// Loss value with gradients. The nearest-level selection is held constant
/// under differentiation; grad_multipliers is w.r.t. the per-bit r.
struct RegularizerTerm {
    double loss = 0.0;
    std::vector<double> grad_weights;
    std::vector<double> grad_multipliers;
    double grad_offset = 0.0;
};

/// lambda * alpha * sum_i min_q |w_i - w_q|^2
RegularizerTerm qat_loss(std::span<const double> weights, const LevelSet& levels, const LayerScale& scale,
                         double lambda);

/// lambda * alpha * sum_i min_q (val_iq |w_i - w_q|^2 + (1 - val_iq) delta)
RegularizerTerm fault_aware_loss(std::span<const double> weights, const LevelSet& levels,
                                 const ValidityMask& validity, const LayerScale& scale, double lambda, double delta);

/// Per-weight level sets built from (var_i * r, c).
RegularizerTerm variability_aware_loss(std::span<const double> weights, const QuantizerParams& params,
                                       const VariabilityMap& var_map, const LayerScale& scale, double lambda);

/// delta_factor * (l_max - l_min)^2
double default_delta(const LevelSet& levels, double delta_factor = 10.0);

}  // namespace rqat
