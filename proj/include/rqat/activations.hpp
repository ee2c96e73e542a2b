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
#include <cstddef>
#include <span>
#include <vector>

namespace rqat {

/// Unsigned learned-step-size activation quantizer.
struct ActQuantizer {
    double scale = 1.0;
    int bits = 4;
    int q_p = 15;
};

/// Validates bits and scale; q_p = 2^bits - 1.
ActQuantizer make_act_quantizer(int bits, double scale);

/// Integer code clip(round(v / s), 0, Q_P), round-half-to-even.
inline double act_code(double v, const ActQuantizer& q) noexcept {
    const double c = std::nearbyint(v / q.scale);
    return c < 0.0 ? 0.0 : (c > q.q_p ? static_cast<double>(q.q_p) : c);
}

inline double act_quantize(double v, const ActQuantizer& q) noexcept { return act_code(v, q) * q.scale; }

/// d(output)/dv under the straight-through estimator.
inline double act_input_grad(double v, const ActQuantizer& q) noexcept {
    const double u = v / q.scale;
    return (u >= 0.0 && u <= q.q_p) ? 1.0 : 0.0;
}

/// d(output)/ds before the gradient-scale factor.
inline double act_scale_grad(double v, const ActQuantizer& q) noexcept {
    const double u = v / q.scale;
    if (u <= 0.0) return 0.0;
    if (u >= q.q_p) return static_cast<double>(q.q_p);
    return std::nearbyint(u) - u;
}

std::vector<double> act_quantize(std::span<const double> v, const ActQuantizer& q);

struct ActGradient {
    std::vector<double> grad_input;
    double grad_scale = 0.0;
};

/// Backward pass for a tensor whose per-sample element count is `count`;
/// the scale gradient is multiplied by 1/sqrt(count * Q_P).
ActGradient act_quantize_backward(std::span<const double> v, std::span<const double> grad_out,
                                  const ActQuantizer& q, std::size_t count);

/// 2 mean|v| / sqrt(Q_P) from a calibration batch.
double init_act_scale(std::span<const double> v, int bits);

}  // namespace rqat
