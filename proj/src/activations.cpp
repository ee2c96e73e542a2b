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

#include "rqat/activations.hpp"

#include <string>

#include "rqat/errors.hpp"

namespace rqat {

ActQuantizer make_act_quantizer(int bits, double scale) {
    if (bits < 1 || bits > 16) throw ParameterError("activation bits must be in [1, 16]");
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw ParameterError("activation scale must be positive, got " + std::to_string(scale));
    return ActQuantizer{scale, bits, (1 << bits) - 1};
}

std::vector<double> act_quantize(std::span<const double> v, const ActQuantizer& q) {
    if (!(q.scale > 0.0)) throw ParameterError("activation scale must be positive");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = act_quantize(v[i], q);
    return out;
}

ActGradient act_quantize_backward(std::span<const double> v, std::span<const double> grad_out,
                                  const ActQuantizer& q, std::size_t count) {
    if (!(q.scale > 0.0)) throw ParameterError("activation scale must be positive");
    if (v.size() != grad_out.size()) throw ShapeError("activation and gradient sizes differ");
    ActGradient g;
    g.grad_input.resize(v.size());
    double gs = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        g.grad_input[i] = grad_out[i] * act_input_grad(v[i], q);
        gs += grad_out[i] * act_scale_grad(v[i], q);
    }
    g.grad_scale = gs / std::sqrt(static_cast<double>(count) * q.q_p);
    return g;
}

double init_act_scale(std::span<const double> v, int bits) {
    const int qp = (1 << bits) - 1;
    double m = 0.0;
    for (double x : v) m += std::abs(x);
    if (!v.empty()) m /= static_cast<double>(v.size());
    const double s = 2.0 * m / std::sqrt(static_cast<double>(qp));
    return s > 0.0 ? s : 1e-3;
}

}  // namespace rqat
