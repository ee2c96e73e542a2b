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

#include "rqat/regularizers.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "rqat/errors.hpp"

namespace rqat {

std::string_view to_string(AlphaMode mode) { return mode == AlphaMode::bit_count ? "bit_count" : "lsq_count"; }

AlphaMode alpha_mode_from_string(std::string_view name) {
    if (name == "lsq_count") return AlphaMode::lsq_count;
    if (name == "bit_count") return AlphaMode::bit_count;
    throw ParameterError("unknown alpha mode '" + std::string(name) + "'");
}

LayerScale layer_scale(int bits, bool is_signed, std::size_t count, AlphaMode mode) {
    if (bits < 1 || bits > kMaxBits) throw ParameterError("bits must be in [1, 16]");
    if (count < 1) throw ParameterError("layer scale needs at least one element");
    const int qp = positive_levels(bits, is_signed);
    if (qp < 1) throw ParameterError("Q_P = 0 for a 1-bit signed quantizer; alpha is undefined");
    const double n = mode == AlphaMode::lsq_count ? static_cast<double>(count) : static_cast<double>(bits);
    return LayerScale{1.0 / std::sqrt(n * qp), qp, count};
}

double default_delta(const LevelSet& levels, double delta_factor) {
    const double range = levels.max_value() - levels.min_value();
    return delta_factor * range * range;
}

namespace {

void check_registration(std::size_t n_weights, int bits, const LayerScale& scale) {
    if (n_weights != scale.count)
        throw ConfigError("layer scale registered for " + std::to_string(scale.count) + " weights, got " +
                          std::to_string(n_weights));
    if (scale.q_p != positive_levels(bits, true) && scale.q_p != positive_levels(bits, false))
        throw ConfigError("layer scale Q_P=" + std::to_string(scale.q_p) + " does not match a " +
                          std::to_string(bits) + "-bit level set");
}

RegularizerTerm empty_term(std::size_t n, int bits) {
    RegularizerTerm t;
    t.grad_weights.assign(n, 0.0);
    t.grad_multipliers.assign(static_cast<std::size_t>(bits), 0.0);
    return t;
}

// Adds one selected (weight, level) pair. `factors` scales the multiplier
// gradient per bit (null for ideal levels).
inline void accumulate(RegularizerTerm& t, std::size_t i, double residual, Code code, const double* factors,
                       double coef) {
    t.loss += residual * residual;
    t.grad_weights[i] = coef * residual;
    for (std::size_t j = 0; j < t.grad_multipliers.size(); ++j)
        if ((code >> j) & 1u) t.grad_multipliers[j] -= coef * residual * (factors ? factors[j] : 1.0);
    t.grad_offset -= coef * residual;
}

inline void finish(RegularizerTerm& t, double scale) { t.loss *= scale; }

}  // namespace

RegularizerTerm qat_loss(std::span<const double> weights, const LevelSet& levels, const LayerScale& scale,
                         double lambda) {
    check_registration(weights.size(), levels.bits, scale);
    RegularizerTerm t = empty_term(weights.size(), levels.bits);
    const double s = lambda * scale.alpha;
    const double coef = 2.0 * s;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::size_t k = nearest_level(levels, weights[i]);
        accumulate(t, i, weights[i] - levels.values[k], levels.codes[k], nullptr, coef);
    }
    finish(t, s);
    return t;
}

RegularizerTerm fault_aware_loss(std::span<const double> weights, const LevelSet& levels,
                                 const ValidityMask& validity, const LayerScale& scale, double lambda, double delta) {
    check_registration(weights.size(), levels.bits, scale);
    if (validity.count != weights.size() || validity.levels != levels.size())
        throw ShapeError("validity mask is (" + std::to_string(validity.count) + ", " +
                         std::to_string(validity.levels) + "), expected (" + std::to_string(weights.size()) + ", " +
                         std::to_string(levels.size()) + ")");
    const double range = levels.max_value() - levels.min_value();
    if (!(delta > range * range))
        throw ConfigError("delta must exceed the squared level range (" + std::to_string(range * range) + ")");

    RegularizerTerm t = empty_term(weights.size(), levels.bits);
    const double s = lambda * scale.alpha;
    const double coef = 2.0 * s;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto row = validity.row(i);
        const std::size_t k = nearest_valid_level(levels, row, weights[i]);
        bool any_invalid = false;
        for (auto v : row) any_invalid |= v == 0;
        if (k == levels.size()) {
            t.loss += delta;  // fully unreachable row: constant, no gradient
            continue;
        }
        const double residual = weights[i] - levels.values[k];
        if (any_invalid && residual * residual > delta) {
            t.loss += delta;
            continue;
        }
        accumulate(t, i, residual, levels.codes[k], nullptr, coef);
    }
    finish(t, s);
    return t;
}

RegularizerTerm variability_aware_loss(std::span<const double> weights, const QuantizerParams& params,
                                       const VariabilityMap& var_map, const LayerScale& scale, double lambda) {
    params.validate();
    check_registration(weights.size(), params.bits, scale);
    if (var_map.count != weights.size() || var_map.bits != params.bits)
        throw ShapeError("variability map is (" + std::to_string(var_map.count) + ", " +
                         std::to_string(var_map.bits) + "), expected (" + std::to_string(weights.size()) + ", " +
                         std::to_string(params.bits) + ")");
    const auto r = params.effective_multipliers();
    RegularizerTerm t = empty_term(weights.size(), params.bits);
    const double s = lambda * scale.alpha;
    const double coef = 2.0 * s;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto f = var_map.row(i);
        double value = 0.0;
        const Code code = nearest_perturbed_level(r, params.offset, f, weights[i], value);
        accumulate(t, i, weights[i] - value, code, f.data(), coef);
    }
    finish(t, s);
    return t;
}

}  // namespace rqat
