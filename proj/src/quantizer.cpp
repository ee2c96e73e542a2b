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

#include "rqat/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rqat/errors.hpp"

namespace rqat {

std::string_view to_string(QuantMode mode) {
    switch (mode) {
        case QuantMode::fixed: return "fixed";
        case QuantMode::learned_scale: return "learned_scale";
        case QuantMode::non_uniform: return "non_uniform";
    }
    return "non_uniform";
}

QuantMode quant_mode_from_string(std::string_view name) {
    if (name == "fixed") return QuantMode::fixed;
    if (name == "learned_scale") return QuantMode::learned_scale;
    if (name == "non_uniform") return QuantMode::non_uniform;
    throw ParameterError("unknown quantizer mode '" + std::string(name) + "'");
}

int positive_levels(int bits, bool is_signed) noexcept {
    return is_signed ? (1 << (bits - 1)) - 1 : (1 << bits) - 1;
}

std::vector<double> QuantizerParams::effective_multipliers() const {
    if (mode == QuantMode::learned_scale) {
        const double s = multipliers.empty() ? 0.0 : multipliers.front();
        std::vector<double> r(static_cast<std::size_t>(bits));
        for (int j = 0; j < bits; ++j) r[static_cast<std::size_t>(j)] = s * std::ldexp(1.0, j);
        return r;
    }
    return multipliers;
}

void QuantizerParams::validate() const {
    if (bits < 1 || bits > kMaxBits)
        throw ParameterError("bits must be in [1, " + std::to_string(kMaxBits) + "], got " + std::to_string(bits));
    const std::size_t expected = mode == QuantMode::learned_scale ? 1 : static_cast<std::size_t>(bits);
    if (multipliers.size() != expected)
        throw ParameterError("quantizer in mode " + std::string(to_string(mode)) + " needs " +
                             std::to_string(expected) + " multipliers, got " + std::to_string(multipliers.size()));
    for (double r : multipliers)
        if (!std::isfinite(r)) throw ParameterError("non-finite bit multiplier");
    if (!std::isfinite(offset)) throw ParameterError("non-finite quantizer offset");
}

double level_value(std::span<const double> multipliers, double offset, Code code) noexcept {
    double dot = 0.0;
    for (std::size_t j = 0; j < multipliers.size(); ++j)
        if ((code >> j) & 1u) dot += multipliers[j];
    return dot + offset;
}

LevelSet build_levels(std::span<const double> multipliers, double offset) {
    const std::size_t n = multipliers.size();
    if (n < 1 || n > static_cast<std::size_t>(kMaxBits)) throw ParameterError("level set needs 1..16 multipliers");
    for (double r : multipliers)
        if (!std::isfinite(r)) throw ParameterError("non-finite bit multiplier");
    if (!std::isfinite(offset)) throw ParameterError("non-finite quantizer offset");

    const std::size_t count = std::size_t{1} << n;
    std::vector<double> raw(count);
    for (Code c = 0; c < count; ++c) raw[c] = level_value(multipliers, offset, c);

    std::vector<Code> order(count);
    std::iota(order.begin(), order.end(), Code{0});
    std::sort(order.begin(), order.end(), [&](Code a, Code b) { return raw[a] < raw[b] || (raw[a] == raw[b] && a < b); });

    LevelSet out;
    out.bits = static_cast<int>(n);
    out.multipliers.assign(multipliers.begin(), multipliers.end());
    out.offset = offset;
    out.values.reserve(count);
    out.codes = std::move(order);
    for (Code c : out.codes) out.values.push_back(raw[c]);
    out.thresholds.resize(count - 1);
    for (std::size_t i = 0; i + 1 < count; ++i) out.thresholds[i] = (out.values[i] + out.values[i + 1]) / 2.0;
    return out;
}

LevelSet build_levels(const QuantizerParams& params) {
    params.validate();
    const auto r = params.effective_multipliers();
    return build_levels(r, params.offset);
}

std::size_t nearest_level(const LevelSet& levels, double x) noexcept {
    const auto& v = levels.values;
    const std::size_t n = v.size();
    // First level >= x; fl(v - x) is monotone in v on either side of x, so the
    // minimum distance sits at hi or hi - 1. Equal-distance runs are scanned
    // outwards so the smallest code wins as in an exhaustive search.
    const std::size_t hi = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    double best = INFINITY;
    if (hi < n) best = std::abs(x - v[hi]);
    if (hi > 0) best = std::min(best, std::abs(x - v[hi - 1]));

    std::size_t pick = n;
    auto consider = [&](std::size_t i) {
        if (pick == n || levels.codes[i] < levels.codes[pick]) pick = i;
    };
    for (std::size_t i = hi; i < n && std::abs(x - v[i]) == best; ++i) consider(i);
    for (std::size_t i = hi; i > 0 && std::abs(x - v[i - 1]) == best; --i) consider(i - 1);
    return pick;
}

Quantized quantize(std::span<const double> x, const LevelSet& levels) {
    Quantized q;
    q.values.resize(x.size());
    q.codes.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t k = nearest_level(levels, x[i]);
        q.values[i] = levels.values[k];
        q.codes[i] = levels.codes[k];
    }
    return q;
}

std::vector<double> dequantize_codes(std::span<const Code> codes, const QuantizerParams& params) {
    params.validate();
    const auto r = params.effective_multipliers();
    const Code limit = Code{1} << params.bits;
    std::vector<double> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] >= limit)
            throw ShapeError("code " + std::to_string(codes[i]) + " is wider than " + std::to_string(params.bits) + " bits");
        out[i] = level_value(r, params.offset, codes[i]);
    }
    return out;
}

QuantizerParams init_quantizer(std::span<const double> weights, int bits, bool is_signed, QuantMode mode) {
    if (bits < 1 || bits > kMaxBits) throw ParameterError("bits out of range");
    const int qp = positive_levels(bits, is_signed);
    double mean_abs = 0.0;
    for (double w : weights) mean_abs += std::abs(w);
    if (!weights.empty()) mean_abs /= static_cast<double>(weights.size());
    double s = 2.0 * mean_abs / std::sqrt(static_cast<double>(std::max(qp, 1)));
    if (!(s > 0.0)) s = 1e-3;

    QuantizerParams p;
    p.bits = bits;
    p.is_signed = is_signed;
    p.mode = mode;
    if (mode == QuantMode::learned_scale) {
        p.multipliers = {s};
    } else {
        p.multipliers.resize(static_cast<std::size_t>(bits));
        for (int j = 0; j < bits; ++j) p.multipliers[static_cast<std::size_t>(j)] = s * std::ldexp(1.0, j);
    }
    p.offset = is_signed ? -s * (std::ldexp(1.0, bits - 1) - 0.5) : 0.0;
    return p;
}

}  // namespace rqat
