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
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rqat {

/// Packed bit code. Bit j (LSB = bit 0) selects multiplier r_j.
using Code = std::uint32_t;

inline constexpr int kMaxBits = 16;

enum class QuantMode {
    fixed,          // multipliers frozen
    learned_scale,  // one learnable scale s, effective r_j = s * 2^j
    non_uniform,    // N independent learnable multipliers
};

std::string_view to_string(QuantMode mode);
QuantMode quant_mode_from_string(std::string_view name);

/// Parameters of one layer's quantizer. In learned_scale mode `multipliers`
/// holds the single scale; otherwise it holds one entry per bit.
struct QuantizerParams {
    int bits = 4;
    std::vector<double> multipliers;
    double offset = 0.0;
    bool is_signed = true;
    QuantMode mode = QuantMode::non_uniform;

    /// Per-bit multipliers regardless of mode (length `bits`).
    std::vector<double> effective_multipliers() const;
    /// Throws ParameterError on a malformed or non-finite parameter set.
    void validate() const;
};

/// All 2^N (value, code) pairs sorted ascending by value, ties by code.
struct LevelSet {
    int bits = 0;
    std::vector<double> values;
    std::vector<Code> codes;
    std::vector<double> thresholds;  // midpoints, size 2^N - 1
    std::vector<double> multipliers;
    double offset = 0.0;

    std::size_t size() const noexcept { return values.size(); }
    double min_value() const { return values.front(); }
    double max_value() const { return values.back(); }
};

/// <r, code> + offset, summed over bits in ascending order. Every code path
/// that materializes a level goes through this summation order.
double level_value(std::span<const double> multipliers, double offset, Code code) noexcept;

LevelSet build_levels(const QuantizerParams& params);
LevelSet build_levels(std::span<const double> multipliers, double offset);

/// Index (into the sorted level set) of the nearest level. Equal distances
/// resolve to the smaller code.
std::size_t nearest_level(const LevelSet& levels, double x) noexcept;

struct Quantized {
    std::vector<double> values;
    std::vector<Code> codes;
};

Quantized quantize(std::span<const double> x, const LevelSet& levels);

std::vector<double> dequantize_codes(std::span<const Code> codes, const QuantizerParams& params);

/// LSQ-style initialization from a trained tensor: s = 2 mean|w| / sqrt(Q_P),
/// r_j = s 2^j, offset centred for signed data.
QuantizerParams init_quantizer(std::span<const double> weights, int bits, bool is_signed, QuantMode mode);

/// Q_P for the given width: 2^b - 1 unsigned, 2^(b-1) - 1 signed.
int positive_levels(int bits, bool is_signed) noexcept;

}  // namespace rqat
