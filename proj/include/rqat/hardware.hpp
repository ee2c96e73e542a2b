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
#include <vector>

#include "rqat/quantizer.hpp"

namespace rqat {

/// Per-weight stuck-at masks, packed like codes (bit j <-> multiplier r_j).
struct FaultMap {
    std::size_t count = 0;
    int bits = 0;
    std::vector<Code> stuck_at_0;
    std::vector<Code> stuck_at_1;
    std::uint64_t seed = 0;
    double rate = 0.0;

    Code stuck_mask(std::size_t i) const noexcept { return stuck_at_0[i] | stuck_at_1[i]; }
    int stuck_bits(std::size_t i) const noexcept;
    bool any() const noexcept;
    /// Empty map (no stuck cells) of the given shape.
    static FaultMap none(std::size_t count, int bits);
};

/// Which of the 2^N sorted levels each weight can still reach.
struct ValidityMask {
    std::size_t count = 0;
    std::size_t levels = 0;
    std::vector<std::uint8_t> valid;  // row-major (count, levels)

    std::span<const std::uint8_t> row(std::size_t i) const { return {valid.data() + i * levels, levels}; }
    bool at(std::size_t i, std::size_t q) const { return valid[i * levels + q] != 0; }
    std::size_t row_count(std::size_t i) const;
    static ValidityMask all_valid(std::size_t count, std::size_t levels);
};

/// Frozen device-to-device LRS factors, one per weight bit cell.
struct VariabilityMap {
    std::size_t count = 0;
    int bits = 0;
    std::vector<double> factors;  // row-major (count, bits)
    double sigma_over_mu = 0.0;
    std::uint64_t seed = 0;

    std::span<const double> row(std::size_t i) const {
        return {factors.data() + i * static_cast<std::size_t>(bits), static_cast<std::size_t>(bits)};
    }
    static VariabilityMap unit(std::size_t count, int bits);
};

inline constexpr double kVariabilityFloor = 0.05;

/// Each bit cell is faulty with probability `rate`; a faulty cell is stuck at
/// 0 or 1 with equal probability. Draws are keyed on (seed, cell index).
FaultMap sample_fault_map(std::size_t count, int bits, double rate, std::uint64_t seed);

ValidityMask validity_from_faults(const FaultMap& faults, const LevelSet& levels);

/// Factors ~ Normal(1, sigma_over_mu) truncated below at kVariabilityFloor
/// (rejection, keyed on seed, cell and attempt).
VariabilityMap sample_variability_map(std::size_t count, int bits, double sigma_over_mu, std::uint64_t seed);

constexpr Code apply_faults(Code code, Code stuck_at_0, Code stuck_at_1) noexcept {
    return (code & ~stuck_at_0) | stuck_at_1;
}

std::vector<Code> apply_faults_to_codes(std::span<const Code> codes, const FaultMap& faults);

/// Nearest level among the valid entries of one validity row (ties: smaller
/// code). Returns levels.size() when the row has no valid level.
std::size_t nearest_valid_level(const LevelSet& levels, std::span<const std::uint8_t> valid_row, double x) noexcept;

/// Nearest valid level for every weight (unaffected weights get their plain
/// nearest level). Rows with no valid entry are left as-is with code 0.
Quantized quantize_valid(std::span<const double> weights, const LevelSet& levels, const ValidityMask& validity);

/// Replaces fault-affected weights with their nearest valid level value.
std::vector<double> snap_to_nearest_valid(std::span<const double> weights, const LevelSet& levels,
                                          const ValidityMask& validity);

/// Nearest level of weight i's perturbed level set {<var_i * r, S> + c}.
/// Returns the winning code; `value` receives the perturbed level.
Code nearest_perturbed_level(std::span<const double> multipliers, double offset, std::span<const double> factors,
                             double x, double& value) noexcept;

/// <var * r, code> + c with the canonical summation order.
double perturbed_level_value(std::span<const double> multipliers, double offset, std::span<const double> factors,
                             Code code) noexcept;

}  // namespace rqat
