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

#include "rqat/hardware.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "rqat/errors.hpp"
#include "rqat/keyed_random.hpp"

namespace rqat {

namespace {

void check_bits(int bits) {
    if (bits < 1 || bits > kMaxBits) throw ParameterError("bits must be in [1, 16], got " + std::to_string(bits));
}

constexpr std::uint64_t kFaultStream = 0xfa017ULL;
constexpr std::uint64_t kPolarityStream = 0x5a0a1ULL;
constexpr std::uint64_t kVariabilityStream = 0x7a41aULL;

}  // namespace

int FaultMap::stuck_bits(std::size_t i) const noexcept { return std::popcount(stuck_mask(i)); }

bool FaultMap::any() const noexcept {
    for (std::size_t i = 0; i < count; ++i)
        if (stuck_mask(i) != 0) return true;
    return false;
}

FaultMap FaultMap::none(std::size_t count, int bits) {
    FaultMap m;
    m.count = count;
    m.bits = bits;
    m.stuck_at_0.assign(count, 0);
    m.stuck_at_1.assign(count, 0);
    return m;
}

std::size_t ValidityMask::row_count(std::size_t i) const {
    std::size_t n = 0;
    for (auto v : row(i)) n += v != 0;
    return n;
}

ValidityMask ValidityMask::all_valid(std::size_t count, std::size_t levels) {
    ValidityMask m;
    m.count = count;
    m.levels = levels;
    m.valid.assign(count * levels, 1);
    return m;
}

VariabilityMap VariabilityMap::unit(std::size_t count, int bits) {
    VariabilityMap m;
    m.count = count;
    m.bits = bits;
    m.factors.assign(count * static_cast<std::size_t>(bits), 1.0);
    return m;
}

FaultMap sample_fault_map(std::size_t count, int bits, double rate, std::uint64_t seed) {
    check_bits(bits);
    if (!(rate >= 0.0 && rate <= 1.0)) throw ParameterError("fault rate must be in [0, 1], got " + std::to_string(rate));
    FaultMap m = FaultMap::none(count, bits);
    m.seed = seed;
    m.rate = rate;
    for (std::size_t i = 0; i < count; ++i) {
        for (int j = 0; j < bits; ++j) {
            const std::uint64_t cell = i * static_cast<std::uint64_t>(bits) + static_cast<std::uint64_t>(j);
            if (!(keyed::uniform01(keyed::key(seed, kFaultStream, cell)) < rate)) continue;
            const Code bit = Code{1} << j;
            if (keyed::uniform01(keyed::key(seed, kPolarityStream, cell)) < 0.5)
                m.stuck_at_0[i] |= bit;
            else
                m.stuck_at_1[i] |= bit;
        }
    }
    return m;
}

ValidityMask validity_from_faults(const FaultMap& faults, const LevelSet& levels) {
    if (faults.bits != levels.bits)
        throw ShapeError("fault map has " + std::to_string(faults.bits) + " bits, level set has " +
                         std::to_string(levels.bits));
    ValidityMask m;
    m.count = faults.count;
    m.levels = levels.size();
    m.valid.resize(m.count * m.levels);
    for (std::size_t i = 0; i < faults.count; ++i) {
        const Code s0 = faults.stuck_at_0[i];
        const Code s1 = faults.stuck_at_1[i];
        for (std::size_t q = 0; q < m.levels; ++q) {
            const Code c = levels.codes[q];
            m.valid[i * m.levels + q] = static_cast<std::uint8_t>((c & s0) == 0 && (c & s1) == s1);
        }
    }
    return m;
}

VariabilityMap sample_variability_map(std::size_t count, int bits, double sigma_over_mu, std::uint64_t seed) {
    check_bits(bits);
    if (!(sigma_over_mu >= 0.0 && sigma_over_mu < 1.0))
        throw ParameterError("sigma/mu must be in [0, 1), got " + std::to_string(sigma_over_mu));
    VariabilityMap m = VariabilityMap::unit(count, bits);
    m.sigma_over_mu = sigma_over_mu;
    m.seed = seed;
    if (sigma_over_mu == 0.0) return m;
    // Draws below the floor are clamped to it, which keeps the spread close
    // to sigma/mu (resampling would shrink it and shift the mean).
    for (std::size_t cell = 0; cell < m.factors.size(); ++cell) {
        const double f = 1.0 + sigma_over_mu * keyed::normal(keyed::key(seed, kVariabilityStream, cell));
        m.factors[cell] = std::max(f, kVariabilityFloor);
    }
    return m;
}

std::vector<Code> apply_faults_to_codes(std::span<const Code> codes, const FaultMap& faults) {
    if (codes.size() != faults.count)
        throw ShapeError("code tensor has " + std::to_string(codes.size()) + " entries, fault map " +
                         std::to_string(faults.count));
    std::vector<Code> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        out[i] = apply_faults(codes[i], faults.stuck_at_0[i], faults.stuck_at_1[i]);
    return out;
}

std::size_t nearest_valid_level(const LevelSet& levels, std::span<const std::uint8_t> valid_row, double x) noexcept {
    std::size_t pick = levels.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < levels.size(); ++q) {
        if (!valid_row[q]) continue;
        const double d = std::abs(x - levels.values[q]);
        if (pick == levels.size() || d < best || (d == best && levels.codes[q] < levels.codes[pick])) {
            best = d;
            pick = q;
        }
    }
    return pick;
}

Quantized quantize_valid(std::span<const double> weights, const LevelSet& levels, const ValidityMask& validity) {
    if (validity.count != weights.size() || validity.levels != levels.size())
        throw ShapeError("validity mask shape does not match weights/levels");
    Quantized q;
    q.values.assign(weights.begin(), weights.end());
    q.codes.assign(weights.size(), 0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const std::size_t k = nearest_valid_level(levels, validity.row(i), weights[i]);
        if (k == levels.size()) continue;
        q.values[i] = levels.values[k];
        q.codes[i] = levels.codes[k];
    }
    return q;
}

std::vector<double> snap_to_nearest_valid(std::span<const double> weights, const LevelSet& levels,
                                          const ValidityMask& validity) {
    if (validity.count != weights.size() || validity.levels != levels.size())
        throw ShapeError("validity mask shape does not match weights/levels");
    std::vector<double> out(weights.begin(), weights.end());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (validity.row_count(i) == levels.size()) continue;
        const std::size_t k = nearest_valid_level(levels, validity.row(i), weights[i]);
        if (k < levels.size()) out[i] = levels.values[k];
    }
    return out;
}

double perturbed_level_value(std::span<const double> multipliers, double offset, std::span<const double> factors,
                             Code code) noexcept {
    double dot = 0.0;
    for (std::size_t j = 0; j < multipliers.size(); ++j)
        if ((code >> j) & 1u) dot += factors[j] * multipliers[j];
    return dot + offset;
}

Code nearest_perturbed_level(std::span<const double> multipliers, double offset, std::span<const double> factors,
                             double x, double& value) noexcept {
    const Code count = Code{1} << multipliers.size();
    Code pick = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Code c = 0; c < count; ++c) {
        const double v = perturbed_level_value(multipliers, offset, factors, c);
        const double d = std::abs(x - v);
        if (d < best) {  // ascending code order: strict < keeps the smaller code on ties
            best = d;
            pick = c;
            value = v;
        }
    }
    return pick;
}

}  // namespace rqat
