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
#include <optional>
#include <span>
#include <vector>

#include "rqat/activations.hpp"
#include "rqat/hardware.hpp"
#include "rqat/nn.hpp"
#include "rqat/quantizer.hpp"

namespace rqat {

/// Digital arrays read stored bits exactly and apply one r_j per bit plane
/// after integer accumulation. Analog arrays weight each cell by its own
/// conductance var_ij * r_j.
enum class ArrayModel { digital, analog };

struct CrossbarLayer {
    std::size_t rows = 0;  // output features
    std::size_t cols = 0;  // input features
    std::vector<Code> codes;  // rows x cols, row-major
    QuantizerParams params;
    std::optional<FaultMap> faults;
    std::optional<VariabilityMap> variability;
    ActQuantizer act;
    ArrayModel model = ArrayModel::digital;

    /// Throws ConfigError when codes, params and maps disagree.
    void validate() const;
};

struct CrossbarOptions {
    /// Two's-complement accumulator width; 0 keeps exact accumulation.
    int accumulator_bits = 0;
};

/// Per-plane integer accumulations for one input vector.
struct PlaneSums {
    std::vector<std::int64_t> planes;  // rows x bits
    std::int64_t offset_column = 0;    // sum of input codes
};

/// A_j[o] = sum_in q[in] * bit_j(code[o, in]) on the (fault-applied) codes.
PlaneSums accumulate_planes(std::span<const std::int64_t> input_codes, const CrossbarLayer& layer,
                            const CrossbarOptions& options = {});

/// Quantizes x with the layer's activation quantizer, accumulates bit planes
/// and applies the single final scaling s_a (sum_j r_j A_j + c sum q).
std::vector<double> bit_sliced_matvec(std::span<const double> x, const CrossbarLayer& layer,
                                      const CrossbarOptions& options = {});

/// Batched form on integer activation codes (batch x cols); returns batch x rows.
Matrix bit_sliced_matmul(const Matrix& input_codes, double act_scale, const CrossbarLayer& layer,
                         const CrossbarOptions& options = {});

/// Crossbar view of a registered layer. Requires stored codes.
CrossbarLayer crossbar_from_layer(const MatmulLayer& layer, ArrayModel model);

}  // namespace rqat
