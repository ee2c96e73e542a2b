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

#include "rqat/crossbar.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rqat/errors.hpp"

namespace rqat {

void CrossbarLayer::validate() const {
    params.validate();
    if (codes.size() != rows * cols)
        throw ConfigError("crossbar has " + std::to_string(codes.size()) + " codes for a " + std::to_string(rows) +
                          "x" + std::to_string(cols) + " array");
    const Code limit = Code{1} << params.bits;
    for (Code c : codes)
        if (c >= limit) throw ConfigError("crossbar code wider than the quantizer's bit count");
    if (faults && (faults->count != codes.size() || faults->bits != params.bits))
        throw ConfigError("fault map shape does not match the crossbar");
    if (variability && (variability->count != codes.size() || variability->bits != params.bits))
        throw ConfigError("variability map shape does not match the crossbar");
    if (variability && model == ArrayModel::digital)
        throw ConfigError("digital arrays read bits exactly; LRS variability needs the analog model");
    if (!(act.scale > 0.0) || act.q_p < 1) throw ConfigError("crossbar activation quantizer is not initialized");
    // Exact accumulation bound: every plane sum stays below 2^53.
    if (static_cast<double>(cols) * act.q_p >= 0x1.0p53) throw ConfigError("crossbar too wide for exact accumulation");
}

namespace {

std::vector<Code> stored_codes(const CrossbarLayer& layer) {
    return layer.faults ? apply_faults_to_codes(layer.codes, *layer.faults) : layer.codes;
}

std::int64_t saturate(std::int64_t v, int width) {
    if (width <= 0 || width >= 64) return v;
    const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
    const std::int64_t lo = -hi - 1;
    return v > hi ? hi : (v < lo ? lo : v);
}

}  // namespace

PlaneSums accumulate_planes(std::span<const std::int64_t> input_codes, const CrossbarLayer& layer,
                            const CrossbarOptions& options) {
    layer.validate();
    if (input_codes.size() != layer.cols) throw ShapeError("input length does not match crossbar columns");
    const auto codes = stored_codes(layer);
    const auto bits = static_cast<std::size_t>(layer.params.bits);
    PlaneSums sums;
    sums.planes.assign(layer.rows * bits, 0);
    const int w = options.accumulator_bits;
    for (std::size_t o = 0; o < layer.rows; ++o) {
        for (std::size_t i = 0; i < layer.cols; ++i) {
            const Code c = codes[o * layer.cols + i];
            const std::int64_t q = input_codes[i];
            for (std::size_t j = 0; j < bits; ++j) {
                if (!((c >> j) & 1u)) continue;
                auto& acc = sums.planes[o * bits + j];
                acc = saturate(acc + q, w);
            }
        }
    }
    for (auto q : input_codes) sums.offset_column = saturate(sums.offset_column + q, w);
    return sums;
}

std::vector<double> bit_sliced_matvec(std::span<const double> x, const CrossbarLayer& layer,
                                      const CrossbarOptions& options) {
    layer.validate();
    if (x.size() != layer.cols) throw ShapeError("input length does not match crossbar columns");
    std::vector<std::int64_t> q(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q[i] = static_cast<std::int64_t>(act_code(x[i], layer.act));
    const auto r = layer.params.effective_multipliers();
    const auto bits = r.size();
    const double c = layer.params.offset;
    const double s_a = layer.act.scale;
    std::vector<double> y(layer.rows, 0.0);

    if (layer.model == ArrayModel::analog && layer.variability) {
        // Each cell conducts var_ij * r_j; currents sum along the column.
        const auto codes = stored_codes(layer);
        std::int64_t total = 0;
        for (auto v : q) total += v;
        for (std::size_t o = 0; o < layer.rows; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < layer.cols; ++i) {
                const std::size_t cell = o * layer.cols + i;
                const auto f = layer.variability->row(cell);
                double g = 0.0;
                for (std::size_t j = 0; j < bits; ++j)
                    if ((codes[cell] >> j) & 1u) g += f[j] * r[j];
                acc += static_cast<double>(q[i]) * g;
            }
            y[o] = s_a * (acc + c * static_cast<double>(total));
        }
        return y;
    }

    const PlaneSums sums = accumulate_planes(q, layer, options);
    for (std::size_t o = 0; o < layer.rows; ++o) {
        double acc = 0.0;
        for (std::size_t j = 0; j < bits; ++j) acc += r[j] * static_cast<double>(sums.planes[o * bits + j]);
        y[o] = s_a * (acc + c * static_cast<double>(sums.offset_column));
    }
    return y;
}

Matrix bit_sliced_matmul(const Matrix& input_codes, double act_scale, const CrossbarLayer& layer,
                         const CrossbarOptions& options) {
    layer.validate();
    if (static_cast<std::size_t>(input_codes.cols()) != layer.cols)
        throw ShapeError("input width does not match crossbar columns");
    const auto r = layer.params.effective_multipliers();
    const auto bits = r.size();
    const auto rows = static_cast<Eigen::Index>(layer.rows);
    const auto cols = static_cast<Eigen::Index>(layer.cols);
    const auto codes = stored_codes(layer);
    const Eigen::VectorXd offset_column = input_codes.rowwise().sum();
    Matrix y = Matrix::Zero(input_codes.rows(), rows);

    if (layer.model == ArrayModel::analog && layer.variability) {
        Matrix g = Matrix::Zero(rows, cols);
        for (Eigen::Index cell = 0; cell < rows * cols; ++cell) {
            const auto f = layer.variability->row(static_cast<std::size_t>(cell));
            const Code code = codes[static_cast<std::size_t>(cell)];
            double v = 0.0;
            for (std::size_t j = 0; j < bits; ++j)
                if ((code >> j) & 1u) v += f[j] * r[j];
            g.data()[cell] = v;
        }
        y.noalias() = input_codes * g.transpose();
    } else if (options.accumulator_bits > 0) {
        std::vector<std::int64_t> q(layer.cols);
        for (Eigen::Index b = 0; b < input_codes.rows(); ++b) {
            for (std::size_t i = 0; i < layer.cols; ++i)
                q[i] = static_cast<std::int64_t>(input_codes(b, static_cast<Eigen::Index>(i)));
            const auto sums = accumulate_planes(q, layer, options);
            for (Eigen::Index o = 0; o < rows; ++o) {
                double acc = 0.0;
                for (std::size_t j = 0; j < bits; ++j)
                    acc += r[j] * static_cast<double>(sums.planes[static_cast<std::size_t>(o) * bits + j]);
                y(b, o) = acc;
            }
        }
        for (Eigen::Index b = 0; b < input_codes.rows(); ++b) {
            std::int64_t total = 0;
            for (std::size_t i = 0; i < layer.cols; ++i)
                total = saturate(total + static_cast<std::int64_t>(input_codes(b, static_cast<Eigen::Index>(i))),
                                 options.accumulator_bits);
            y.row(b).array() += layer.params.offset * static_cast<double>(total);
        }
        return y * act_scale;
    } else {
        // Plane products of integer-valued operands below 2^53 are exact.
        Matrix plane(rows, cols);
        for (std::size_t j = 0; j < bits; ++j) {
            for (Eigen::Index cell = 0; cell < rows * cols; ++cell)
                plane.data()[cell] = static_cast<double>((codes[static_cast<std::size_t>(cell)] >> j) & 1u);
            const Matrix a = input_codes * plane.transpose();
            y += r[j] * a;
        }
    }
    y.colwise() += layer.params.offset * offset_column;
    return y * act_scale;
}

CrossbarLayer crossbar_from_layer(const MatmulLayer& layer, ArrayModel model) {
    if (!layer.quant) throw ConfigError("layer '" + layer.name + "' is not quantized");
    if (layer.quant->codes.size() != layer.weight_count())
        throw ConfigError("layer '" + layer.name + "' has no stored codes; quantize and snap the model first");
    if (!layer.act) throw ConfigError("layer '" + layer.name + "' has no activation quantizer");
    CrossbarLayer x;
    x.rows = layer.out_features();
    x.cols = layer.in_features();
    x.codes = layer.quant->codes;
    x.params = layer.quant->params;
    x.faults = layer.quant->faults;
    x.variability = layer.quant->variability;
    x.act = layer.act->quantizer;
    x.model = model;
    return x;
}

}  // namespace rqat
