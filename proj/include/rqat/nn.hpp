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

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rqat/activations.hpp"
#include "rqat/hardware.hpp"
#include "rqat/quantizer.hpp"
#include "rqat/regularizers.hpp"

namespace rqat {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Images are {N, H, W, C} (NHWC); event frames are {T, N, F}.
struct Batch {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<int> labels;

    std::size_t samples() const noexcept { return labels.size(); }
};

/// Weight quantizer state attached to a registered layer.
struct WeightSlot {
    QuantizerParams params;
    LayerScale scale;
    std::vector<double> grad_multipliers;  // same length as params.multipliers
    double grad_offset = 0.0;
    std::vector<double> mom_multipliers;
    double mom_offset = 0.0;
    std::vector<Code> codes;  // filled when the layer is mapped onto levels
    std::optional<FaultMap> faults;
    std::optional<VariabilityMap> variability;
};

/// Input activation quantizer attached to a registered layer.
struct ActSlot {
    ActQuantizer quantizer;
    bool calibrated = false;
    bool trainable = true;
    double grad_scale = 0.0;
    double mom_scale = 0.0;
};

/// Replacement for the weight product of a quantized-input layer: receives
/// the integer activation codes (rows x in) and the activation scale, returns
/// rows x out without bias.
using MatmulExecutor = std::function<Matrix(const Matrix& codes, double act_scale)>;

/// Parameters of one matrix-multiplication layer (dense or convolution).
class MatmulLayer {
public:
    MatmulLayer(std::string name, std::size_t out, std::size_t in);

    std::string name;
    Matrix weight;  // out x in
    Vector bias;
    Matrix grad_weight;
    Vector grad_bias;
    Matrix mom_weight;
    Vector mom_bias;
    std::optional<WeightSlot> quant;
    std::optional<ActSlot> act;
    MatmulExecutor executor;

    std::size_t out_features() const noexcept { return static_cast<std::size_t>(weight.rows()); }
    std::size_t in_features() const noexcept { return static_cast<std::size_t>(weight.cols()); }
    std::size_t weight_count() const noexcept { return static_cast<std::size_t>(weight.size()); }
    std::span<double> weights() noexcept { return {weight.data(), weight_count()}; }
    std::span<const double> weights() const noexcept { return {weight.data(), weight_count()}; }

    void zero_grad();

    /// Quantizes `x` in place through the activation slot (if any), writing
    /// integer codes to `codes` and returning the scale. Calibrates the scale
    /// from `x` on first use.
    double quantize_input(Matrix& x, Matrix& codes);
    /// x * W^T + b, honouring `executor` when inputs are quantized.
    Matrix apply(const Matrix& x, const Matrix* codes, double act_scale) const;
    /// STE backward through the activation slot; accumulates grad_scale.
    void input_backward(const Matrix& pre_quant, Matrix& grad, std::size_t per_sample) ;
};

enum class ArchKind { cnn4, mlp5, snn2 };

struct LifParams {
    double beta = 0.25;
    double v_th = 1.0;
    double v_reset = 0.0;
};

struct ArchSpec {
    ArchKind kind = ArchKind::cnn4;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t channels = 3;
    std::size_t features = 0;  // flat input width (mlp5, snn2)
    std::vector<std::size_t> widths;
    std::size_t classes = 10;
    LifParams lif;
    double surrogate_width = 2.0;
    double logit_scale = 10.0;
};

std::string to_string(ArchKind kind);
ArchKind arch_from_string(const std::string& name);

class Network {
public:
    virtual ~Network() = default;
    virtual std::unique_ptr<Network> clone() const = 0;
    virtual const ArchSpec& arch() const = 0;
    /// Class scores (N x classes). `train` caches what backward needs.
    virtual Matrix forward(const Batch& batch, bool train) = 0;
    /// Accumulates parameter gradients from d(loss)/d(scores).
    virtual void backward(const Matrix& grad_scores) = 0;
    virtual std::vector<MatmulLayer*> layers() = 0;

    std::vector<const MatmulLayer*> layers() const;
    void zero_grad();
};

/// Builds an architecture with seeded He-style initialization.
std::unique_ptr<Network> make_network(const ArchSpec& spec, std::uint64_t seed);

/// Mean cross-entropy over the batch; writes d(loss)/d(scores) into `grad`.
double cross_entropy(const Matrix& scores, std::span<const int> labels, Matrix* grad);

/// Number of rows whose argmax (first maximum) equals the label.
std::size_t count_correct(const Matrix& scores, std::span<const int> labels);

}  // namespace rqat
