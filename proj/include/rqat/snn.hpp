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

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rqat/nn.hpp"

namespace rqat {

/// Membrane state of one LIF population.
struct LifState {
    std::vector<double> v;
    LifParams params;
};

struct LifStep {
    std::vector<std::uint8_t> spikes;
    std::vector<double> h;  // charged potential before the spike decision
    LifState next;
};

/// H = V + beta (x - (V - V_reset)); S = [H >= V_th]; V' = H (1 - S) + V_reset S.
LifStep lif_step(std::span<const double> x, const LifState& state);

enum class SurrogateKind { arctan };

struct SurrogateConfig {
    SurrogateKind kind = SurrogateKind::arctan;
    double width = 2.0;
};

/// Derivative of the arctan surrogate: a / (2 (1 + (pi a u / 2)^2)).
double surrogate_grad(double u, const SurrogateConfig& cfg) noexcept;
std::vector<double> surrogate_grad(std::span<const double> u, const SurrogateConfig& cfg);

/// Two dense layers, each followed by a LIF population, unrolled over T
/// frames. Scores are readout spike rates; forward() returns them multiplied
/// by the architecture's logit scale.
class SpikingMlp final : public Network {
public:
    SpikingMlp(ArchSpec spec, std::size_t features, std::size_t hidden, std::size_t classes);
    SpikingMlp(const SpikingMlp& other);

    std::unique_ptr<Network> clone() const override { return std::make_unique<SpikingMlp>(*this); }
    const ArchSpec& arch() const override { return spec_; }
    Matrix forward(const Batch& frames, bool train) override;
    void backward(const Matrix& grad_scores) override;
    std::vector<MatmulLayer*> layers() override { return {&l1_, &l2_}; }

    /// Readout spike rates (N x classes) averaged over time.
    Matrix rates(const Batch& frames, bool train);

private:
    ArchSpec spec_;
    MatmulLayer l1_;
    MatmulLayer l2_;
    // Per-step caches for backpropagation through time.
    std::vector<Matrix> in_, h1_, s1_, h2_, s2_;
};

std::unique_ptr<Network> make_spiking_mlp(const ArchSpec& spec, std::uint64_t seed);

/// Runs frames (T, N, F) through the network. With `quantized_weights`, each
/// registered layer uses its nearest-level quantized weights.
Matrix run_spiking_network(const Batch& frames, const SpikingMlp& network, bool quantized_weights);

}  // namespace rqat
