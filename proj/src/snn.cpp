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

#include "rqat/snn.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rqat/errors.hpp"

namespace rqat {

LifStep lif_step(std::span<const double> x, const LifState& state) {
    if (x.size() != state.v.size()) throw ShapeError("LIF input and state sizes differ");
    const auto& p = state.params;
    LifStep out;
    out.spikes.resize(x.size());
    out.h.resize(x.size());
    out.next.params = p;
    out.next.v.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = state.v[i];
        const double h = v + p.beta * (x[i] - (v - p.v_reset));
        const std::uint8_t s = h - p.v_th >= 0.0 ? 1 : 0;
        out.h[i] = h;
        out.spikes[i] = s;
        out.next.v[i] = s ? p.v_reset : h;
    }
    return out;
}

double surrogate_grad(double u, const SurrogateConfig& cfg) noexcept {
    const double a = cfg.width;
    const double t = std::numbers::pi * a * u / 2.0;
    return a / (2.0 * (1.0 + t * t));
}

std::vector<double> surrogate_grad(std::span<const double> u, const SurrogateConfig& cfg) {
    if (!(cfg.width > 0.0)) throw ParameterError("surrogate width must be positive");
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = surrogate_grad(u[i], cfg);
    return out;
}

SpikingMlp::SpikingMlp(ArchSpec spec, std::size_t features, std::size_t hidden, std::size_t classes)
    : spec_(std::move(spec)), l1_("fc1", hidden, features), l2_("fc2", classes, hidden) {}

SpikingMlp::SpikingMlp(const SpikingMlp& other) : Network(), spec_(other.spec_), l1_(other.l1_), l2_(other.l2_) {}

namespace {

// One LIF update over a whole matrix; returns spikes and writes H.
Matrix lif_matrix(const Matrix& x, Matrix& v, Matrix& h, const LifParams& p) {
    h = v + p.beta * (x.array() - (v.array() - p.v_reset)).matrix();
    Matrix s = ((h.array() - p.v_th) >= 0.0).cast<double>().matrix();
    v = (h.array() * (1.0 - s.array()) + p.v_reset * s.array()).matrix();
    return s;
}

}  // namespace

Matrix SpikingMlp::rates(const Batch& frames, bool train) {
    if (frames.shape.size() != 3 || frames.shape[0] == 0) throw InputError("spiking input needs (T >= 1, N, F) frames");
    const auto T = frames.shape[0];
    const auto n = static_cast<Eigen::Index>(frames.shape[1]);
    const auto f = static_cast<Eigen::Index>(frames.shape[2]);
    if (static_cast<std::size_t>(f) != l1_.in_features()) throw ShapeError("frame width does not match layer input");

    const auto& p = spec_.lif;
    Matrix v1 = Matrix::Constant(n, static_cast<Eigen::Index>(l1_.out_features()), p.v_reset);
    Matrix v2 = Matrix::Constant(n, static_cast<Eigen::Index>(l2_.out_features()), p.v_reset);
    Matrix sum = Matrix::Zero(n, static_cast<Eigen::Index>(l2_.out_features()));
    if (train) {
        in_.assign(T, Matrix());
        h1_.assign(T, Matrix());
        s1_.assign(T, Matrix());
        h2_.assign(T, Matrix());
        s2_.assign(T, Matrix());
    }
    for (std::size_t t = 0; t < T; ++t) {
        Matrix x = Eigen::Map<const Matrix>(frames.data.data() + t * static_cast<std::size_t>(n * f), n, f);
        Matrix h1, h2;
        // Binary frames and spikes are their own unit-scale codes for executors.
        Matrix s1 = lif_matrix(l1_.apply(x, l1_.executor ? &x : nullptr, 1.0), v1, h1, p);
        Matrix s2 = lif_matrix(l2_.apply(s1, l2_.executor ? &s1 : nullptr, 1.0), v2, h2, p);
        sum += s2;
        if (train) {
            in_[t] = std::move(x);
            h1_[t] = std::move(h1);
            s1_[t] = std::move(s1);
            h2_[t] = std::move(h2);
            s2_[t] = std::move(s2);
        }
    }
    return sum / static_cast<double>(T);
}

Matrix SpikingMlp::forward(const Batch& frames, bool train) { return rates(frames, train) * spec_.logit_scale; }

void SpikingMlp::backward(const Matrix& grad_scores) {
    const std::size_t T = s2_.size();
    if (T == 0) throw InputError("backward called without a training forward pass");
    const auto& p = spec_.lif;
    const SurrogateConfig sg{SurrogateKind::arctan, spec_.surrogate_width};
    const Matrix g_s2 = grad_scores * (spec_.logit_scale / static_cast<double>(T));
    Matrix dv1 = Matrix::Zero(s1_[0].rows(), s1_[0].cols());
    Matrix dv2 = Matrix::Zero(s2_[0].rows(), s2_[0].cols());

    auto lif_back = [&](const Matrix& ds, Matrix& dv, const Matrix& h, const Matrix& s) {
        const Eigen::ArrayXXd u = h.array() - p.v_th;
        const Eigen::ArrayXXd sgd = u.unaryExpr([&](double x) { return surrogate_grad(x, sg); });
        // dH collects the spike path and the reset path of V = H (1 - S) + V_reset S.
        Eigen::ArrayXXd dh = ds.array() * sgd + dv.array() * ((1.0 - s.array()) + (p.v_reset - h.array()) * sgd);
        dv = ((1.0 - p.beta) * dh).matrix();
        return Matrix((p.beta * dh).matrix());
    };

    for (std::size_t t = T; t-- > 0;) {
        const Matrix dx2 = lif_back(g_s2, dv2, h2_[t], s2_[t]);
        l2_.grad_weight.noalias() += dx2.transpose() * s1_[t];
        l2_.grad_bias += dx2.colwise().sum().transpose();
        const Matrix ds1 = dx2 * l2_.weight;
        const Matrix dx1 = lif_back(ds1, dv1, h1_[t], s1_[t]);
        l1_.grad_weight.noalias() += dx1.transpose() * in_[t];
        l1_.grad_bias += dx1.colwise().sum().transpose();
    }
}

std::unique_ptr<Network> make_spiking_mlp(const ArchSpec& spec, std::uint64_t seed) {
    if (spec.widths.size() != 1) throw ConfigError("snn2 needs one hidden width");
    if (spec.features == 0) throw ConfigError("snn2 needs a feature count");
    if (!(spec.lif.beta > 0.0 && spec.lif.beta <= 1.0)) throw ConfigError("LIF beta must be in (0, 1]");
    if (!(spec.surrogate_width > 0.0)) throw ConfigError("surrogate width must be positive");
    auto net = std::make_unique<SpikingMlp>(spec, spec.features, spec.widths[0], spec.classes);
    std::mt19937_64 rng(seed);
    for (auto* l : net->layers()) {
        // Larger than He scale so that the first layer fires from the start.
        std::normal_distribution<double> dist(0.0, 2.0 * std::sqrt(2.0 / static_cast<double>(l->in_features())));
        for (auto& w : l->weights()) w = dist(rng);
        l->bias.setZero();
    }
    return net;
}

Matrix run_spiking_network(const Batch& frames, const SpikingMlp& network, bool quantized_weights) {
    SpikingMlp copy(network);
    if (quantized_weights) {
        for (auto* l : copy.layers()) {
            if (!l->quant) continue;
            const auto levels = build_levels(l->quant->params);
            const auto q = quantize(l->weights(), levels);
            std::copy(q.values.begin(), q.values.end(), l->weights().begin());
        }
    }
    return copy.rates(frames, false);
}

}  // namespace rqat
