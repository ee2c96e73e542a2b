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

#include "rqat/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rqat/errors.hpp"
#include "rqat/snn.hpp"

namespace rqat {

MatmulLayer::MatmulLayer(std::string layer_name, std::size_t out, std::size_t in)
    : name(std::move(layer_name)),
      weight(Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
      bias(Vector::Zero(static_cast<Eigen::Index>(out))),
      grad_weight(Matrix::Zero(weight.rows(), weight.cols())),
      grad_bias(Vector::Zero(bias.size())),
      mom_weight(Matrix::Zero(weight.rows(), weight.cols())),
      mom_bias(Vector::Zero(bias.size())) {}

void MatmulLayer::zero_grad() {
    grad_weight.setZero();
    grad_bias.setZero();
    if (quant) {
        std::fill(quant->grad_multipliers.begin(), quant->grad_multipliers.end(), 0.0);
        quant->grad_offset = 0.0;
    }
    if (act) act->grad_scale = 0.0;
}

double MatmulLayer::quantize_input(Matrix& x, Matrix& codes) {
    if (!act) return 0.0;
    auto& q = act->quantizer;
    if (!act->calibrated) {
        q.scale = init_act_scale({x.data(), static_cast<std::size_t>(x.size())}, q.bits);
        act->calibrated = true;
    }
    codes.resize(x.rows(), x.cols());
    const double* src = x.data();
    double* dst = codes.data();
    for (Eigen::Index i = 0; i < x.size(); ++i) dst[i] = act_code(src[i], q);
    x = codes * q.scale;
    return q.scale;
}

Matrix MatmulLayer::apply(const Matrix& x, const Matrix* codes, double act_scale) const {
    Matrix y;
    if (executor && codes)
        y = executor(*codes, act_scale);
    else
        y.noalias() = x * weight.transpose();
    y.rowwise() += bias.transpose();
    return y;
}

void MatmulLayer::input_backward(const Matrix& pre_quant, Matrix& grad, std::size_t per_sample) {
    if (!act) return;
    const auto& q = act->quantizer;
    double gs = 0.0;
    const double* v = pre_quant.data();
    double* g = grad.data();
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        gs += g[i] * act_scale_grad(v[i], q);
        g[i] *= act_input_grad(v[i], q);
    }
    act->grad_scale += gs / std::sqrt(static_cast<double>(per_sample) * q.q_p);
}

std::vector<const MatmulLayer*> Network::layers() const {
    auto mut = const_cast<Network*>(this)->layers();
    return {mut.begin(), mut.end()};
}

void Network::zero_grad() {
    for (auto* l : layers()) l->zero_grad();
}

std::string to_string(ArchKind kind) {
    switch (kind) {
        case ArchKind::cnn4: return "cnn4";
        case ArchKind::mlp5: return "mlp5";
        case ArchKind::snn2: return "snn2";
    }
    return "cnn4";
}

ArchKind arch_from_string(const std::string& name) {
    if (name == "cnn4") return ArchKind::cnn4;
    if (name == "mlp5") return ArchKind::mlp5;
    if (name == "snn2") return ArchKind::snn2;
    throw ConfigError("unknown architecture '" + name + "'");
}

namespace {

// Activations between ops are N x (H*W*C) in NHWC order.
struct Geometry {
    std::size_t h = 1, w = 1, c = 1;
    std::size_t size() const { return h * w * c; }
};

class Op {
public:
    virtual ~Op() = default;
    virtual std::unique_ptr<Op> clone() const = 0;
    virtual Matrix forward(const Matrix& x, bool train) = 0;
    virtual Matrix backward(const Matrix& grad) = 0;
    virtual MatmulLayer* matmul() { return nullptr; }
};

class Linear final : public Op {
public:
    Linear(std::string name, std::size_t in, std::size_t out) : layer_(std::move(name), out, in) {}
    std::unique_ptr<Op> clone() const override {
        auto c = std::make_unique<Linear>(*this);
        c->input_ = Matrix();
        c->pre_quant_ = Matrix();
        return c;
    }
    Matrix forward(const Matrix& x, bool train) override {
        Matrix in = x;
        Matrix codes;
        const double s = layer_.quantize_input(in, codes);
        if (train) {
            if (layer_.act) pre_quant_ = x;
            input_ = in;
        }
        return layer_.apply(in, layer_.act ? &codes : nullptr, s);
    }
    Matrix backward(const Matrix& grad) override {
        layer_.grad_weight.noalias() += grad.transpose() * input_;
        layer_.grad_bias += grad.colwise().sum().transpose();
        Matrix gx = grad * layer_.weight;
        layer_.input_backward(pre_quant_, gx, static_cast<std::size_t>(gx.cols()));
        return gx;
    }
    MatmulLayer* matmul() override { return &layer_; }

private:
    MatmulLayer layer_;
    Matrix input_;
    Matrix pre_quant_;
};

class Conv3x3 final : public Op {
public:
    Conv3x3(std::string name, Geometry in, std::size_t out_channels, std::size_t stride, bool input_grad)
        : geo_(in),
          out_c_(out_channels),
          stride_(stride),
          oh_(in.h / stride),
          ow_(in.w / stride),
          input_grad_(input_grad),
          layer_(std::move(name), out_channels, 9 * in.c) {}
    std::unique_ptr<Op> clone() const override {
        auto c = std::make_unique<Conv3x3>(*this);
        c->patches_ = Matrix();
        c->pre_quant_ = Matrix();
        return c;
    }

    Matrix forward(const Matrix& x, bool train) override {
        const auto n = static_cast<std::size_t>(x.rows());
        Matrix in = x;
        Matrix codes;
        const double s = layer_.quantize_input(in, codes);
        Matrix patches = im2col(in, n);
        Matrix y;
        if (layer_.act && layer_.executor) {
            Matrix code_patches = im2col(codes, n);
            y = layer_.apply(patches, &code_patches, s);
        } else {
            y = layer_.apply(patches, nullptr, s);
        }
        if (train) {
            if (layer_.act) pre_quant_ = x;
            patches_ = std::move(patches);
        }
        return Eigen::Map<const Matrix>(y.data(), static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(oh_ * ow_ * out_c_));
    }

    Matrix backward(const Matrix& grad) override {
        const auto n = static_cast<std::size_t>(grad.rows());
        const Matrix g = Eigen::Map<const Matrix>(grad.data(), static_cast<Eigen::Index>(n * oh_ * ow_),
                                                  static_cast<Eigen::Index>(out_c_));
        layer_.grad_weight.noalias() += g.transpose() * patches_;
        layer_.grad_bias += g.colwise().sum().transpose();
        if (!input_grad_) return Matrix();
        Matrix gp = g * layer_.weight;
        Matrix gx = col2im(gp, n);
        layer_.input_backward(pre_quant_, gx, geo_.size());
        return gx;
    }
    MatmulLayer* matmul() override { return &layer_; }

private:
    // Patch column order is (ky, kx, c), matching the weight layout.
    Matrix im2col(const Matrix& x, std::size_t n) const {
        const std::size_t H = geo_.h, W = geo_.w, C = geo_.c;
        Matrix p = Matrix::Zero(static_cast<Eigen::Index>(n * oh_ * ow_), static_cast<Eigen::Index>(9 * C));
        for (std::size_t b = 0; b < n; ++b) {
            const double* img = x.data() + b * H * W * C;
            for (std::size_t y = 0; y < oh_; ++y)
                for (std::size_t xx = 0; xx < ow_; ++xx) {
                    double* row = p.data() + ((b * oh_ + y) * ow_ + xx) * 9 * C;
                    for (int ky = -1; ky <= 1; ++ky) {
                        const long sy = static_cast<long>(y * stride_) + ky;
                        if (sy < 0 || sy >= static_cast<long>(H)) continue;
                        for (int kx = -1; kx <= 1; ++kx) {
                            const long sx = static_cast<long>(xx * stride_) + kx;
                            if (sx < 0 || sx >= static_cast<long>(W)) continue;
                            const double* src = img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C;
                            double* dst = row + static_cast<std::size_t>((ky + 1) * 3 + (kx + 1)) * C;
                            std::copy(src, src + C, dst);
                        }
                    }
                }
        }
        return p;
    }

    Matrix col2im(const Matrix& p, std::size_t n) const {
        const std::size_t H = geo_.h, W = geo_.w, C = geo_.c;
        Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(H * W * C));
        for (std::size_t b = 0; b < n; ++b) {
            double* img = x.data() + b * H * W * C;
            for (std::size_t y = 0; y < oh_; ++y)
                for (std::size_t xx = 0; xx < ow_; ++xx) {
                    const double* row = p.data() + ((b * oh_ + y) * ow_ + xx) * 9 * C;
                    for (int ky = -1; ky <= 1; ++ky) {
                        const long sy = static_cast<long>(y * stride_) + ky;
                        if (sy < 0 || sy >= static_cast<long>(H)) continue;
                        for (int kx = -1; kx <= 1; ++kx) {
                            const long sx = static_cast<long>(xx * stride_) + kx;
                            if (sx < 0 || sx >= static_cast<long>(W)) continue;
                            double* dst = img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C;
                            const double* src = row + static_cast<std::size_t>((ky + 1) * 3 + (kx + 1)) * C;
                            for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                        }
                    }
                }
        }
        return x;
    }

    Geometry geo_;
    std::size_t out_c_;
    std::size_t stride_;
    std::size_t oh_, ow_;
    bool input_grad_;
    MatmulLayer layer_;
    Matrix patches_;
    Matrix pre_quant_;
};

class Relu final : public Op {
public:
    std::unique_ptr<Op> clone() const override { return std::make_unique<Relu>(); }
    Matrix forward(const Matrix& x, bool train) override {
        Matrix y = x.cwiseMax(0.0);
        if (train) mask_ = (x.array() > 0.0).cast<double>().matrix();
        return y;
    }
    Matrix backward(const Matrix& grad) override { return grad.cwiseProduct(mask_); }

private:
    Matrix mask_;
};

class MaxPool2 final : public Op {
public:
    explicit MaxPool2(Geometry in) : geo_(in) {}
    std::unique_ptr<Op> clone() const override { return std::make_unique<MaxPool2>(geo_); }
    Matrix forward(const Matrix& x, bool train) override {
        const std::size_t n = static_cast<std::size_t>(x.rows());
        const std::size_t H = geo_.h, W = geo_.w, C = geo_.c, Ho = H / 2, Wo = W / 2;
        Matrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(Ho * Wo * C));
        if (train) argmax_.assign(n * Ho * Wo * C, 0);
        for (std::size_t b = 0; b < n; ++b) {
            const double* img = x.data() + b * H * W * C;
            double* out = y.data() + b * Ho * Wo * C;
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox)
                    for (std::size_t c = 0; c < C; ++c) {
                        std::size_t best = ((2 * oy) * W + 2 * ox) * C + c;
                        for (std::size_t dy = 0; dy < 2; ++dy)
                            for (std::size_t dx = 0; dx < 2; ++dx) {
                                const std::size_t idx = ((2 * oy + dy) * W + 2 * ox + dx) * C + c;
                                if (img[idx] > img[best]) best = idx;
                            }
                        const std::size_t o = (oy * Wo + ox) * C + c;
                        out[o] = img[best];
                        if (train) argmax_[b * Ho * Wo * C + o] = b * H * W * C + best;
                    }
        }
        return y;
    }
    Matrix backward(const Matrix& grad) override {
        const std::size_t n = static_cast<std::size_t>(grad.rows());
        Matrix gx = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(geo_.size()));
        for (std::size_t i = 0; i < argmax_.size(); ++i) gx.data()[argmax_[i]] += grad.data()[i];
        return gx;
    }

private:
    Geometry geo_;
    std::vector<std::size_t> argmax_;
};

class Sequential final : public Network {
public:
    explicit Sequential(ArchSpec spec) : spec_(std::move(spec)) {}
    Sequential(const Sequential& other) : Network(), spec_(other.spec_) {
        for (const auto& op : other.ops_) ops_.push_back(op->clone());
    }

    std::unique_ptr<Network> clone() const override { return std::make_unique<Sequential>(*this); }
    const ArchSpec& arch() const override { return spec_; }

    Matrix forward(const Batch& batch, bool train) override {
        const auto n = static_cast<Eigen::Index>(batch.samples());
        if (n == 0) throw InputError("empty batch");
        const auto width = static_cast<Eigen::Index>(batch.data.size()) / n;
        Matrix x = Eigen::Map<const Matrix>(batch.data.data(), n, width);
        for (auto& op : ops_) x = op->forward(x, train);
        return x;
    }

    void backward(const Matrix& grad_scores) override {
        Matrix g = grad_scores;
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) g = (*it)->backward(g);
    }

    std::vector<MatmulLayer*> layers() override {
        std::vector<MatmulLayer*> out;
        for (auto& op : ops_)
            if (auto* m = op->matmul()) out.push_back(m);
        return out;
    }

    void add(std::unique_ptr<Op> op) { ops_.push_back(std::move(op)); }

private:
    ArchSpec spec_;
    std::vector<std::unique_ptr<Op>> ops_;
};

void he_init(MatmulLayer& layer, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layer.in_features())));
    for (auto& w : layer.weights()) w = dist(rng);
    layer.bias.setZero();
}

std::unique_ptr<Network> make_cnn4(const ArchSpec& spec, std::mt19937_64& rng) {
    if (spec.widths.size() != 3) throw ConfigError("cnn4 needs widths [conv1, conv2, hidden]");
    if (spec.height % 4 != 0 || spec.width % 4 != 0) throw ConfigError("cnn4 input sides must be multiples of 4");
    auto net = std::make_unique<Sequential>(spec);
    Geometry g{spec.height, spec.width, spec.channels};
    // conv1 is strided: 32x32 -> 16x16
    net->add(std::make_unique<Conv3x3>("conv1", g, spec.widths[0], 2, false));
    net->add(std::make_unique<Relu>());
    g = {g.h / 2, g.w / 2, spec.widths[0]};
    net->add(std::make_unique<Conv3x3>("conv2", g, spec.widths[1], 1, true));
    net->add(std::make_unique<Relu>());
    g.c = spec.widths[1];
    net->add(std::make_unique<MaxPool2>(g));
    g = {g.h / 2, g.w / 2, g.c};
    net->add(std::make_unique<Linear>("fc1", g.size(), spec.widths[2]));
    net->add(std::make_unique<Relu>());
    net->add(std::make_unique<Linear>("fc2", spec.widths[2], spec.classes));
    for (auto* l : net->layers()) he_init(*l, rng);
    return net;
}

std::unique_ptr<Network> make_mlp5(const ArchSpec& spec, std::mt19937_64& rng) {
    if (spec.widths.size() != 4) throw ConfigError("mlp5 needs 4 hidden widths");
    const std::size_t in = spec.features ? spec.features : spec.height * spec.width * spec.channels;
    auto net = std::make_unique<Sequential>(spec);
    std::size_t prev = in;
    for (std::size_t i = 0; i < 4; ++i) {
        net->add(std::make_unique<Linear>("fc" + std::to_string(i + 1), prev, spec.widths[i]));
        net->add(std::make_unique<Relu>());
        prev = spec.widths[i];
    }
    net->add(std::make_unique<Linear>("fc5", prev, spec.classes));
    for (auto* l : net->layers()) he_init(*l, rng);
    return net;
}

}  // namespace

std::unique_ptr<Network> make_network(const ArchSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    switch (spec.kind) {
        case ArchKind::cnn4: return make_cnn4(spec, rng);
        case ArchKind::mlp5: return make_mlp5(spec, rng);
        case ArchKind::snn2: return make_spiking_mlp(spec, rng());
    }
    throw ConfigError("unknown architecture");
}

double cross_entropy(const Matrix& scores, std::span<const int> labels, Matrix* grad) {
    const auto n = scores.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("score rows and labels differ");
    double loss = 0.0;
    if (grad) grad->resize(n, scores.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = scores.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
        const double z = e.sum();
        const auto y = labels[static_cast<std::size_t>(i)];
        loss += -(scores(i, y) - m - std::log(z));
        if (grad) {
            grad->row(i) = e / z;
            (*grad)(i, y) -= 1.0;
        }
    }
    if (grad) *grad /= static_cast<double>(n);
    return loss / static_cast<double>(n);
}

std::size_t count_correct(const Matrix& scores, std::span<const int> labels) {
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index arg = 0;
        scores.row(i).maxCoeff(&arg);
        correct += static_cast<int>(arg) == labels[static_cast<std::size_t>(i)];
    }
    return correct;
}

}  // namespace rqat
