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

#include "rqat/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "rqat/errors.hpp"
#include "rqat/keyed_random.hpp"

namespace rqat {

namespace {

constexpr double kPixelMean = 0.5;
constexpr double kPixelStd = 0.25;
constexpr std::size_t kPad = 4;

constexpr std::uint64_t kProtoStream = 0x9707ULL;
constexpr std::uint64_t kSampleStream = 0x5a3b1eULL;
constexpr std::uint64_t kAugmentStream = 0xa06ULL;
constexpr std::uint64_t kSpikeStream = 0x591cULL;

std::uint64_t split_id(Split s) { return s == Split::train ? 1 : 2; }

// Smooth class prototypes: two oriented gratings and two colour blobs.
std::vector<double> make_prototype(std::mt19937_64& rng, std::size_t H, std::size_t W, std::size_t C) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> img(H * W * C, 0.0);
    for (int g = 0; g < 2; ++g) {
        const double theta = u(rng) * std::numbers::pi;
        const double freq = (1.5 + 2.5 * u(rng)) * 2.0 * std::numbers::pi / static_cast<double>(W);
        const double phase = u(rng) * 2.0 * std::numbers::pi;
        std::array<double, 3> amp{};
        for (auto& a : amp) a = 2.0 * u(rng) - 1.0;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const double t = std::sin(freq * (std::cos(theta) * x + std::sin(theta) * y) + phase);
                for (std::size_t c = 0; c < C; ++c) img[(y * W + x) * C + c] += 0.5 * amp[c % 3] * t;
            }
    }
    for (int b = 0; b < 2; ++b) {
        const double cx = 6.0 + u(rng) * (static_cast<double>(W) - 12.0);
        const double cy = 6.0 + u(rng) * (static_cast<double>(H) - 12.0);
        const double sigma = 3.0 + 4.0 * u(rng);
        std::array<double, 3> col{};
        for (auto& a : col) a = 2.0 * u(rng) - 1.0;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const double e = std::exp(-d2 / (2.0 * sigma * sigma));
                for (std::size_t c = 0; c < C; ++c) img[(y * W + x) * C + c] += col[c % 3] * e;
            }
    }
    return img;
}

std::unique_ptr<Dataset> synthetic_images(const DatasetSpec& spec, Split split) {
    constexpr std::size_t H = 32, W = 32, C = 3, K = 10, P = 3;
    std::mt19937_64 proto_rng(keyed::key(spec.seed, kProtoStream));
    std::vector<std::vector<double>> protos;
    for (std::size_t i = 0; i < K * P; ++i) protos.push_back(make_prototype(proto_rng, H, W, C));

    const std::size_t n = split == Split::train ? spec.train_size : spec.eval_size;
    std::vector<std::uint8_t> pixels(n * H * W * C);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(keyed::key(spec.seed, kSampleStream, split_id(split), i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, spec.noise);
        const std::size_t k = i % K;
        const auto& base = protos[k * P + rng() % P];
        const std::size_t other_k = (k + 1 + rng() % (K - 1)) % K;
        const auto& other = protos[other_k * P + rng() % P];
        const double mix = spec.mix * u(rng);
        const double contrast = 0.6 + 0.8 * u(rng);
        const long dx = static_cast<long>(rng() % 7) - 3;
        const long dy = static_cast<long>(rng() % 7) - 3;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                const std::size_t sy = static_cast<std::size_t>((static_cast<long>(y) + dy + H) % H);
                const std::size_t sx = static_cast<std::size_t>((static_cast<long>(x) + dx + W) % W);
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t src = (sy * W + sx) * C + c;
                    const double v = contrast * ((1.0 - mix) * base[src] + mix * other[src]) + noise(rng);
                    pixels[((i * H + y) * W + x) * C + c] =
                        static_cast<std::uint8_t>(std::clamp(std::lround(128.0 + 50.0 * v), 0L, 255L));
                }
            }
        labels[i] = static_cast<int>(k);
    }
    return std::make_unique<ImageDataset>(H, W, C, std::move(pixels), std::move(labels), K);
}

std::unique_ptr<Dataset> synthetic_events(const DatasetSpec& spec, Split split) {
    constexpr std::size_t K = 10;
    const std::size_t F = spec.features;
    if (F < 8) throw ConfigError("synthetic-events needs at least 8 features");
    if (spec.timesteps < 1) throw ConfigError("synthetic-events needs at least one timestep");
    std::mt19937_64 proto_rng(keyed::key(spec.seed, kProtoStream));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> protos(K, std::vector<double>(F));
    for (auto& p : protos) {
        for (auto& r : p) r = 0.02 + 0.2 * u(proto_rng);
        for (std::size_t h = 0; h < F / 8; ++h) p[proto_rng() % F] = 0.4 + 0.4 * u(proto_rng);
    }
    const std::size_t n = split == Split::train ? spec.train_size : spec.eval_size;
    std::vector<double> rates(n * F);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(keyed::key(spec.seed, kSampleStream, split_id(split), i));
        std::uniform_real_distribution<double> ur(0.0, 1.0);
        // rate jitter is a quarter of the image noise level
        std::normal_distribution<double> jitter(0.0, 0.25 * spec.noise);
        const std::size_t k = i % K;
        const double gain = 0.7 + 0.6 * ur(rng);
        const auto& other = protos[(k + 1 + rng() % (K - 1)) % K];
        const double mix = spec.mix * ur(rng);
        for (std::size_t f = 0; f < F; ++f)
            rates[i * F + f] = std::clamp(gain * ((1.0 - mix) * protos[k][f] + mix * other[f]) + jitter(rng), 0.0, 1.0);
        labels[i] = static_cast<int>(k);
    }
    return std::make_unique<EventDataset>(F, spec.timesteps, std::move(rates), std::move(labels), K,
                                          keyed::key(spec.seed, kSpikeStream, split_id(split)));
}

std::unique_ptr<Dataset> cifar_binary(const std::filesystem::path& dir, const DatasetSpec& spec, Split split) {
    std::vector<std::filesystem::path> files;
    if (split == Split::train)
        for (int b = 1; b <= 5; ++b) files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
    else
        files.push_back(dir / "test_batch.bin");
    const std::size_t want = split == Split::train ? spec.train_size : spec.eval_size;
    constexpr std::size_t H = 32, W = 32, C = 3, rec = 1 + H * W * C;
    std::vector<std::uint8_t> pixels;
    std::vector<int> labels;
    std::vector<char> buf(rec);
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw IngestError("cannot open CIFAR-10 batch " + f.string());
        while (labels.size() < want && in.read(buf.data(), static_cast<std::streamsize>(rec))) {
            const auto label = static_cast<int>(static_cast<unsigned char>(buf[0]));
            if (label > 9) throw IngestError("bad label in " + f.string());
            labels.push_back(label);
            const std::size_t base = pixels.size();
            pixels.resize(base + H * W * C);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t p = 0; p < H * W; ++p)
                    pixels[base + p * C + c] = static_cast<std::uint8_t>(buf[1 + c * H * W + p]);
        }
        if (labels.size() >= want) break;
    }
    if (labels.empty()) throw IngestError("no samples read from " + dir.string());
    return std::make_unique<ImageDataset>(H, W, C, std::move(pixels), std::move(labels), 10);
}

}  // namespace

ImageDataset::ImageDataset(std::size_t height, std::size_t width, std::size_t channels,
                           std::vector<std::uint8_t> pixels, std::vector<int> labels, std::size_t classes)
    : h_(height), w_(width), c_(channels), pixels_(std::move(pixels)), labels_(std::move(labels)), classes_(classes) {
    if (pixels_.size() != labels_.size() * h_ * w_ * c_) throw ShapeError("image store size mismatch");
}

Batch ImageDataset::make_batch(std::span<const std::size_t> indices, bool augment, std::uint64_t key) const {
    Batch b;
    const std::size_t n = indices.size();
    b.shape = {n, h_, w_, c_};
    b.data.resize(n * h_ * w_ * c_);
    b.labels.resize(n);
    const double zero = (0.0 - kPixelMean) / kPixelStd;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = indices[s];
        if (idx >= size()) throw InputError("sample index out of range");
        b.labels[s] = labels_[idx];
        const std::uint8_t* img = pixels_.data() + idx * h_ * w_ * c_;
        double* out = b.data.data() + s * h_ * w_ * c_;
        long ox = 0, oy = 0;
        bool flip = false;
        if (augment) {
            const std::uint64_t k = keyed::key(key, kAugmentStream, idx);
            ox = static_cast<long>(keyed::mix(k) % (2 * kPad + 1)) - static_cast<long>(kPad);
            oy = static_cast<long>(keyed::mix(k + 1) % (2 * kPad + 1)) - static_cast<long>(kPad);
            flip = keyed::uniform01(k + 2) < 0.5;
        }
        for (std::size_t y = 0; y < h_; ++y)
            for (std::size_t x = 0; x < w_; ++x) {
                const long sx0 = flip ? static_cast<long>(w_ - 1 - x) : static_cast<long>(x);
                const long sy = static_cast<long>(y) + oy;
                const long sx = sx0 + ox;
                double* dst = out + (y * w_ + x) * c_;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h_) || sx >= static_cast<long>(w_)) {
                    std::fill(dst, dst + c_, zero);
                    continue;
                }
                const std::uint8_t* src = img + (static_cast<std::size_t>(sy) * w_ + static_cast<std::size_t>(sx)) * c_;
                for (std::size_t c = 0; c < c_; ++c) dst[c] = (src[c] / 255.0 - kPixelMean) / kPixelStd;
            }
    }
    return b;
}

EventDataset::EventDataset(std::size_t features, std::size_t timesteps, std::vector<double> rates,
                           std::vector<int> labels, std::size_t classes, std::uint64_t seed)
    : features_(features),
      timesteps_(timesteps),
      rates_(std::move(rates)),
      labels_(std::move(labels)),
      classes_(classes),
      seed_(seed) {
    if (rates_.size() != labels_.size() * features_) throw ShapeError("event store size mismatch");
}

Batch EventDataset::make_batch(std::span<const std::size_t> indices, bool, std::uint64_t) const {
    Batch b;
    const std::size_t n = indices.size();
    b.shape = {timesteps_, n, features_};
    b.data.assign(timesteps_ * n * features_, 0.0);
    b.labels.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = indices[s];
        if (idx >= size()) throw InputError("sample index out of range");
        b.labels[s] = labels_[idx];
        for (std::size_t t = 0; t < timesteps_; ++t)
            for (std::size_t f = 0; f < features_; ++f) {
                const double p = rates_[idx * features_ + f];
                const bool spike = keyed::uniform01(keyed::key(seed_, idx, t, f)) < p;
                b.data[(t * n + s) * features_ + f] = spike ? 1.0 : 0.0;
            }
    }
    return b;
}

std::unique_ptr<Dataset> load_dataset(const DatasetSpec& spec, Split split) {
    if (spec.id == "synthetic-images") return synthetic_images(spec, split);
    if (spec.id == "synthetic-events") return synthetic_events(spec, split);
    if (spec.id == "cifar10") {
        std::filesystem::path root = spec.data_dir;
        if (root.empty()) {
            const char* env = std::getenv("RQAT_DATA_ROOT");
            if (!env) throw IngestError("cifar10 needs data_dir or $RQAT_DATA_ROOT");
            root = env;
        }
        if (std::filesystem::exists(root / "cifar-10-batches-bin")) root /= "cifar-10-batches-bin";
        return cifar_binary(root, spec, split);
    }
    if (spec.id.rfind("dir:", 0) == 0) {
        const std::filesystem::path dir = spec.id.substr(4);
        if (!std::filesystem::is_directory(dir)) throw IngestError("data directory not found: " + dir.string());
        return cifar_binary(dir, spec, split);
    }
    throw ConfigError("unknown dataset '" + spec.id + "'");
}

}  // namespace rqat
