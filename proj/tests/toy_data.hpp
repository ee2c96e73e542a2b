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


// Small in-memory classification sets for fast training tests.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rqat/data.hpp"
#include "rqat/nn.hpp"

namespace toy {

/// Gaussian blobs: class k is centered on a fixed random direction.
class Blobs final : public rqat::Dataset {
public:
    Blobs(std::size_t n, std::size_t features, std::size_t classes, double noise, std::uint64_t seed,
          std::uint64_t centers_seed = 1)
        : features_(features), classes_(classes) {
        std::mt19937_64 crng(centers_seed), rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> centers(classes * features);
        for (auto& c : centers) c = g(crng);
        x_.resize(n * features);
        y_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            y_[i] = static_cast<int>(i % classes);
            for (std::size_t f = 0; f < features; ++f)
                x_[i * features + f] = centers[static_cast<std::size_t>(y_[i]) * features + f] + noise * g(rng);
        }
    }
    std::size_t size() const override { return y_.size(); }
    std::size_t classes() const override { return classes_; }
    int label(std::size_t i) const override { return y_[i]; }
    rqat::Batch make_batch(std::span<const std::size_t> idx, bool, std::uint64_t) const override {
        rqat::Batch b;
        b.shape = {idx.size(), features_};
        for (auto i : idx) {
            b.data.insert(b.data.end(), x_.begin() + static_cast<std::ptrdiff_t>(i * features_),
                          x_.begin() + static_cast<std::ptrdiff_t>((i + 1) * features_));
            b.labels.push_back(y_[i]);
        }
        return b;
    }

private:
    std::size_t features_, classes_;
    std::vector<double> x_;
    std::vector<int> y_;
};

inline rqat::ArchSpec mlp_spec(std::size_t features, std::size_t classes, std::size_t width = 24) {
    rqat::ArchSpec s;
    s.kind = rqat::ArchKind::mlp5;
    s.features = features;
    s.widths = {width, width, width, width};
    s.classes = classes;
    return s;
}

}  // namespace toy
