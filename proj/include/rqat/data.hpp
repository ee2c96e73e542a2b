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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rqat/nn.hpp"

namespace rqat {

enum class Split { train, eval };

/// Dataset selection. `id` is one of:
///   synthetic-images   procedurally generated 10-class 32x32 RGB images
///   synthetic-events   Poisson rate-coded event frames
///   cifar10            CIFAR-10 binary batches under $RQAT_DATA_ROOT (or data_dir)
///   dir:<path>         CIFAR-10 binary layout in <path>
struct DatasetSpec {
    std::string id = "synthetic-images";
    std::size_t train_size = 8000;
    std::size_t eval_size = 2000;
    std::uint64_t seed = 1;
    std::string data_dir;
    // synthetic-images difficulty
    double noise = 0.6;
    double mix = 0.45;
    // synthetic-events geometry
    std::size_t features = 64;
    std::size_t timesteps = 10;
};

class Dataset {
public:
    virtual ~Dataset() = default;
    virtual std::size_t size() const = 0;
    virtual std::size_t classes() const = 0;
    virtual int label(std::size_t i) const = 0;
    /// Assembles samples `indices`. `augment` enables the training-time
    /// transforms, drawn deterministically from `key` and the sample index.
    virtual Batch make_batch(std::span<const std::size_t> indices, bool augment, std::uint64_t key) const = 0;
};

/// 8-bit HWC image store with pad-4 / random-crop / horizontal-flip augmentation.
class ImageDataset final : public Dataset {
public:
    ImageDataset(std::size_t height, std::size_t width, std::size_t channels, std::vector<std::uint8_t> pixels,
                 std::vector<int> labels, std::size_t classes);

    std::size_t size() const override { return labels_.size(); }
    std::size_t classes() const override { return classes_; }
    int label(std::size_t i) const override { return labels_[i]; }
    Batch make_batch(std::span<const std::size_t> indices, bool augment, std::uint64_t key) const override;

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t channels() const noexcept { return c_; }

private:
    std::size_t h_, w_, c_;
    std::vector<std::uint8_t> pixels_;
    std::vector<int> labels_;
    std::size_t classes_;
};

/// Per-sample firing rates; frames are Bernoulli draws keyed on
/// (seed, sample, step, feature) so every epoch sees the same spikes.
class EventDataset final : public Dataset {
public:
    EventDataset(std::size_t features, std::size_t timesteps, std::vector<double> rates, std::vector<int> labels,
                 std::size_t classes, std::uint64_t seed);

    std::size_t size() const override { return labels_.size(); }
    std::size_t classes() const override { return classes_; }
    int label(std::size_t i) const override { return labels_[i]; }
    Batch make_batch(std::span<const std::size_t> indices, bool augment, std::uint64_t key) const override;

    std::size_t features() const noexcept { return features_; }
    std::size_t timesteps() const noexcept { return timesteps_; }

private:
    std::size_t features_, timesteps_;
    std::vector<double> rates_;
    std::vector<int> labels_;
    std::size_t classes_;
    std::uint64_t seed_;
};

/// Throws IngestError (with the offending path) when data is missing.
std::unique_ptr<Dataset> load_dataset(const DatasetSpec& spec, Split split);

}  // namespace rqat
