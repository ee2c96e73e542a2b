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
#include <string>
#include <string_view>
#include <vector>

#include "rqat/crossbar.hpp"
#include "rqat/data.hpp"
#include "rqat/nn.hpp"
#include "rqat/trainkit.hpp"

namespace rqat {

/// Everything one run needs. Serialized as a flat JSON object whose keys are
/// the field names below; unknown keys are rejected.
struct ExperimentConfig {
    RunMode mode = RunMode::qat;
    ArchKind arch = ArchKind::cnn4;
    std::vector<std::size_t> widths = {8, 16, 64};
    DatasetSpec data;

    // quantization
    int bits = 4;
    QuantMode quant_mode = QuantMode::non_uniform;
    int act_bits = 4;
    bool quantize_endpoints = false;
    bool quantize_activations = true;
    AlphaMode alpha_mode = AlphaMode::lsq_count;
    double delta_factor = 10.0;

    // schedule and optimizer
    double lambda_init = 100.0;
    double lambda_final = 2000.0;
    int ramp_epochs = 20;
    int epochs = 20;
    int pretrain_epochs = 0;  // full-precision epochs before qat
    double pretrain_lr = 0.02;
    int snap_period = 4;
    bool fault_aware_loss = true;
    bool train_act_scales = true;
    double lr_weights = 0.01;
    double lr_quant = 1e-6;
    double lr_act = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch_size = 64;
    std::size_t eval_batch_size = 250;
    bool augment = true;
    int eval_every = 1;
    std::uint64_t seed = 0;

    // hardware non-idealities
    double fault_rate = 0.0;
    std::uint64_t fault_seed = 0;
    double sigma_over_mu = 0.0;
    std::uint64_t variability_seed = 0;
    ArrayModel array_model = ArrayModel::digital;
    int accumulator_bits = 0;

    // spiking network
    double snn_beta = 0.25;
    double snn_v_th = 1.0;
    double snn_v_reset = 0.0;
    double surrogate_width = 2.0;
    double logit_scale = 10.0;

    std::string init_checkpoint;
    std::string output_dir = "runs/default";

    /// Throws ParameterError / ConfigError naming the offending key.
    void validate() const;
};

std::string_view to_string(ArrayModel model);
ArrayModel array_model_from_string(std::string_view name);

std::string config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults. Does not validate.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Applies one `key=value` override; the value is parsed as JSON when
/// possible and as a plain string otherwise.
void apply_override(ExperimentConfig& config, std::string_view assignment);

ArchSpec arch_spec(const ExperimentConfig& config);
RunPlan run_plan(const ExperimentConfig& config, RunMode mode);
RegistrationOptions registration_options(const ExperimentConfig& config);

}  // namespace rqat
