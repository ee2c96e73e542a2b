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
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rqat/data.hpp"
#include "rqat/nn.hpp"
#include "rqat/regularizers.hpp"

namespace rqat {

enum class RunMode { fp, qat, fault_finetune, variability_finetune };

std::string_view to_string(RunMode mode);
RunMode run_mode_from_string(std::string_view name);

/// Constant lambda_init, then a geometric ramp over the last `ramp_epochs`
/// epochs ending exactly at lambda_final.
struct LambdaSchedule {
    double lambda_init = 100.0;
    double lambda_final = 2000.0;
    int total_epochs = 200;
    int ramp_epochs = 20;

    void validate() const;
};

double lambda_at(const LambdaSchedule& schedule, int epoch);

struct RegistrationOptions {
    int bits = 4;
    int act_bits = 4;
    QuantMode mode = QuantMode::non_uniform;
    AlphaMode alpha_mode = AlphaMode::lsq_count;
    bool quantize_endpoints = false;
    bool quantize_activations = true;
};

struct LayerRegistry {
    std::vector<std::size_t> quantized;  // indices into Network::layers()
    std::vector<LayerScale> scales;
    bool all_exempt = false;  // fewer than three layers and endpoints exempt
};

/// Attaches weight (and input activation) quantizers to every matmul layer
/// except the first and last, initialized from the current weights.
LayerRegistry register_layers(Network& net, const RegistrationOptions& options);

struct RunPlan {
    RunMode mode = RunMode::qat;
    int epochs = 20;
    int snap_period = 4;  // 0 disables periodic snapping
    double lr_weights = 0.01;
    double lr_quant = 1e-6;
    double lr_act = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    LambdaSchedule lambda;
    std::size_t batch_size = 64;
    std::size_t eval_batch_size = 250;
    std::uint64_t seed = 0;
    bool fault_aware_loss = true;
    bool train_act_scales = true;
    double delta_factor = 10.0;
    bool augment = true;
    int eval_every = 1;  // 0: only the final evaluation

    void validate() const;
};

// Schedule actually used by run(): total_epochs follows the plan and fine-tune
// modes ramp over the final half of their epochs.
LambdaSchedule effective_schedule(const RunPlan& plan);

struct EpochRecord {
    int epoch = 0;
    double lambda = 0.0;
    double lr = 0.0;
    double task_loss = 0.0;
    double reg_loss = 0.0;
    double train_accuracy = 0.0;
    double mean_distance = 0.0;
    double eval_accuracy = -1.0;  // -1 when not evaluated
    bool snapped = false;
};

struct RunResult {
    std::vector<EpochRecord> log;
    double final_accuracy = 0.0;
};

/// Called after every epoch with the live network (e.g. to write a
/// resumable checkpoint).
using EpochHook = std::function<void(const EpochRecord&, const Network&)>;

/// The epoch loop. Full-precision weights feed the forward pass, the
/// mode's regularizer is added to the task loss, weights and quantizer
/// parameters take SGD-momentum steps under a cosine schedule, fault mode
/// snaps fault-affected weights at epochs 0, P, 2P, ..., and on completion
/// every quantized layer is mapped onto its (valid / perturbed) levels.
RunResult run(const RunPlan& plan, Network& net, const Dataset& train, const Dataset& eval,
              const EpochHook& hook = {}, int start_epoch = 0);

/// Adds the mode's regularizer gradients to the layers; returns its value.
double apply_regularizers(Network& net, RunMode mode, bool fault_aware_loss, double lambda, double delta_factor);

/// Snaps fault-affected weights of every layer with a fault map.
std::size_t snap_faulty_weights(Network& net);

/// Maps each quantized layer's weights onto their nearest level (valid under
/// its faults, or perturbed by its variability map) and stores the codes.
void map_to_levels(Network& net);

/// Copy whose quantized layers hold the values the hardware realizes from
/// the stored codes after faults and variability.
std::unique_ptr<Network> deployed(const Network& net);

double evaluate(Network& net, const Dataset& data, std::size_t batch_size = 250);

/// Accuracy of the deployed network (quantized layers realized from codes).
double evaluate_deployed(const Network& net, const Dataset& data, std::size_t batch_size = 250);

/// Mean |w - nearest reachable level| over all quantized weights.
double mean_level_distance(const Network& net, RunMode mode);

}  // namespace rqat
