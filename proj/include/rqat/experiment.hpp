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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rqat/checkpoint.hpp"
#include "rqat/config.hpp"

namespace rqat {

inline constexpr int kMetricsSchema = 1;
inline constexpr int kManifestSchema = 1;

/// Files inside a run directory.
struct RunFiles {
    static constexpr const char* manifest = "manifest.json";
    static constexpr const char* checkpoint = "checkpoint.bin";
    static constexpr const char* partial = "checkpoint.partial.bin";
    static constexpr const char* metrics = "metrics.jsonl";
    static constexpr const char* config = "config.json";
};

/// One metrics.jsonl line.
std::string metric_record(const EpochRecord& record, Phase phase, RunMode mode);

using ProgressFn = std::function<void(const std::string& metric_line)>;

struct RunSummary {
    double final_accuracy = 0.0;
    int epochs = 0;
    std::string run_dir;
};

/// Executes `config.mode` into `config.output_dir`:
///   fp                    full-precision training from scratch
///   qat                   optional pretraining (or `init_checkpoint`), then QAT
///   fault_finetune        loads `init_checkpoint`, samples faults, fine-tunes
///   variability_finetune  loads `init_checkpoint`, samples variability, fine-tunes
/// A checkpoint.partial.bin is written after every epoch; `resume` continues
/// from it and reproduces the uninterrupted run exactly.
RunSummary execute(const ExperimentConfig& config, bool resume = false, const ProgressFn& progress = {});

struct Injection {
    std::optional<double> fault_rate;
    std::uint64_t fault_seed = 0;
    std::optional<double> sigma_over_mu;
    std::uint64_t variability_seed = 0;
};

/// Attaches freshly sampled maps to every quantized layer. Layer k draws
/// from key(seed, k). Stored codes are kept, so a later evaluation applies
/// the non-idealities without any mitigation. Requires stored codes.
void inject(Network& net, const Injection& injection);

struct EvalReport {
    double accuracy = 0.0;
    RunMode mode = RunMode::qat;
    int bits = 0;  // 0 when nothing is quantized
    double fault_rate = 0.0;
    double sigma_over_mu = 0.0;
    std::string to_json() const;
};

/// Evaluates a checkpoint on the eval split of its own dataset config,
/// after `overrides` (key=value) are applied to that config. Quantized
/// checkpoints are evaluated as deployed (codes, faults, variability).
EvalReport evaluate_checkpoint(const Checkpoint& checkpoint, const std::vector<std::string>& overrides = {});

struct SimulationOptions {
    ArrayModel model = ArrayModel::digital;
    int accumulator_bits = 0;
    Injection injection;
};

struct SimulationReport {
    double accuracy = 0.0;
    double reference_accuracy = 0.0;  // deployed evaluation without crossbars
    double max_logit_difference = 0.0;
    std::size_t crossbar_layers = 0;
    EvalReport setup;
    std::string to_json() const;
};

/// Runs every quantized layer through bit-sliced crossbars.
SimulationReport simulate_inference(const Checkpoint& checkpoint, const SimulationOptions& options,
                                    const std::vector<std::string>& overrides = {});

/// Writes manifest.json for a one-shot command (eval, inject, simulate).
void write_manifest(const std::string& dir, const std::string& command, const std::string& series,
                    const EvalReport& report, const std::string& config_json);

struct CurvePoint {
    double x = 0.0;
    double accuracy = 0.0;
    int runs = 0;
};

struct Curve {
    std::string series;
    int bits = 0;
    std::vector<CurvePoint> points;  // ascending x
};

struct SweepReport {
    std::vector<Curve> fault_curves;        // x = bit-fault rate
    std::vector<Curve> variability_curves;  // x = sigma/mu
    std::size_t manifests = 0;
};

/// Collects every manifest.json below `sweep_dir`.
SweepReport collect_sweep(const std::string& sweep_dir);

/// Writes fault_curves.csv, variability_curves.csv and the matching PNGs.
SweepReport write_report(const std::string& sweep_dir, const std::string& out_dir);

}  // namespace rqat
