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


#include "rqat/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rqat/crossbar.hpp"
#include "rqat/errors.hpp"
#include "rqat/hardware.hpp"
#include "rqat/keyed_random.hpp"

namespace rqat {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

void append_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_quantized(Network& net) {
    for (auto* l : net.layers())
        if (l->quant) return true;
    return false;
}

void attach_maps(Network& net, const Injection& inj) {
    std::uint64_t k = 0;
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        auto& slot = *l->quant;
        const int bits = slot.params.bits;
        if (inj.fault_rate)
            slot.faults = sample_fault_map(l->weight_count(), bits, *inj.fault_rate, keyed::key(inj.fault_seed, k));
        if (inj.sigma_over_mu)
            slot.variability =
                sample_variability_map(l->weight_count(), bits, *inj.sigma_over_mu, keyed::key(inj.variability_seed, k));
        ++k;
    }
}

EvalReport describe(Network& net, RunMode mode) {
    EvalReport r;
    r.mode = mode;
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        if (r.bits == 0) r.bits = l->quant->params.bits;
        if (l->quant->faults) r.fault_rate = l->quant->faults->rate;
        if (l->quant->variability) r.sigma_over_mu = l->quant->variability->sigma_over_mu;
    }
    return r;
}

std::string series_name(const ExperimentConfig& c) {
    if (c.mode == RunMode::fault_finetune && !c.fault_aware_loss) return "mapping_only";
    return std::string(to_string(c.mode));
}

void check_arch(const ArchSpec& have, const ArchSpec& want) {
    if (have.kind != want.kind || have.widths != want.widths || have.features != want.features)
        throw ConfigError("init_checkpoint architecture (" + to_string(have.kind) +
                          ") does not match the configured arch/widths");
}

std::unique_ptr<Network> load_init(const ExperimentConfig& c) {
    if (c.init_checkpoint.empty())
        throw ConfigError("init_checkpoint: " + std::string(to_string(c.mode)) + " needs a trained checkpoint");
    auto ck = load_checkpoint(c.init_checkpoint);
    check_arch(ck.net->arch(), arch_spec(c));
    return std::move(ck.net);
}

// Fresh state for a new run; sets the starting phase.
std::unique_ptr<Network> initial_network(const ExperimentConfig& c, Phase& phase) {
    phase = Phase::main;
    switch (c.mode) {
        case RunMode::fp: return make_network(arch_spec(c), c.seed);
        case RunMode::qat: {
            std::unique_ptr<Network> net;
            if (!c.init_checkpoint.empty()) {
                net = load_init(c);
            } else {
                net = make_network(arch_spec(c), c.seed);
                if (c.pretrain_epochs > 0) {
                    phase = Phase::pretrain;
                    return net;
                }
            }
            if (!has_quantized(*net)) {
                const auto reg = register_layers(*net, registration_options(c));
                if (reg.all_exempt) throw ConfigError("arch: every layer is exempt from quantization");
            }
            return net;
        }
        case RunMode::fault_finetune:
        case RunMode::variability_finetune: {
            auto net = load_init(c);
            if (!has_quantized(*net)) throw ConfigError("init_checkpoint: checkpoint has no quantized layers");
            Injection inj;
            for (auto* l : net->layers())
                if (l->quant) {
                    l->quant->faults.reset();
                    l->quant->variability.reset();
                }
            if (c.mode == RunMode::fault_finetune) {
                inj.fault_rate = c.fault_rate;
                inj.fault_seed = c.fault_seed;
            } else {
                inj.sigma_over_mu = c.sigma_over_mu;
                inj.variability_seed = c.variability_seed;
            }
            attach_maps(*net, inj);
            return net;
        }
    }
    throw ConfigError("unknown mode");
}

json manifest_json(const std::string& command, const std::string& series, const EvalReport& r,
                   const std::string& config_json, int epochs) {
    json m;
    m["schema"] = kManifestSchema;
    m["command"] = command;
    m["series"] = series;
    m["mode"] = std::string(to_string(r.mode));
    m["bits"] = r.bits;
    m["fault_rate"] = r.fault_rate;
    m["sigma_over_mu"] = r.sigma_over_mu;
    m["epochs"] = epochs;
    m["accuracy"] = r.accuracy;
    m["config"] = json::parse(config_json);
    return m;
}

}  // namespace

std::string metric_record(const EpochRecord& r, Phase phase, RunMode mode) {
    json j;
    j["schema"] = kMetricsSchema;
    j["phase"] = std::string(to_string(phase));
    j["mode"] = std::string(to_string(phase == Phase::pretrain ? RunMode::fp : mode));
    j["epoch"] = r.epoch;
    j["lambda"] = r.lambda;
    j["lr"] = r.lr;
    j["task_loss"] = r.task_loss;
    j["reg_loss"] = r.reg_loss;
    j["train_accuracy"] = r.train_accuracy;
    j["mean_distance"] = r.mean_distance;
    j["eval_accuracy"] = r.eval_accuracy < 0.0 ? json(nullptr) : json(r.eval_accuracy);
    j["snapped"] = r.snapped;
    return j.dump();
}

RunSummary execute(const ExperimentConfig& config, bool resume, const ProgressFn& progress) {
    config.validate();
    const fs::path dir(config.output_dir);
    const std::string cfg_json = config_to_json(config);

    Checkpoint state;
    if (resume && fs::exists(dir / RunFiles::partial)) {
        state = load_checkpoint((dir / RunFiles::partial).string());
        if (state.config_json != cfg_json)
            throw ConfigError("resume: configuration differs from the interrupted run in " + dir.string());
    } else if (resume && fs::exists(dir / RunFiles::checkpoint)) {
        auto done = load_checkpoint((dir / RunFiles::checkpoint).string());
        if (done.config_json != cfg_json)
            throw ConfigError("resume: configuration differs from the finished run in " + dir.string());
        return {done.final_accuracy, done.epochs_completed, dir.string()};
    } else {
        if (resume) throw IoError("resume: nothing to resume in " + dir.string());
        state.mode = config.mode;
        state.seed = config.seed;
        state.config_json = cfg_json;
        state.net = initial_network(config, state.phase);
    }

    const auto train = load_dataset(config.data, Split::train);
    const auto eval = load_dataset(config.data, Split::eval);
    fs::create_directories(dir);
    write_text(dir / RunFiles::config, cfg_json + "\n");
    write_text(dir / RunFiles::metrics, state.metrics_jsonl);

    const std::string partial = (dir / RunFiles::partial).string();
    auto hook_for = [&](Phase phase) {
        return [&, phase](const EpochRecord& rec, const Network&) {
            const std::string line = metric_record(rec, phase, config.mode) + "\n";
            append_text(dir / RunFiles::metrics, line);
            state.metrics_jsonl += line;
            state.epochs_completed = rec.epoch + 1;
            save_checkpoint(partial, state);
            if (progress) progress(line.substr(0, line.size() - 1));
        };
    };

    if (state.phase == Phase::pretrain) {
        run(run_plan(config, RunMode::fp), *state.net, *train, *eval, hook_for(Phase::pretrain),
            state.epochs_completed);
        const auto reg = register_layers(*state.net, registration_options(config));
        if (reg.all_exempt) throw ConfigError("arch: every layer is exempt from quantization");
        state.phase = Phase::main;
        state.epochs_completed = 0;
        save_checkpoint(partial, state);
    }
    const RunResult result =
        run(run_plan(config, config.mode), *state.net, *train, *eval, hook_for(Phase::main), state.epochs_completed);
    state.phase = Phase::done;
    state.epochs_completed = config.epochs;
    state.final_accuracy = result.final_accuracy;
    save_checkpoint((dir / RunFiles::checkpoint).string(), state);

    EvalReport rep = describe(*state.net, config.mode);
    rep.accuracy = result.final_accuracy;
    if (config.mode == RunMode::fault_finetune) rep.fault_rate = config.fault_rate;
    if (config.mode == RunMode::variability_finetune) rep.sigma_over_mu = config.sigma_over_mu;
    write_text(dir / RunFiles::manifest,
               manifest_json("train", series_name(config), rep, cfg_json, config.epochs).dump(2) + "\n");
    fs::remove(partial);
    return {result.final_accuracy, config.epochs, dir.string()};
}

void inject(Network& net, const Injection& injection) {
    if (injection.fault_rate && !(*injection.fault_rate >= 0.0 && *injection.fault_rate <= 1.0))
        throw ParameterError("fault rate must be in [0, 1]");
    if (injection.sigma_over_mu && !(std::isfinite(*injection.sigma_over_mu) && *injection.sigma_over_mu >= 0.0))
        throw ParameterError("sigma/mu must be a finite number >= 0");
    bool any = false;
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        any = true;
        if (l->quant->codes.size() != l->weight_count())
            throw ConfigError("layer '" + l->name + "' has no stored codes; quantize and snap the model first");
    }
    if (!any) throw ConfigError("checkpoint has no quantized layers to inject into");
    attach_maps(net, injection);
}

std::string EvalReport::to_json() const {
    json j;
    j["accuracy"] = accuracy;
    j["mode"] = std::string(to_string(mode));
    j["bits"] = bits;
    j["fault_rate"] = fault_rate;
    j["sigma_over_mu"] = sigma_over_mu;
    return j.dump();
}

namespace {

ExperimentConfig checkpoint_config(const Checkpoint& ck, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg = config_from_json(ck.config_json);
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
}

}  // namespace

EvalReport evaluate_checkpoint(const Checkpoint& ck, const std::vector<std::string>& overrides) {
    if (!ck.net) throw InputError("checkpoint has no network");
    const ExperimentConfig cfg = checkpoint_config(ck, overrides);
    const auto data = load_dataset(cfg.data, Split::eval);
    EvalReport r = describe(*ck.net, ck.mode);
    if (has_quantized(*ck.net)) {
        r.accuracy = evaluate_deployed(*ck.net, *data, cfg.eval_batch_size);
    } else {
        auto copy = ck.net->clone();
        r.accuracy = evaluate(*copy, *data, cfg.eval_batch_size);
    }
    return r;
}

std::string SimulationReport::to_json() const {
    json j;
    j["accuracy"] = accuracy;
    j["reference_accuracy"] = reference_accuracy;
    j["max_logit_difference"] = max_logit_difference;
    j["crossbar_layers"] = crossbar_layers;
    j["mode"] = std::string(to_string(setup.mode));
    j["bits"] = setup.bits;
    j["fault_rate"] = setup.fault_rate;
    j["sigma_over_mu"] = setup.sigma_over_mu;
    return j.dump();
}

SimulationReport simulate_inference(const Checkpoint& ck, const SimulationOptions& options,
                                    const std::vector<std::string>& overrides) {
    if (!ck.net) throw InputError("checkpoint has no network");
    if (options.accumulator_bits != 0 && (options.accumulator_bits < 2 || options.accumulator_bits > 63))
        throw ParameterError("accumulator width must be 0 (exact) or in [2, 63]");
    const ExperimentConfig cfg = checkpoint_config(ck, overrides);
    const auto data = load_dataset(cfg.data, Split::eval);

    auto base = ck.net->clone();
    const bool inject_any = options.injection.fault_rate || options.injection.sigma_over_mu;
    if (inject_any) {
        inject(*base, options.injection);
    } else {
        for (auto* l : base->layers())
            if (l->quant && l->quant->codes.size() != l->weight_count())
                throw ConfigError("layer '" + l->name + "' has no stored codes; quantize and snap the model first");
    }
    auto reference = deployed(*base);
    auto sim = deployed(*base);
    const bool spiking = base->arch().kind == ArchKind::snn2;
    SimulationReport rep;
    const CrossbarOptions xopts{options.accumulator_bits};
    for (auto* l : sim->layers()) {
        if (!l->quant) continue;
        if (!l->act) {
            if (!spiking)
                throw ConfigError("layer '" + l->name + "' has no activation quantizer; crossbars need integer inputs");
            ActSlot unit;
            unit.quantizer = make_act_quantizer(1, 1.0);
            unit.calibrated = true;
            unit.trainable = false;
            l->act = unit;
        }
        auto xb = std::make_shared<const CrossbarLayer>(crossbar_from_layer(*l, options.model));
        xb->validate();
        l->executor = [xb, xopts](const Matrix& codes, double s) { return bit_sliced_matmul(codes, s, *xb, xopts); };
        ++rep.crossbar_layers;
    }
    if (rep.crossbar_layers == 0) throw ConfigError("checkpoint has no quantized layers to simulate");

    std::size_t correct = 0, ref_correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data->size(); start += cfg.eval_batch_size) {
        const std::size_t end = std::min(data->size(), start + cfg.eval_batch_size);
        idx.resize(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        const Batch b = data->make_batch(idx, false, 0);
        const Matrix ys = sim->forward(b, false);
        const Matrix yr = reference->forward(b, false);
        correct += count_correct(ys, b.labels);
        ref_correct += count_correct(yr, b.labels);
        rep.max_logit_difference = std::max(rep.max_logit_difference, (ys - yr).cwiseAbs().maxCoeff());
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(data->size());
    rep.reference_accuracy = static_cast<double>(ref_correct) / static_cast<double>(data->size());
    rep.setup = describe(*base, ck.mode);
    rep.setup.accuracy = rep.accuracy;
    return rep;
}

void write_manifest(const std::string& dir, const std::string& command, const std::string& series,
                    const EvalReport& report, const std::string& config_json) {
    fs::create_directories(dir);
    write_text(fs::path(dir) / RunFiles::manifest,
               manifest_json(command, series, report, config_json, 0).dump(2) + "\n");
}

SweepReport collect_sweep(const std::string& sweep_dir) {
    if (!fs::is_directory(sweep_dir)) throw IngestError("sweep directory not found: " + sweep_dir);
    std::vector<fs::path> paths;
    for (const auto& e : fs::recursive_directory_iterator(sweep_dir))
        if (e.is_regular_file() && e.path().filename() == RunFiles::manifest) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());

    using Key = std::pair<std::string, int>;
    std::map<Key, std::map<double, std::pair<double, int>>> fault, var;
    SweepReport rep;
    for (const auto& p : paths) {
        json m;
        try {
            m = json::parse(read_text(p));
            if (m.at("schema").get<int>() != kManifestSchema) throw IngestError("unsupported manifest schema");
            const Key key{m.at("series").get<std::string>(), m.at("bits").get<int>()};
            const double acc = m.at("accuracy").get<double>();
            const double fr = m.at("fault_rate").get<double>();
            const double sg = m.at("sigma_over_mu").get<double>();
            if (sg == 0.0) {
                auto& slot = fault[key][fr];
                slot.first += acc;
                ++slot.second;
            }
            if (fr == 0.0) {
                auto& slot = var[key][sg];
                slot.first += acc;
                ++slot.second;
            }
        } catch (const json::exception& e) {
            throw IngestError(p.string() + ": malformed manifest: " + e.what());
        } catch (const IngestError& e) {
            throw IngestError(p.string() + ": " + e.what());
        }
        ++rep.manifests;
    }
    auto flatten = [](const auto& groups) {
        std::vector<Curve> out;
        for (const auto& [key, pts] : groups) {
            Curve c{key.first, key.second, {}};
            for (const auto& [x, acc] : pts) c.points.push_back({x, acc.first / acc.second, acc.second});
            out.push_back(std::move(c));
        }
        return out;
    };
    rep.fault_curves = flatten(fault);
    rep.variability_curves = flatten(var);
    return rep;
}

}  // namespace rqat
