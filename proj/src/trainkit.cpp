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

#include "rqat/trainkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "rqat/errors.hpp"
#include "rqat/keyed_random.hpp"

namespace rqat {

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::fp: return "fp";
        case RunMode::qat: return "qat";
        case RunMode::fault_finetune: return "fault_finetune";
        case RunMode::variability_finetune: return "variability_finetune";
    }
    return "qat";
}

RunMode run_mode_from_string(std::string_view name) {
    if (name == "fp") return RunMode::fp;
    if (name == "qat") return RunMode::qat;
    if (name == "fault_finetune") return RunMode::fault_finetune;
    if (name == "variability_finetune") return RunMode::variability_finetune;
    throw ConfigError("unknown run mode '" + std::string(name) + "'");
}

void LambdaSchedule::validate() const {
    if (!(lambda_init > 0.0) || !(lambda_final > 0.0) || !std::isfinite(lambda_init) || !std::isfinite(lambda_final))
        throw ParameterError("lambda endpoints must be positive and finite");
    if (total_epochs < 1) throw ParameterError("lambda schedule needs at least one epoch");
    if (ramp_epochs < 1 || ramp_epochs > total_epochs)
        throw ParameterError("ramp_epochs must be in [1, total_epochs]");
}

double lambda_at(const LambdaSchedule& s, int epoch) {
    s.validate();
    if (epoch < 0 || epoch >= s.total_epochs)
        throw ParameterError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(s.total_epochs) + ")");
    const int ramp_start = s.total_epochs - s.ramp_epochs;
    if (epoch == s.total_epochs - 1) return s.lambda_final;
    if (epoch <= ramp_start) return s.lambda_init;
    const double t = static_cast<double>(epoch - ramp_start) / static_cast<double>(s.ramp_epochs - 1);
    return s.lambda_init * std::pow(s.lambda_final / s.lambda_init, t);
}

void RunPlan::validate() const {
    if (epochs < 0) throw ParameterError("epochs must be >= 0");
    if (snap_period < 0) throw ParameterError("snap_period must be >= 0");
    if (!(lr_weights >= 0.0) || !(lr_quant >= 0.0) || !(lr_act >= 0.0)) throw ParameterError("learning rates must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("momentum must be in [0, 1)");
    if (batch_size < 1 || eval_batch_size < 1) throw ParameterError("batch sizes must be >= 1");
    if (!(delta_factor > 1.0)) throw ParameterError("delta_factor must exceed 1");
    if (mode != RunMode::fp && epochs > 0) effective_schedule(*this).validate();
}

LambdaSchedule effective_schedule(const RunPlan& plan) {
    LambdaSchedule s = plan.lambda;
    s.total_epochs = std::max(plan.epochs, 1);
    // fine-tuning ramps over the final half of its epochs
    if (plan.mode == RunMode::fault_finetune || plan.mode == RunMode::variability_finetune)
        s.ramp_epochs = std::max(1, s.total_epochs / 2);
    s.ramp_epochs = std::min(s.ramp_epochs, s.total_epochs);
    return s;
}

LayerRegistry register_layers(Network& net, const RegistrationOptions& o) {
    auto layers = net.layers();
    LayerRegistry reg;
    if (!o.quantize_endpoints && layers.size() < 3) {
        reg.all_exempt = true;
        return reg;
    }
    const std::size_t first = o.quantize_endpoints ? 0 : 1;
    const std::size_t last = o.quantize_endpoints ? layers.size() : layers.size() - 1;
    for (std::size_t i = first; i < last; ++i) {
        auto& l = *layers[i];
        WeightSlot slot;
        slot.params = init_quantizer(l.weights(), o.bits, true, o.mode);
        slot.scale = layer_scale(o.bits, true, l.weight_count(), o.alpha_mode);
        slot.grad_multipliers.assign(slot.params.multipliers.size(), 0.0);
        slot.mom_multipliers.assign(slot.params.multipliers.size(), 0.0);
        l.quant = std::move(slot);
        if (o.quantize_activations) {
            ActSlot act;
            act.quantizer = make_act_quantizer(o.act_bits, 1.0);
            l.act = act;
        }
        reg.quantized.push_back(i);
        reg.scales.push_back(l.quant->scale);
    }
    return reg;
}

double apply_regularizers(Network& net, RunMode mode, bool use_fault_loss, double lambda, double delta_factor) {
    if (mode == RunMode::fp || lambda == 0.0) return 0.0;
    double total = 0.0;
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        auto& slot = *l->quant;
        RegularizerTerm term;
        if (mode == RunMode::variability_finetune && slot.variability) {
            term = variability_aware_loss(l->weights(), slot.params, *slot.variability, slot.scale, lambda);
        } else {
            const LevelSet levels = build_levels(slot.params);
            if (mode == RunMode::fault_finetune && use_fault_loss && slot.faults) {
                const ValidityMask valid = validity_from_faults(*slot.faults, levels);
                term = fault_aware_loss(l->weights(), levels, valid, slot.scale, lambda,
                                        default_delta(levels, delta_factor));
            } else {
                term = qat_loss(l->weights(), levels, slot.scale, lambda);
            }
        }
        total += term.loss;
        double* gw = l->grad_weight.data();
        for (std::size_t i = 0; i < term.grad_weights.size(); ++i) gw[i] += term.grad_weights[i];
        if (slot.params.mode == QuantMode::learned_scale) {
            double gs = 0.0;
            for (std::size_t j = 0; j < term.grad_multipliers.size(); ++j)
                gs += term.grad_multipliers[j] * std::ldexp(1.0, static_cast<int>(j));
            slot.grad_multipliers[0] += gs;
        } else {
            for (std::size_t j = 0; j < term.grad_multipliers.size(); ++j)
                slot.grad_multipliers[j] += term.grad_multipliers[j];
        }
        slot.grad_offset += term.grad_offset;
    }
    return total;
}

std::size_t snap_faulty_weights(Network& net) {
    std::size_t changed = 0;
    for (auto* l : net.layers()) {
        if (!l->quant || !l->quant->faults) continue;
        const LevelSet levels = build_levels(l->quant->params);
        const ValidityMask valid = validity_from_faults(*l->quant->faults, levels);
        const auto snapped = snap_to_nearest_valid(l->weights(), levels, valid);
        auto w = l->weights();
        for (std::size_t i = 0; i < w.size(); ++i) {
            changed += w[i] != snapped[i];
            w[i] = snapped[i];
        }
    }
    return changed;
}

void map_to_levels(Network& net) {
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        auto& slot = *l->quant;
        auto w = l->weights();
        slot.codes.assign(w.size(), 0);
        if (slot.variability) {
            const auto r = slot.params.effective_multipliers();
            for (std::size_t i = 0; i < w.size(); ++i) {
                double value = w[i];
                slot.codes[i] = nearest_perturbed_level(r, slot.params.offset, slot.variability->row(i), w[i], value);
                w[i] = value;
            }
            continue;
        }
        const LevelSet levels = build_levels(slot.params);
        const Quantized q = slot.faults ? quantize_valid(w, levels, validity_from_faults(*slot.faults, levels))
                                        : quantize(w, levels);
        std::copy(q.values.begin(), q.values.end(), w.begin());
        slot.codes = q.codes;
    }
}

std::unique_ptr<Network> deployed(const Network& net) {
    auto copy = net.clone();
    bool needs_mapping = false;
    for (auto* l : copy->layers())
        if (l->quant && l->quant->codes.size() != l->weight_count()) needs_mapping = true;
    if (needs_mapping) map_to_levels(*copy);
    for (auto* l : copy->layers()) {
        if (!l->quant) continue;
        const auto& slot = *l->quant;
        const auto r = slot.params.effective_multipliers();
        const auto codes = slot.faults ? apply_faults_to_codes(slot.codes, *slot.faults) : slot.codes;
        auto w = l->weights();
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = slot.variability ? perturbed_level_value(r, slot.params.offset, slot.variability->row(i), codes[i])
                                    : level_value(r, slot.params.offset, codes[i]);
    }
    return copy;
}

double evaluate(Network& net, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw InputError("empty evaluation set");
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Batch b = data.make_batch(idx, false, 0);
        correct += count_correct(net.forward(b, false), b.labels);
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_deployed(const Network& net, const Dataset& data, std::size_t batch_size) {
    auto d = deployed(net);
    return evaluate(*d, data, batch_size);
}

double mean_level_distance(const Network& net, RunMode mode) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* l : net.layers()) {
        if (!l->quant) continue;
        const auto& slot = *l->quant;
        const auto w = l->weights();
        if (mode == RunMode::variability_finetune && slot.variability) {
            const auto r = slot.params.effective_multipliers();
            for (std::size_t i = 0; i < w.size(); ++i) {
                double v = 0.0;
                nearest_perturbed_level(r, slot.params.offset, slot.variability->row(i), w[i], v);
                sum += std::abs(w[i] - v);
            }
        } else {
            const LevelSet levels = build_levels(slot.params);
            if (mode == RunMode::fault_finetune && slot.faults) {
                const auto q = quantize_valid(w, levels, validity_from_faults(*slot.faults, levels));
                for (std::size_t i = 0; i < w.size(); ++i) sum += std::abs(w[i] - q.values[i]);
            } else {
                for (double x : w) sum += std::abs(x - levels.values[nearest_level(levels, x)]);
            }
        }
        n += w.size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

void check_maps(Network& net, RunMode mode) {
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        if (mode == RunMode::fault_finetune && !l->quant->faults)
            throw ConfigError("fault fine-tuning needs a fault map on layer '" + l->name + "'");
        if (mode == RunMode::variability_finetune && !l->quant->variability)
            throw ConfigError("variability fine-tuning needs a variability map on layer '" + l->name + "'");
    }
}

inline void sgd(double& p, double& buf, double g, double lr, double momentum) {
    buf = momentum * buf + g;
    p -= lr * buf;
}

void step(Network& net, const RunPlan& plan, double lr_scale) {
    const double m = plan.momentum;
    for (auto* l : net.layers()) {
        const double lr = plan.lr_weights * lr_scale;
        if (plan.weight_decay > 0.0) l->grad_weight += plan.weight_decay * l->weight;
        l->mom_weight = m * l->mom_weight + l->grad_weight;
        l->weight -= lr * l->mom_weight;
        l->mom_bias = m * l->mom_bias + l->grad_bias;
        l->bias -= lr * l->mom_bias;
        if (plan.mode == RunMode::fp) continue;
        if (l->quant && l->quant->params.mode != QuantMode::fixed) {
            auto& s = *l->quant;
            const double lq = plan.lr_quant * lr_scale;
            for (std::size_t j = 0; j < s.params.multipliers.size(); ++j)
                sgd(s.params.multipliers[j], s.mom_multipliers[j], s.grad_multipliers[j], lq, m);
            sgd(s.params.offset, s.mom_offset, s.grad_offset, lq, m);
        }
        if (l->act && l->act->trainable && plan.train_act_scales) {
            auto& a = *l->act;
            sgd(a.quantizer.scale, a.mom_scale, a.grad_scale, plan.lr_act * lr_scale, m);
            a.quantizer.scale = std::max(a.quantizer.scale, 1e-8);
        }
    }
}

}  // namespace

RunResult run(const RunPlan& plan, Network& net, const Dataset& train, const Dataset& eval, const EpochHook& hook,
              int start_epoch) {
    plan.validate();
    if (train.size() == 0) throw InputError("empty training set");
    if (plan.mode != RunMode::fp) {
        check_maps(net, plan.mode);
        // stored codes go stale as soon as the weights move
        for (auto* l : net.layers())
            if (l->quant) l->quant->codes.clear();
    }
    const LambdaSchedule schedule = effective_schedule(plan);

    RunResult result;
    std::vector<std::size_t> order(train.size());
    for (int epoch = start_epoch; epoch < plan.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lambda = plan.mode == RunMode::fp ? 0.0 : lambda_at(schedule, epoch);
        const double lr_scale = 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / plan.epochs));
        rec.lr = plan.lr_weights * lr_scale;
        if (plan.mode == RunMode::fault_finetune && plan.snap_period > 0 && epoch % plan.snap_period == 0) {
            snap_faulty_weights(net);
            rec.snapped = true;
        }

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(keyed::key(plan.seed, 0x5ffULL, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const std::uint64_t aug_key = keyed::key(plan.seed, 0xa09ULL, static_cast<std::uint64_t>(epoch));

        double task = 0.0, reg = 0.0;
        std::size_t correct = 0, steps = 0;
        for (std::size_t start = 0; start < order.size(); start += plan.batch_size) {
            const std::size_t end = std::min(order.size(), start + plan.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Batch batch = train.make_batch(idx, plan.augment, aug_key);
            net.zero_grad();
            const Matrix scores = net.forward(batch, true);
            Matrix grad;
            task += cross_entropy(scores, batch.labels, &grad);
            correct += count_correct(scores, batch.labels);
            net.backward(grad);
            reg += apply_regularizers(net, plan.mode, plan.fault_aware_loss, rec.lambda, plan.delta_factor);
            step(net, plan, lr_scale);
            ++steps;
        }
        rec.task_loss = task / static_cast<double>(steps);
        rec.reg_loss = reg / static_cast<double>(steps);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
        rec.mean_distance = mean_level_distance(net, plan.mode);
        const bool last = epoch + 1 == plan.epochs;
        if (!last && plan.eval_every > 0 && (epoch + 1) % plan.eval_every == 0)
            rec.eval_accuracy = plan.mode == RunMode::fp ? evaluate(net, eval, plan.eval_batch_size)
                                                         : evaluate_deployed(net, eval, plan.eval_batch_size);
        if (last) {
            if (plan.mode != RunMode::fp) map_to_levels(net);
            rec.eval_accuracy = plan.mode == RunMode::fp ? evaluate(net, eval, plan.eval_batch_size)
                                                         : evaluate_deployed(net, eval, plan.eval_batch_size);
        }
        result.log.push_back(rec);
        if (hook) hook(rec, net);
    }
    if (!result.log.empty() && result.log.back().epoch + 1 == plan.epochs) {
        result.final_accuracy = result.log.back().eval_accuracy;
    } else {
        if (plan.mode != RunMode::fp) map_to_levels(net);
        result.final_accuracy = plan.mode == RunMode::fp ? evaluate(net, eval, plan.eval_batch_size)
                                                         : evaluate_deployed(net, eval, plan.eval_batch_size);
    }
    return result;
}

}  // namespace rqat
