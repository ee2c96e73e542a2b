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


#include "rqat/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "rqat/errors.hpp"

namespace rqat {

namespace {

using json = nlohmann::ordered_json;

struct Field {
    const char* key;
    std::function<json(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const json&)> set;
};

template <class T>
T as(const json& v, const char* key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(std::string(key) + ": expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(std::string(key) + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>)
                if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                    throw ConfigError(std::string(key) + ": expected a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
        } else {
            if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

template <class E, class Parse>
E as_enum(const json& v, const char* key, Parse parse) {
    const auto name = as<std::string>(v, key);
    try {
        return parse(name);
    } catch (const Error& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

#define RQAT_PLAIN(key, member)                                              \
    Field {                                                                  \
        #key, [](const ExperimentConfig& c) { return json(c.member); },      \
            [](ExperimentConfig& c, const json& v) {                         \
                c.member = as<decltype(c.member)>(v, #key);                  \
            }                                                                \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"mode", [](const ExperimentConfig& c) { return json(std::string(to_string(c.mode))); },
              [](ExperimentConfig& c, const json& v) {
                  c.mode = as_enum<RunMode>(v, "mode", [](const std::string& s) { return run_mode_from_string(s); });
              }},
        Field{"arch", [](const ExperimentConfig& c) { return json(to_string(c.arch)); },
              [](ExperimentConfig& c, const json& v) {
                  c.arch = as_enum<ArchKind>(v, "arch", [](const std::string& s) { return arch_from_string(s); });
              }},
        Field{"widths", [](const ExperimentConfig& c) { return json(c.widths); },
              [](ExperimentConfig& c, const json& v) {
                  if (!v.is_array()) throw ConfigError("widths: expected an array of integers");
                  std::vector<std::size_t> w;
                  for (const auto& e : v) w.push_back(as<std::size_t>(e, "widths"));
                  c.widths = std::move(w);
              }},
        Field{"dataset", [](const ExperimentConfig& c) { return json(c.data.id); },
              [](ExperimentConfig& c, const json& v) { c.data.id = as<std::string>(v, "dataset"); }},
        RQAT_PLAIN(train_size, data.train_size),
        RQAT_PLAIN(eval_size, data.eval_size),
        RQAT_PLAIN(data_seed, data.seed),
        RQAT_PLAIN(data_dir, data.data_dir),
        RQAT_PLAIN(noise, data.noise),
        RQAT_PLAIN(mix, data.mix),
        RQAT_PLAIN(features, data.features),
        RQAT_PLAIN(timesteps, data.timesteps),
        RQAT_PLAIN(bits, bits),
        Field{"quant_mode", [](const ExperimentConfig& c) { return json(std::string(to_string(c.quant_mode))); },
              [](ExperimentConfig& c, const json& v) {
                  c.quant_mode = as_enum<QuantMode>(v, "quant_mode",
                                                    [](const std::string& s) { return quant_mode_from_string(s); });
              }},
        RQAT_PLAIN(act_bits, act_bits),
        RQAT_PLAIN(quantize_endpoints, quantize_endpoints),
        RQAT_PLAIN(quantize_activations, quantize_activations),
        Field{"alpha_mode", [](const ExperimentConfig& c) { return json(std::string(to_string(c.alpha_mode))); },
              [](ExperimentConfig& c, const json& v) {
                  c.alpha_mode = as_enum<AlphaMode>(v, "alpha_mode",
                                                    [](const std::string& s) { return alpha_mode_from_string(s); });
              }},
        RQAT_PLAIN(delta_factor, delta_factor),
        RQAT_PLAIN(lambda_init, lambda_init),
        RQAT_PLAIN(lambda_final, lambda_final),
        RQAT_PLAIN(ramp_epochs, ramp_epochs),
        RQAT_PLAIN(epochs, epochs),
        RQAT_PLAIN(pretrain_epochs, pretrain_epochs),
        RQAT_PLAIN(pretrain_lr, pretrain_lr),
        RQAT_PLAIN(snap_period, snap_period),
        RQAT_PLAIN(fault_aware_loss, fault_aware_loss),
        RQAT_PLAIN(train_act_scales, train_act_scales),
        RQAT_PLAIN(lr_weights, lr_weights),
        RQAT_PLAIN(lr_quant, lr_quant),
        RQAT_PLAIN(lr_act, lr_act),
        RQAT_PLAIN(momentum, momentum),
        RQAT_PLAIN(weight_decay, weight_decay),
        RQAT_PLAIN(batch_size, batch_size),
        RQAT_PLAIN(eval_batch_size, eval_batch_size),
        RQAT_PLAIN(augment, augment),
        RQAT_PLAIN(eval_every, eval_every),
        RQAT_PLAIN(seed, seed),
        RQAT_PLAIN(fault_rate, fault_rate),
        RQAT_PLAIN(fault_seed, fault_seed),
        RQAT_PLAIN(sigma_over_mu, sigma_over_mu),
        RQAT_PLAIN(variability_seed, variability_seed),
        Field{"array_model", [](const ExperimentConfig& c) { return json(std::string(to_string(c.array_model))); },
              [](ExperimentConfig& c, const json& v) {
                  c.array_model = as_enum<ArrayModel>(v, "array_model",
                                                      [](const std::string& s) { return array_model_from_string(s); });
              }},
        RQAT_PLAIN(accumulator_bits, accumulator_bits),
        RQAT_PLAIN(snn_beta, snn_beta),
        RQAT_PLAIN(snn_v_th, snn_v_th),
        RQAT_PLAIN(snn_v_reset, snn_v_reset),
        RQAT_PLAIN(surrogate_width, surrogate_width),
        RQAT_PLAIN(logit_scale, logit_scale),
        RQAT_PLAIN(init_checkpoint, init_checkpoint),
        RQAT_PLAIN(output_dir, output_dir),
    };
    return table;
}

#undef RQAT_PLAIN

const Field& field(std::string_view key) {
    for (const auto& f : fields())
        if (key == f.key) return f;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

std::string_view to_string(ArrayModel model) { return model == ArrayModel::digital ? "digital" : "analog"; }

ArrayModel array_model_from_string(std::string_view name) {
    if (name == "digital") return ArrayModel::digital;
    if (name == "analog") return ArrayModel::analog;
    throw ParameterError("unknown array model '" + std::string(name) + "' (digital, analog)");
}

void ExperimentConfig::validate() const {
    const bool spiking = arch == ArchKind::snn2;
    const bool events = data.id == "synthetic-events";
    require(spiking == events, "arch", spiking ? "snn2 needs the synthetic-events dataset"
                                               : to_string(arch) + " needs an image dataset");
    const std::size_t want_widths = arch == ArchKind::cnn4 ? 3 : arch == ArchKind::mlp5 ? 4 : 1;
    require(widths.size() == want_widths, "widths",
            "expected " + std::to_string(want_widths) + " entries for " + to_string(arch));
    for (auto w : widths) require(w >= 1, "widths", "entries must be >= 1");
    require(data.id == "synthetic-images" || events || data.id == "cifar10" || data.id.rfind("dir:", 0) == 0,
            "dataset", "unknown dataset '" + data.id + "'");
    require(data.train_size >= 1, "train_size", "must be >= 1");
    require(data.eval_size >= 1, "eval_size", "must be >= 1");
    require(finite_nonneg(data.noise), "noise", "must be a finite number >= 0");
    require(data.mix >= 0.0 && data.mix <= 1.0, "mix", "must be in [0, 1]");
    if (events) {
        require(data.features >= 8, "features", "must be >= 8");
        require(data.timesteps >= 1, "timesteps", "must be >= 1");
    }
    require(bits >= 1 && bits <= kMaxBits, "bits", "must be in [1, " + std::to_string(kMaxBits) + "]");
    require(bits >= 2, "bits", "signed weight quantizers need at least 2 bits");
    require(act_bits >= 1 && act_bits <= kMaxBits, "act_bits", "must be in [1, " + std::to_string(kMaxBits) + "]");
    require(std::isfinite(delta_factor) && delta_factor > 1.0, "delta_factor", "must exceed 1");
    require(std::isfinite(lambda_init) && lambda_init > 0.0, "lambda_init", "must be > 0");
    require(std::isfinite(lambda_final) && lambda_final >= lambda_init, "lambda_final", "must be >= lambda_init");
    require(ramp_epochs >= 1, "ramp_epochs", "must be >= 1");
    require(epochs >= 0, "epochs", "must be >= 0");
    require(pretrain_epochs >= 0, "pretrain_epochs", "must be >= 0");
    require(finite_nonneg(pretrain_lr), "pretrain_lr", "must be >= 0");
    require(snap_period >= 0, "snap_period", "must be >= 0");
    require(finite_nonneg(lr_weights), "lr_weights", "must be >= 0");
    require(finite_nonneg(lr_quant), "lr_quant", "must be >= 0");
    require(finite_nonneg(lr_act), "lr_act", "must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, "momentum", "must be in [0, 1)");
    require(finite_nonneg(weight_decay), "weight_decay", "must be >= 0");
    require(batch_size >= 1, "batch_size", "must be >= 1");
    require(eval_batch_size >= 1, "eval_batch_size", "must be >= 1");
    require(eval_every >= 0, "eval_every", "must be >= 0");
    require(fault_rate >= 0.0 && fault_rate <= 1.0, "fault_rate", "must be in [0, 1]");
    require(sigma_over_mu >= 0.0 && sigma_over_mu < 1.0, "sigma_over_mu", "must be in [0, 1)");
    require(accumulator_bits == 0 || (accumulator_bits >= 2 && accumulator_bits <= 63), "accumulator_bits",
            "must be 0 (exact) or in [2, 63]");
    require(snn_beta > 0.0 && snn_beta <= 1.0, "snn_beta", "must be in (0, 1]");
    require(std::isfinite(snn_v_th) && std::isfinite(snn_v_reset) && snn_v_reset < snn_v_th, "snn_v_th",
            "must exceed snn_v_reset");
    require(std::isfinite(surrogate_width) && surrogate_width > 0.0, "surrogate_width", "must be > 0");
    require(std::isfinite(logit_scale) && logit_scale > 0.0, "logit_scale", "must be > 0");
    require(!output_dir.empty(), "output_dir", "must not be empty");
}

std::string config_to_json(const ExperimentConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.key] = f.get(config);
    return j.dump(2);
}

ExperimentConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    for (const auto& [key, value] : j.items()) field(key).set(c, value);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must be key=value, got '" +
                                                                   std::string(assignment) + "'");
    const std::string_view key = assignment.substr(0, eq);
    const std::string raw(assignment.substr(eq + 1));
    const Field& f = field(key);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    // bare words such as `analog` or paths stay strings
    if (f.get(config).is_string() && !value.is_string()) value = raw;
    f.set(config, value);
}

ArchSpec arch_spec(const ExperimentConfig& c) {
    ArchSpec a;
    a.kind = c.arch;
    a.widths = c.widths;
    a.classes = 10;
    if (c.arch == ArchKind::snn2) a.features = c.data.features;
    a.lif.beta = c.snn_beta;
    a.lif.v_th = c.snn_v_th;
    a.lif.v_reset = c.snn_v_reset;
    a.surrogate_width = c.surrogate_width;
    a.logit_scale = c.logit_scale;
    return a;
}

RunPlan run_plan(const ExperimentConfig& c, RunMode mode) {
    RunPlan p;
    p.mode = mode;
    p.epochs = mode == RunMode::fp && c.mode != RunMode::fp ? c.pretrain_epochs : c.epochs;
    p.snap_period = c.snap_period;
    p.lr_weights = mode == RunMode::fp && c.mode != RunMode::fp ? c.pretrain_lr : c.lr_weights;
    p.lr_quant = c.lr_quant;
    p.lr_act = c.lr_act;
    p.momentum = c.momentum;
    p.weight_decay = c.weight_decay;
    p.lambda.lambda_init = c.lambda_init;
    p.lambda.lambda_final = c.lambda_final;
    p.lambda.ramp_epochs = c.ramp_epochs;
    p.batch_size = c.batch_size;
    p.eval_batch_size = c.eval_batch_size;
    p.seed = c.seed;
    p.fault_aware_loss = c.fault_aware_loss;
    p.train_act_scales = c.train_act_scales;
    p.delta_factor = c.delta_factor;
    p.augment = c.augment;
    p.eval_every = c.eval_every;
    return p;
}

RegistrationOptions registration_options(const ExperimentConfig& c) {
    RegistrationOptions o;
    o.bits = c.bits;
    o.act_bits = c.act_bits;
    o.mode = c.quant_mode;
    o.alpha_mode = c.alpha_mode;
    o.quantize_endpoints = c.quantize_endpoints;
    o.quantize_activations = c.quantize_activations;
    return o;
}

}  // namespace rqat
