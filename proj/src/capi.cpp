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


#include "rqat/rqat.h"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "rqat/checkpoint.hpp"
#include "rqat/config.hpp"
#include "rqat/crossbar.hpp"
#include "rqat/errors.hpp"
#include "rqat/experiment.hpp"
#include "rqat/quantizer.hpp"
#include "rqat/snn.hpp"
#include "rqat/trainkit.hpp"

struct rqat_config {
    rqat::ExperimentConfig value;
};

struct rqat_checkpoint {
    rqat::Checkpoint value;
};

namespace {

thread_local std::string g_last_error;

rqat_status status_of(rqat::ErrorKind kind) {
    switch (kind) {
        case rqat::ErrorKind::parameter: return RQAT_E_PARAMETER;
        case rqat::ErrorKind::shape: return RQAT_E_SHAPE;
        case rqat::ErrorKind::configuration: return RQAT_E_CONFIG;
        case rqat::ErrorKind::ingest: return RQAT_E_INGEST;
        case rqat::ErrorKind::input: return RQAT_E_INPUT;
        case rqat::ErrorKind::io: return RQAT_E_IO;
    }
    return RQAT_E_INTERNAL;
}

template <class F>
rqat_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return RQAT_OK;
    } catch (const rqat::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return RQAT_E_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return RQAT_E_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RQAT_E_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return RQAT_E_INTERNAL;
    }
}

void require(const void* p, const char* name) {
    if (!p) throw rqat::InputError(std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::vector<std::string> collect(const char* const* items, std::size_t count) {
    if (count && !items) throw rqat::InputError("overrides is NULL but count is nonzero");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        require(items[i], "override");
        out.emplace_back(items[i]);
    }
    return out;
}

rqat::Injection to_injection(const rqat_injection& in) {
    rqat::Injection out;
    if (in.faults) {
        out.fault_rate = in.fault_rate;
        out.fault_seed = in.fault_seed;
    }
    if (in.variability) {
        out.sigma_over_mu = in.sigma_over_mu;
        out.variability_seed = in.variability_seed;
    }
    return out;
}

std::string checkpoint_info(const rqat::Checkpoint& ck) {
    nlohmann::ordered_json j;
    j["version"] = rqat::kCheckpointVersion;
    j["mode"] = std::string(rqat::to_string(ck.mode));
    j["phase"] = std::string(rqat::to_string(ck.phase));
    j["epochs_completed"] = ck.epochs_completed;
    j["final_accuracy"] = ck.final_accuracy;
    j["seed"] = ck.seed;
    j["arch"] = rqat::to_string(ck.net->arch().kind);
    auto layers = nlohmann::ordered_json::array();
    for (const auto* l : ck.net->layers()) {
        nlohmann::ordered_json e;
        e["name"] = l->name;
        e["out"] = l->out_features();
        e["in"] = l->in_features();
        e["quantized"] = l->quant.has_value();
        if (l->quant) {
            e["bits"] = l->quant->params.bits;
            e["quant_mode"] = std::string(rqat::to_string(l->quant->params.mode));
            e["multipliers"] = l->quant->params.effective_multipliers();
            e["offset"] = l->quant->params.offset;
            e["has_codes"] = l->quant->codes.size() == l->weight_count();
            e["fault_rate"] = l->quant->faults ? nlohmann::ordered_json(l->quant->faults->rate) : nlohmann::ordered_json(nullptr);
            e["sigma_over_mu"] =
                l->quant->variability ? nlohmann::ordered_json(l->quant->variability->sigma_over_mu) : nlohmann::ordered_json(nullptr);
        }
        if (l->act) e["act_scale"] = l->act->quantizer.scale;
        layers.push_back(std::move(e));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

std::string eval_series(const rqat::Checkpoint& ck) { return "eval:" + std::string(rqat::to_string(ck.mode)); }

}  // namespace

extern "C" {

int rqat_api_version(void) { return RQAT_API_VERSION; }

const char* rqat_status_name(rqat_status status) {
    switch (status) {
        case RQAT_OK: return "ok";
        case RQAT_E_PARAMETER: return "parameter error";
        case RQAT_E_SHAPE: return "shape error";
        case RQAT_E_CONFIG: return "configuration error";
        case RQAT_E_INGEST: return "ingest error";
        case RQAT_E_INPUT: return "input error";
        case RQAT_E_IO: return "i/o error";
        case RQAT_E_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* rqat_last_error(void) { return g_last_error.c_str(); }

void rqat_string_free(char* s) { std::free(s); }

rqat_status rqat_config_create(rqat_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new rqat_config{};
    });
}

rqat_status rqat_config_load(const char* path, rqat_config** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new rqat_config{rqat::load_config(path)};
    });
}

rqat_status rqat_config_parse(const char* json, rqat_config** out) {
    return guarded([&] {
        require(json, "json");
        require(out, "out");
        *out = new rqat_config{rqat::config_from_json(json)};
    });
}

rqat_status rqat_config_set(rqat_config* config, const char* assignment) {
    return guarded([&] {
        require(config, "config");
        require(assignment, "assignment");
        rqat::apply_override(config->value, assignment);
    });
}

rqat_status rqat_config_validate(const rqat_config* config) {
    return guarded([&] {
        require(config, "config");
        config->value.validate();
    });
}

rqat_status rqat_config_to_json(const rqat_config* config, char** out) {
    return guarded([&] {
        require(config, "config");
        require(out, "out");
        *out = dup_string(rqat::config_to_json(config->value));
    });
}

void rqat_config_destroy(rqat_config* config) { delete config; }

rqat_status rqat_run(const rqat_config* config, int resume, rqat_progress_fn progress, void* user,
                     rqat_run_result* out) {
    return guarded([&] {
        require(config, "config");
        rqat::ProgressFn fn;
        if (progress) fn = [&](const std::string& line) { progress(line.c_str(), user); };
        const auto summary = rqat::execute(config->value, resume != 0, fn);
        if (out) {
            out->final_accuracy = summary.final_accuracy;
            out->epochs = summary.epochs;
        }
    });
}

rqat_status rqat_checkpoint_load(const char* path, rqat_checkpoint** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new rqat_checkpoint{rqat::load_checkpoint(path)};
    });
}

rqat_status rqat_checkpoint_save(const rqat_checkpoint* checkpoint, const char* path) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(path, "path");
        rqat::save_checkpoint(path, checkpoint->value);
    });
}

rqat_status rqat_checkpoint_info(const rqat_checkpoint* checkpoint, char** out) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(out, "out");
        *out = dup_string(checkpoint_info(checkpoint->value));
    });
}

void rqat_checkpoint_destroy(rqat_checkpoint* checkpoint) { delete checkpoint; }

rqat_status rqat_checkpoint_inject(rqat_checkpoint* checkpoint, const rqat_injection* injection) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(injection, "injection");
        if (!injection->faults && !injection->variability)
            throw rqat::ParameterError("injection selects neither faults nor variability");
        rqat::inject(*checkpoint->value.net, to_injection(*injection));
    });
}

rqat_status rqat_evaluate(const rqat_checkpoint* checkpoint, const char* const* overrides, size_t count,
                          const char* out_dir, char** report_json) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        const auto report = rqat::evaluate_checkpoint(checkpoint->value, collect(overrides, count));
        if (out_dir)
            rqat::write_manifest(out_dir, "eval", eval_series(checkpoint->value), report,
                                 checkpoint->value.config_json);
        if (report_json) *report_json = dup_string(report.to_json());
    });
}

rqat_status rqat_simulate(const rqat_checkpoint* checkpoint, const rqat_simulation_options* options,
                          const char* const* overrides, size_t count, const char* out_dir, char** report_json) {
    return guarded([&] {
        require(checkpoint, "checkpoint");
        require(options, "options");
        rqat::SimulationOptions opts;
        opts.model = options->analog ? rqat::ArrayModel::analog : rqat::ArrayModel::digital;
        opts.accumulator_bits = options->accumulator_bits;
        opts.injection = to_injection(options->injection);
        const auto report = rqat::simulate_inference(checkpoint->value, opts, collect(overrides, count));
        if (out_dir)
            rqat::write_manifest(out_dir, "simulate-crossbar",
                                 "crossbar-" + std::string(rqat::to_string(opts.model)) + ":" +
                                     std::string(rqat::to_string(checkpoint->value.mode)),
                                 report.setup, checkpoint->value.config_json);
        if (report_json) *report_json = dup_string(report.to_json());
    });
}

rqat_status rqat_report(const char* sweep_dir, const char* out_dir, char** summary_json) {
    return guarded([&] {
        require(sweep_dir, "sweep_dir");
        require(out_dir, "out_dir");
        const auto rep = rqat::write_report(sweep_dir, out_dir);
        if (summary_json) {
            nlohmann::ordered_json j;
            j["manifests"] = rep.manifests;
            auto curves = [](const std::vector<rqat::Curve>& cs) {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& c : cs) {
                    nlohmann::ordered_json e;
                    e["series"] = c.series;
                    e["bits"] = c.bits;
                    auto pts = nlohmann::ordered_json::array();
                    for (const auto& p : c.points) pts.push_back({p.x, p.accuracy});
                    e["points"] = std::move(pts);
                    arr.push_back(std::move(e));
                }
                return arr;
            };
            j["fault_curves"] = curves(rep.fault_curves);
            j["variability_curves"] = curves(rep.variability_curves);
            *summary_json = dup_string(j.dump());
        }
    });
}

rqat_status rqat_quantize(const double* multipliers, int bits, double offset, const double* x, size_t n,
                          double* values, uint32_t* codes) {
    return guarded([&] {
        require(multipliers, "multipliers");
        if (n) require(x, "x");
        if (bits < 1 || bits > rqat::kMaxBits) throw rqat::ParameterError("bits must be in [1, 16]");
        const auto levels = rqat::build_levels({multipliers, static_cast<std::size_t>(bits)}, offset);
        const auto q = rqat::quantize({x, n}, levels);
        for (std::size_t i = 0; i < n; ++i) {
            if (values) values[i] = q.values[i];
            if (codes) codes[i] = q.codes[i];
        }
    });
}

rqat_status rqat_lambda_at(double lambda_init, double lambda_final, int total_epochs, int ramp_epochs, int epoch,
                           double* out) {
    return guarded([&] {
        require(out, "out");
        rqat::LambdaSchedule s{lambda_init, lambda_final, total_epochs, ramp_epochs};
        *out = rqat::lambda_at(s, epoch);
    });
}

rqat_status rqat_lif_step(const double* input, double* v, size_t n, double beta, double v_threshold, double v_reset,
                          double* spikes) {
    return guarded([&] {
        if (n) {
            require(input, "input");
            require(v, "v");
        }
        rqat::LifState state{std::vector<double>(v, v + n), rqat::LifParams{beta, v_threshold, v_reset}};
        const auto step = rqat::lif_step({input, n}, state);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = step.next.v[i];
            if (spikes) spikes[i] = step.spikes[i];
        }
    });
}

rqat_status rqat_bit_sliced_matvec(const int64_t* input_codes, size_t cols, const uint32_t* weight_codes,
                                   size_t rows, const double* multipliers, int bits, double offset, double act_scale,
                                   double* y) {
    return guarded([&] {
        require(input_codes, "input_codes");
        require(weight_codes, "weight_codes");
        require(multipliers, "multipliers");
        require(y, "y");
        rqat::CrossbarLayer layer;
        layer.rows = rows;
        layer.cols = cols;
        layer.codes.assign(weight_codes, weight_codes + rows * cols);
        layer.params.bits = bits;
        layer.params.multipliers.assign(multipliers, multipliers + (bits > 0 ? bits : 0));
        layer.params.offset = offset;
        layer.params.mode = rqat::QuantMode::non_uniform;
        layer.act = rqat::make_act_quantizer(rqat::kMaxBits, act_scale);
        const auto sums = rqat::accumulate_planes({input_codes, cols}, layer);
        const auto b = static_cast<std::size_t>(bits);
        for (std::size_t o = 0; o < rows; ++o) {
            double acc = 0.0;
            for (std::size_t j = 0; j < b; ++j) acc += multipliers[j] * static_cast<double>(sums.planes[o * b + j]);
            y[o] = act_scale * (acc + offset * static_cast<double>(sums.offset_column));
        }
    });
}

}  // extern "C"
