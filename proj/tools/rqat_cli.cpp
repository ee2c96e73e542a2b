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


// rqat command-line front end. Links only the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "rqat/rqat.h"

namespace {

struct Failure {
    rqat_status status;
};

void check(rqat_status s) {
    if (s != RQAT_OK) throw Failure{s};
}

struct Config {
    rqat_config* p = nullptr;
    ~Config() { rqat_config_destroy(p); }
};

struct Ckpt {
    rqat_checkpoint* p = nullptr;
    ~Ckpt() { rqat_checkpoint_destroy(p); }
};

struct Owned {
    char* p = nullptr;
    ~Owned() { rqat_string_free(p); }
};

struct RunArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::string init;
    bool resume = false;
    bool quiet = false;
    std::optional<double> rate, sigma;
    std::optional<unsigned long long> seed;
    bool mapping_only = false;
};

struct InjectArgs {
    std::optional<double> rate, sigma;
    unsigned long long fault_seed = 0, var_seed = 0;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("-c,--config", a.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", a.sets, "config override key=value (repeatable)");
    cmd->add_option("-o,--out", a.out, "run directory (overrides output_dir)");
    cmd->add_flag("--resume", a.resume, "continue from checkpoint.partial.bin");
    cmd->add_flag("-q,--quiet", a.quiet, "do not print per-epoch metrics");
}

void add_injection_options(CLI::App* cmd, InjectArgs& a) {
    cmd->add_option("--rate", a.rate, "bit-fault rate per cell")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", a.fault_seed, "fault sampling seed");
    cmd->add_option("--sigma", a.sigma, "device variability sigma/mu")->check(CLI::NonNegativeNumber);
    cmd->add_option("--var-seed", a.var_seed, "variability sampling seed");
}

rqat_injection to_injection(const InjectArgs& a) {
    rqat_injection inj{};
    if (a.rate) {
        inj.faults = 1;
        inj.fault_rate = *a.rate;
        inj.fault_seed = a.fault_seed;
    }
    if (a.sigma) {
        inj.variability = 1;
        inj.sigma_over_mu = *a.sigma;
        inj.variability_seed = a.var_seed;
    }
    return inj;
}

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_metric(const char* line, void*) { std::printf("%s\n", line), std::fflush(stdout); }

int run_command(const RunArgs& a, const char* mode) {
    Config cfg;
    check(a.config.empty() ? rqat_config_create(&cfg.p) : rqat_config_load(a.config.c_str(), &cfg.p));
    if (mode) check(rqat_config_set(cfg.p, (std::string("mode=") + mode).c_str()));
    for (const auto& s : a.sets) check(rqat_config_set(cfg.p, s.c_str()));
    if (!a.out.empty()) check(rqat_config_set(cfg.p, ("output_dir=" + a.out).c_str()));
    if (!a.init.empty()) check(rqat_config_set(cfg.p, ("init_checkpoint=" + a.init).c_str()));
    if (a.rate) check(rqat_config_set(cfg.p, ("fault_rate=" + exact(*a.rate)).c_str()));
    if (a.sigma) check(rqat_config_set(cfg.p, ("sigma_over_mu=" + exact(*a.sigma)).c_str()));
    if (a.seed) {
        const std::string key =
            std::string(mode ? mode : "") == "variability_finetune" ? "variability_seed=" : "fault_seed=";
        check(rqat_config_set(cfg.p, (key + std::to_string(*a.seed)).c_str()));
    }
    if (a.mapping_only) {
        check(rqat_config_set(cfg.p, "fault_aware_loss=false"));
        check(rqat_config_set(cfg.p, "snap_period=0"));
    }
    if (!mode) {
        Owned json;
        check(rqat_config_to_json(cfg.p, &json.p));
        const std::string text(json.p);
        if (text.find("\"mode\": \"fp\"") == std::string::npos && text.find("\"mode\": \"qat\"") == std::string::npos) {
            std::fprintf(stderr, "error: mode: train runs fp or qat; use finetune-fault / finetune-var\n");
            return RQAT_E_CONFIG;
        }
    }
    check(rqat_config_validate(cfg.p));
    rqat_run_result res{};
    check(rqat_run(cfg.p, a.resume ? 1 : 0, a.quiet ? nullptr : print_metric, nullptr, &res));
    std::printf("{\"final_accuracy\":%.17g,\"epochs\":%d}\n", res.final_accuracy, res.epochs);
    return 0;
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
    std::vector<const char*> out;
    for (const auto& s : v) out.push_back(s.c_str());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rqat: fault- and variability-aware quantization training"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rqat (C API v" + std::to_string(rqat_api_version()) + ")");

    RunArgs train_args, fault_args, var_args;
    auto* train = app.add_subcommand("train", "full-precision or quantization-aware training");
    add_run_options(train, train_args);

    auto* ffault = app.add_subcommand("finetune-fault", "fault-aware fine-tuning of a QAT checkpoint");
    add_run_options(ffault, fault_args);
    ffault->add_option("--init", fault_args.init, "QAT checkpoint to start from");
    ffault->add_option("--rate", fault_args.rate, "bit-fault rate per cell")->check(CLI::Range(0.0, 1.0));
    ffault->add_option("--seed", fault_args.seed, "fault sampling seed");
    ffault->add_flag("--mapping-only", fault_args.mapping_only,
                     "baseline: plain QAT loss, no snapping, nearest-valid mapping at the end");

    auto* fvar = app.add_subcommand("finetune-var", "variability-aware fine-tuning of a QAT checkpoint");
    add_run_options(fvar, var_args);
    fvar->add_option("--init", var_args.init, "QAT checkpoint to start from");
    fvar->add_option("--sigma", var_args.sigma, "device variability sigma/mu")->check(CLI::NonNegativeNumber);
    fvar->add_option("--seed", var_args.seed, "variability sampling seed");

    std::string ckpt_path, out_dir;
    std::vector<std::string> eval_sets;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint as deployed");
    eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("-s,--set", eval_sets, "dataset/eval override key=value");
    eval->add_option("-o,--out", out_dir, "write manifest.json into this directory");

    InjectArgs inj_args;
    std::string inject_out;
    auto* inj = app.add_subcommand("inject", "add faults/variability to a mapped checkpoint");
    inj->add_option("checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
    inj->add_option("-o,--out", inject_out, "output checkpoint file")->required();
    add_injection_options(inj, inj_args);

    InjectArgs sim_inj;
    std::string model = "digital";
    int acc_bits = 0;
    std::vector<std::string> sim_sets;
    auto* sim = app.add_subcommand("simulate-crossbar", "bit-sliced crossbar inference");
    sim->add_option("checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
    sim->add_option("--model", model, "array model")->check(CLI::IsMember({"digital", "analog"}));
    sim->add_option("--accumulator-bits", acc_bits, "saturating accumulator width (0 = exact)");
    sim->add_option("-s,--set", sim_sets, "dataset/eval override key=value");
    sim->add_option("-o,--out", out_dir, "write manifest.json into this directory");
    add_injection_options(sim, sim_inj);

    std::string sweep_dir, report_out;
    auto* report = app.add_subcommand("report", "tables and plots over a sweep directory");
    report->add_option("sweep", sweep_dir, "directory holding run manifests")->required();
    report->add_option("-o,--out", report_out, "output directory")->required();

    auto* info = app.add_subcommand("info", "print a checkpoint summary");
    info->add_option("checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return run_command(train_args, nullptr);
        if (*ffault) return run_command(fault_args, "fault_finetune");
        if (*fvar) return run_command(var_args, "variability_finetune");
        if (*eval || *inj || *sim || *info) {
            Ckpt ck;
            check(rqat_checkpoint_load(ckpt_path.c_str(), &ck.p));
            Owned out;
            if (*eval) {
                const auto sets = c_strings(eval_sets);
                check(rqat_evaluate(ck.p, sets.data(), sets.size(), out_dir.empty() ? nullptr : out_dir.c_str(),
                                    &out.p));
            } else if (*inj) {
                const rqat_injection i = to_injection(inj_args);
                check(rqat_checkpoint_inject(ck.p, &i));
                check(rqat_checkpoint_save(ck.p, inject_out.c_str()));
                check(rqat_checkpoint_info(ck.p, &out.p));
            } else if (*sim) {
                rqat_simulation_options o{};
                o.analog = model == "analog";
                o.accumulator_bits = acc_bits;
                o.injection = to_injection(sim_inj);
                const auto sets = c_strings(sim_sets);
                check(rqat_simulate(ck.p, &o, sets.data(), sets.size(), out_dir.empty() ? nullptr : out_dir.c_str(),
                                    &out.p));
            } else {
                check(rqat_checkpoint_info(ck.p, &out.p));
            }
            std::printf("%s\n", out.p);
            return 0;
        }
        if (*report) {
            Owned out;
            check(rqat_report(sweep_dir.c_str(), report_out.c_str(), &out.p));
            std::printf("%s\n", out.p);
            return 0;
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "error (%s): %s\n", rqat_status_name(f.status), rqat_last_error());
        return static_cast<int>(f.status);
    }
    return 0;
}
