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


#include <doctest.h>

#include <cmath>
#include <vector>

#include "rqat/errors.hpp"
#include "rqat/snn.hpp"
#include "rqat/trainkit.hpp"
#include "toy_data.hpp"

using namespace rqat;

namespace {

RunPlan toy_plan(RunMode mode, int epochs) {
    RunPlan p;
    p.mode = mode;
    p.epochs = epochs;
    p.lr_weights = 0.02;
    p.lambda.ramp_epochs = std::max(1, epochs / 2);
    p.batch_size = 32;
    p.eval_batch_size = 100;
    p.seed = 5;
    p.augment = false;
    return p;
}

// Pretrained and registered 5-layer MLP.
std::unique_ptr<Network> pretrained(const toy::Blobs& train, const toy::Blobs& eval) {
    auto net = make_network(toy::mlp_spec(16, 4), 2);
    run(toy_plan(RunMode::fp, 4), *net, train, eval);
    register_layers(*net, RegistrationOptions{});
    return net;
}

double unscaled_qat_loss(Network& net) {
    double total = 0.0;
    for (auto* l : net.layers()) {
        if (!l->quant) continue;
        total += qat_loss(l->weights(), build_levels(l->quant->params), l->quant->scale, 1.0).loss;
    }
    return total;
}

void attach_faults(Network& net, double rate, std::uint64_t seed) {
    for (auto* l : net.layers())
        if (l->quant) l->quant->faults = sample_fault_map(l->weight_count(), l->quant->params.bits, rate, seed++);
}

}  // namespace

TEST_CASE("lambda schedule endpoints and interior") {
    const LambdaSchedule s{100.0, 2000.0, 200, 20};
    CHECK(lambda_at(s, 0) == 100.0);
    CHECK(lambda_at(s, 199) == 2000.0);
    CHECK(lambda_at(s, 180) == 100.0);
    CHECK(lambda_at(s, 189) == doctest::Approx(100.0 * std::pow(20.0, 9.0 / 19.0)));
    CHECK(lambda_at(s, 189) == doctest::Approx(413.3).epsilon(1e-3));
    CHECK_THROWS_AS(lambda_at(s, 200), ParameterError);
    CHECK_THROWS_AS(lambda_at(s, -1), ParameterError);
    CHECK_THROWS_AS(lambda_at(LambdaSchedule{100.0, 2000.0, 10, 0}, 0), ParameterError);
    CHECK_THROWS_AS(lambda_at(LambdaSchedule{100.0, 2000.0, 10, 11}, 0), ParameterError);
    CHECK_THROWS_AS(lambda_at(LambdaSchedule{0.0, 2000.0, 10, 5}, 0), ParameterError);
}

TEST_CASE("lambda schedule is monotone and exact at both ends for all shapes") {
    for (int E = 1; E <= 40; ++E) {
        for (int R = 1; R <= E; ++R) {
            const LambdaSchedule s{100.0, 2000.0, E, R};
            double prev = 0.0;
            for (int e = 0; e < E; ++e) {
                const double v = lambda_at(s, e);
                CHECK(v >= prev);
                prev = v;
            }
            CHECK(lambda_at(s, E - 1) == 2000.0);
            if (E > 1 && R < E) CHECK(lambda_at(s, 0) == 100.0);
        }
    }
}

TEST_CASE("fine-tune modes ramp over the final half") {
    RunPlan p;
    p.epochs = 20;
    p.lambda.ramp_epochs = 3;
    p.mode = RunMode::qat;
    CHECK(effective_schedule(p).ramp_epochs == 3);
    p.mode = RunMode::fault_finetune;
    CHECK(effective_schedule(p).ramp_epochs == 10);
    p.mode = RunMode::variability_finetune;
    p.epochs = 1;
    CHECK(effective_schedule(p).ramp_epochs == 1);
    CHECK(effective_schedule(p).total_epochs == 1);
}

TEST_CASE("registration exempts the first and last layers") {
    auto mlp = make_network(toy::mlp_spec(16, 4), 1);
    const auto reg = register_layers(*mlp, RegistrationOptions{});
    CHECK(reg.quantized == std::vector<std::size_t>{1, 2, 3});
    CHECK_FALSE(reg.all_exempt);
    REQUIRE(reg.scales.size() == 3);
    CHECK(reg.scales[0].count == 24 * 24);
    CHECK(reg.scales[0].q_p == 7);
    auto layers = mlp->layers();
    CHECK_FALSE(layers.front()->quant);
    CHECK_FALSE(layers.back()->quant);
    CHECK(layers[2]->act);

    ArchSpec snn;
    snn.kind = ArchKind::snn2;
    snn.features = 8;
    snn.widths = {6};
    auto two = make_network(snn, 1);
    const auto none = register_layers(*two, RegistrationOptions{});
    CHECK(none.quantized.empty());
    CHECK(none.all_exempt);

    ArchSpec cnn;
    cnn.widths = {4, 4, 8};
    auto conv = make_network(cnn, 1);
    const auto cr = register_layers(*conv, RegistrationOptions{});
    CHECK(cr.quantized == std::vector<std::size_t>{1, 2});
    CHECK(conv->layers()[1]->name == "conv2");
    CHECK(conv->layers()[2]->name == "fc1");
}

TEST_CASE("zero epochs maps the input model onto its levels") {
    const toy::Blobs train(256, 16, 4, 0.8, 1), eval(128, 16, 4, 0.8, 2);
    auto net = pretrained(train, eval);
    auto ref = net->clone();
    const auto res = run(toy_plan(RunMode::qat, 0), *net, train, eval);
    CHECK(res.log.empty());
    map_to_levels(*ref);
    auto a = net->layers();
    auto b = ref->layers();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->weight == b[i]->weight);
        if (a[i]->quant) CHECK(a[i]->quant->codes == b[i]->quant->codes);
    }
    CHECK(res.final_accuracy == evaluate_deployed(*ref, eval));
}

TEST_CASE("qat drives the regularizer below one percent of its start") {
    const toy::Blobs train(512, 16, 4, 0.8, 1), eval(256, 16, 4, 0.8, 2);
    auto net = pretrained(train, eval);
    const double initial = unscaled_qat_loss(*net);
    auto plan = toy_plan(RunMode::qat, 12);
    plan.lr_weights = 0.01;
    plan.lambda.ramp_epochs = 6;
    const auto res = run(plan, *net, train, eval);
    const auto& last = res.log.back();
    const double final_unscaled = last.reg_loss / last.lambda;
    MESSAGE("initial " << initial << " final " << final_unscaled);
    CHECK(final_unscaled < 0.01 * initial);
}

TEST_CASE("distance to levels shrinks over the ramp") {
    const toy::Blobs train(512, 16, 4, 0.8, 1), eval(256, 16, 4, 0.8, 2);
    auto net = pretrained(train, eval);
    auto plan = toy_plan(RunMode::qat, 12);
    plan.lr_weights = 0.01;
    plan.lambda.ramp_epochs = 6;
    const auto res = run(plan, *net, train, eval);
    const std::size_t ramp_start = res.log.size() - 6;
    for (std::size_t e = ramp_start + 1; e < res.log.size(); ++e)
        CHECK(res.log[e].mean_distance <= 1.05 * res.log[e - 1].mean_distance);
    CHECK(res.log.back().mean_distance < res.log[ramp_start].mean_distance);
}

TEST_CASE("fault fine-tuning with no faults follows the qat trajectory") {
    const toy::Blobs train(256, 16, 4, 0.8, 1), eval(128, 16, 4, 0.8, 2);
    auto base = pretrained(train, eval);
    auto a = base->clone();
    auto b = base->clone();
    attach_faults(*a, 0.0, 3);
    auto qp = toy_plan(RunMode::qat, 4);
    auto fp = toy_plan(RunMode::fault_finetune, 4);
    qp.lambda.ramp_epochs = 2;
    const auto ra = run(fp, *a, train, eval);
    const auto rb = run(qp, *b, train, eval);
    REQUIRE(ra.log.size() == rb.log.size());
    for (std::size_t e = 0; e < ra.log.size(); ++e) {
        CHECK(ra.log[e].lambda == rb.log[e].lambda);
        CHECK(ra.log[e].task_loss == rb.log[e].task_loss);
        CHECK(ra.log[e].reg_loss == rb.log[e].reg_loss);
        CHECK(ra.log[e].eval_accuracy == rb.log[e].eval_accuracy);
    }
    for (std::size_t i = 0; i < a->layers().size(); ++i) CHECK(a->layers()[i]->weight == b->layers()[i]->weight);
}

TEST_CASE("injection modes require their maps") {
    const toy::Blobs train(64, 16, 4, 0.8, 1), eval(64, 16, 4, 0.8, 2);
    auto net = make_network(toy::mlp_spec(16, 4), 2);
    register_layers(*net, RegistrationOptions{});
    CHECK_THROWS_AS(run(toy_plan(RunMode::fault_finetune, 1), *net, train, eval), ConfigError);
    CHECK_THROWS_AS(run(toy_plan(RunMode::variability_finetune, 1), *net, train, eval), ConfigError);
}

TEST_CASE("snapping zeroes the fault-aware penalty of affected weights") {
    auto net = make_network(toy::mlp_spec(16, 4), 2);
    register_layers(*net, RegistrationOptions{});
    attach_faults(*net, 0.3, 11);
    snap_faulty_weights(*net);
    for (auto* l : net->layers()) {
        if (!l->quant) continue;
        const auto levels = build_levels(l->quant->params);
        const auto valid = validity_from_faults(*l->quant->faults, levels);
        const double delta = default_delta(levels);
        const auto t = fault_aware_loss(l->weights(), levels, valid, l->quant->scale, 1.0, delta);
        for (std::size_t i = 0; i < l->weight_count(); ++i)
            if (l->quant->faults->stuck_mask(i) != 0) CHECK(t.grad_weights[i] == 0.0);
        double affected = 0.0;
        for (std::size_t i = 0; i < l->weight_count(); ++i) {
            if (l->quant->faults->stuck_mask(i) == 0) continue;
            const std::size_t k = nearest_valid_level(levels, valid.row(i), l->weights()[i]);
            affected += std::pow(l->weights()[i] - levels.values[k], 2.0);
        }
        CHECK(affected == 0.0);
    }
}

TEST_CASE("identical seeds give identical logs") {
    const toy::Blobs train(256, 16, 4, 0.8, 1), eval(128, 16, 4, 0.8, 2);
    auto base = pretrained(train, eval);
    auto a = base->clone();
    auto b = base->clone();
    auto c = base->clone();
    const auto plan = toy_plan(RunMode::qat, 3);
    const auto ra = run(plan, *a, train, eval);
    const auto rb = run(plan, *b, train, eval);
    auto other = plan;
    other.seed = 6;
    const auto rc = run(other, *c, train, eval);
    bool differs = false;
    for (std::size_t e = 0; e < ra.log.size(); ++e) {
        CHECK(ra.log[e].task_loss == rb.log[e].task_loss);
        CHECK(ra.log[e].reg_loss == rb.log[e].reg_loss);
        CHECK(ra.log[e].mean_distance == rb.log[e].mean_distance);
        differs |= ra.log[e].task_loss != rc.log[e].task_loss;
    }
    CHECK(differs);
    CHECK(ra.final_accuracy == rb.final_accuracy);
}

TEST_CASE("stored codes reproduce the deployed weights") {
    const toy::Blobs train(256, 16, 4, 0.8, 1), eval(128, 16, 4, 0.8, 2);
    auto net = pretrained(train, eval);
    for (auto* l : net->layers())
        if (l->quant)
            l->quant->variability = sample_variability_map(l->weight_count(), l->quant->params.bits, 0.2, 4);
    const auto res = run(toy_plan(RunMode::variability_finetune, 2), *net, train, eval);
    auto d = deployed(*net);
    for (std::size_t i = 0; i < net->layers().size(); ++i)
        CHECK(d->layers()[i]->weight == net->layers()[i]->weight);
    CHECK(evaluate(*d, eval) == res.final_accuracy);
    CHECK(evaluate_deployed(*net, eval) == res.final_accuracy);
}

TEST_CASE("full-precision runs leave quantizers untouched") {
    const toy::Blobs train(256, 16, 4, 0.8, 1), eval(128, 16, 4, 0.8, 2);
    auto net = make_network(toy::mlp_spec(16, 4), 2);
    const auto res = run(toy_plan(RunMode::fp, 3), *net, train, eval);
    for (const auto& r : res.log) CHECK(r.lambda == 0.0);
    CHECK(res.final_accuracy > 0.5);
    for (auto* l : net->layers()) CHECK_FALSE(l->quant);
}

TEST_CASE("run plan validation") {
    RunPlan p;
    p.epochs = -1;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = RunPlan{};
    p.momentum = 1.0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = RunPlan{};
    p.snap_period = -2;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = RunPlan{};
    p.lambda.lambda_init = -1.0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    CHECK(run_mode_from_string(to_string(RunMode::variability_finetune)) == RunMode::variability_finetune);
    CHECK_THROWS_AS(run_mode_from_string("train"), ConfigError);
}
