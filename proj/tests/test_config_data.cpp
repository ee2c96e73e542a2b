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

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>

#include "rqat/checkpoint.hpp"
#include "rqat/config.hpp"
#include "rqat/data.hpp"
#include "rqat/errors.hpp"
#include "rqat/trainkit.hpp"
#include "tmpdir.hpp"

using namespace rqat;
using json = nlohmann::json;

TEST_CASE("config survives a JSON round trip") {
    ExperimentConfig c;
    c.mode = RunMode::fault_finetune;
    c.widths = {3, 5, 7};
    c.data.train_size = 123;
    c.fault_rate = 0.125;
    c.lr_quant = 3e-7;
    c.array_model = ArrayModel::analog;
    c.init_checkpoint = "a/b.bin";
    c.seed = 18446744073709551615ULL;
    const std::string text = config_to_json(c);
    const auto back = config_from_json(text);
    CHECK(config_to_json(back) == text);
    CHECK(back.seed == c.seed);
    CHECK(back.widths == c.widths);
    CHECK(back.data.train_size == 123);
    CHECK(back.array_model == ArrayModel::analog);
}

TEST_CASE("every config key is named in the JSON form and missing keys keep defaults") {
    const auto j = json::parse(config_to_json(ExperimentConfig{}));
    const std::set<std::string> required{"mode", "arch", "widths", "dataset", "train_size", "eval_size", "bits",
                                         "quant_mode", "act_bits", "alpha_mode", "delta_factor", "lambda_init",
                                         "lambda_final", "ramp_epochs", "epochs", "snap_period", "lr_weights",
                                         "lr_quant", "momentum", "fault_rate", "fault_seed", "sigma_over_mu",
                                         "variability_seed", "seed", "output_dir", "snn_beta", "snn_v_th",
                                         "snn_v_reset", "surrogate_width", "array_model", "accumulator_bits"};
    for (const auto& k : required) CHECK_MESSAGE(j.contains(k), k);
    const auto partial = config_from_json(R"({"bits": 3})");
    CHECK(partial.bits == 3);
    CHECK(partial.lambda_init == 100.0);
    CHECK(partial.snap_period == 4);
}

TEST_CASE("unknown keys and wrong types are rejected with the key name") {
    try {
        config_from_json(R"({"lamda_init": 5})");
        FAIL("accepted an unknown key");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("lamda_init") != std::string::npos);
    }
    try {
        config_from_json(R"({"epochs": "many"})");
        FAIL("accepted a string for an integer");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("epochs") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(R"({"train_size": -4})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"mode": "train"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
}

TEST_CASE("overrides parse JSON values and keep strings as strings") {
    ExperimentConfig c;
    apply_override(c, "lr_weights=0.5");
    apply_override(c, "augment=false");
    apply_override(c, "widths=[1,2,3]");
    apply_override(c, "output_dir=123");
    apply_override(c, "array_model=analog");
    apply_override(c, "dataset=synthetic-events");
    apply_override(c, "mode=variability_finetune");
    CHECK(c.lr_weights == 0.5);
    CHECK_FALSE(c.augment);
    CHECK(c.widths == std::vector<std::size_t>{1, 2, 3});
    CHECK(c.output_dir == "123");
    CHECK(c.array_model == ArrayModel::analog);
    CHECK(c.data.id == "synthetic-events");
    CHECK(c.mode == RunMode::variability_finetune);
    CHECK_THROWS_AS(apply_override(c, "nosuchkey=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "epochs"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "epochs=1.5"), ConfigError);
}

TEST_CASE("validation names the offending field") {
    auto expect = [](const std::string& assignment, const std::string& key) {
        ExperimentConfig c;
        apply_override(c, assignment);
        try {
            c.validate();
            FAIL("accepted " << assignment);
        } catch (const Error& e) {
            CHECK_MESSAGE(std::string(e.what()).find(key) != std::string::npos, e.what());
        }
    };
    expect("bits=1", "bits");
    expect("sigma_over_mu=1.0", "sigma_over_mu");
    expect("fault_rate=1.5", "fault_rate");
    expect("widths=[4,4]", "widths");
    expect("arch=snn2", "arch");
    expect("dataset=synthetic-events", "arch");
    expect("momentum=1.0", "momentum");
    expect("accumulator_bits=1", "accumulator_bits");
    expect("lambda_final=50", "lambda_final");
    expect("dataset=imagenet", "dataset");
    expect("snn_beta=0", "snn_beta");
    ExperimentConfig ok;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config files load from disk") {
    testfs::TempDir dir("cfg");
    testfs::write_text(dir.path() / "run.json", R"({"epochs": 7, "bits": 3})");
    const auto c = load_config(dir.str("run.json"));
    CHECK(c.epochs == 7);
    CHECK(c.bits == 3);
    CHECK_THROWS_AS(load_config(dir.str("missing.json")), IoError);
}

TEST_CASE("run plans map config fields") {
    ExperimentConfig c;
    c.pretrain_epochs = 3;
    c.pretrain_lr = 0.05;
    c.epochs = 9;
    const auto fp = run_plan(c, RunMode::fp);
    CHECK(fp.epochs == 3);
    CHECK(fp.lr_weights == 0.05);
    const auto q = run_plan(c, RunMode::qat);
    CHECK(q.epochs == 9);
    CHECK(q.lr_weights == c.lr_weights);
    CHECK(q.lambda.ramp_epochs == c.ramp_epochs);
}

TEST_CASE("synthetic image splits are deterministic and crops stay 32x32") {
    DatasetSpec s;
    s.train_size = 40;
    s.eval_size = 30;
    const auto e1 = load_dataset(s, Split::eval);
    const auto e2 = load_dataset(s, Split::eval);
    std::vector<std::size_t> idx(30);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto b1 = e1->make_batch(idx, false, 0);
    const auto b2 = e2->make_batch(idx, false, 0);
    CHECK(b1.data == b2.data);
    CHECK(b1.labels == b2.labels);
    const auto train = load_dataset(s, Split::train);
    CHECK(train->size() == 40);
    std::vector<std::size_t> tidx(40);
    for (std::size_t i = 0; i < tidx.size(); ++i) tidx[i] = i;
    const auto aug = train->make_batch(tidx, true, 99);
    CHECK(aug.shape == std::vector<std::size_t>{40, 32, 32, 3});
    const auto plain = train->make_batch(tidx, false, 0);
    CHECK(aug.data != plain.data);
    CHECK(train->make_batch(tidx, true, 99).data == aug.data);
    std::set<int> labels(b1.labels.begin(), b1.labels.end());
    CHECK(labels.size() == 10);
}

TEST_CASE("synthetic event streams have ten binary frames") {
    DatasetSpec s;
    s.id = "synthetic-events";
    s.train_size = 20;
    s.eval_size = 20;
    const auto d = load_dataset(s, Split::eval);
    std::vector<std::size_t> idx{0, 1, 2, 3};
    const auto b = d->make_batch(idx, false, 0);
    CHECK(b.shape == std::vector<std::size_t>{10, 4, 64});
    for (double v : b.data) CHECK((v == 0.0 || v == 1.0));
    CHECK(d->make_batch(idx, false, 0).data == b.data);
}

TEST_CASE("directory datasets read CIFAR-style binary batches") {
    testfs::TempDir dir("data");
    {
        std::ofstream out(dir.path() / "test_batch.bin", std::ios::binary);
        for (int i = 0; i < 3; ++i) {
            out.put(static_cast<char>(i));
            for (int p = 0; p < 3072; ++p) out.put(static_cast<char>((p + i) & 0xff));
        }
    }
    DatasetSpec s;
    s.id = "dir:" + dir.str();
    s.eval_size = 10;
    const auto d = load_dataset(s, Split::eval);
    CHECK(d->size() == 3);
    CHECK(d->label(2) == 2);
    CHECK_THROWS_AS(load_dataset(s, Split::train), IngestError);
    s.id = "dir:" + dir.str("nope");
    CHECK_THROWS_AS(load_dataset(s, Split::eval), IngestError);
    s.id = "cifar10";
    s.data_dir = dir.str("absent");
    CHECK_THROWS_AS(load_dataset(s, Split::eval), IngestError);
    s.id = "mnist";
    CHECK_THROWS_AS(load_dataset(s, Split::eval), ConfigError);
}

namespace {

Checkpoint sample_checkpoint() {
    ArchSpec a;
    a.widths = {4, 4, 8};
    Checkpoint c;
    c.mode = RunMode::fault_finetune;
    c.phase = Phase::main;
    c.epochs_completed = 3;
    c.seed = 77;
    c.config_json = "{\"k\": 1}";
    c.metrics_jsonl = "{\"epoch\":0}\n";
    c.net = make_network(a, 5);
    RegistrationOptions o;
    o.bits = 3;
    register_layers(*c.net, o);
    auto layers = c.net->layers();
    layers[1]->quant->faults = sample_fault_map(layers[1]->weight_count(), 3, 0.2, 1);
    layers[2]->quant->variability = sample_variability_map(layers[2]->weight_count(), 3, 0.3, 2);
    layers[2]->act->calibrated = true;
    layers[2]->act->quantizer.scale = 0.37;
    layers[0]->mom_weight.setConstant(0.25);
    map_to_levels(*c.net);
    return c;
}

}  // namespace

TEST_CASE("checkpoint bytes are stable across save, load and save") {
    testfs::TempDir dir("ckpt");
    const auto c = sample_checkpoint();
    save_checkpoint(dir.str("a.bin"), c);
    const auto loaded = load_checkpoint(dir.str("a.bin"));
    save_checkpoint(dir.str("b.bin"), loaded);
    CHECK(testfs::read_bytes(dir.path() / "a.bin") == testfs::read_bytes(dir.path() / "b.bin"));
    CHECK(loaded.mode == RunMode::fault_finetune);
    CHECK(loaded.phase == Phase::main);
    CHECK(loaded.epochs_completed == 3);
    CHECK(loaded.seed == 77);
    CHECK(loaded.metrics_jsonl == c.metrics_jsonl);
    auto a = c.net->layers();
    auto b = loaded.net->layers();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->weight == b[i]->weight);
        CHECK(a[i]->mom_weight == b[i]->mom_weight);
        CHECK(a[i]->quant.has_value() == b[i]->quant.has_value());
        if (!a[i]->quant) continue;
        CHECK(a[i]->quant->codes == b[i]->quant->codes);
        CHECK(a[i]->quant->params.multipliers == b[i]->quant->params.multipliers);
        CHECK(a[i]->act->quantizer.scale == b[i]->act->quantizer.scale);
    }
    CHECK(b[1]->quant->faults->stuck_at_0 == a[1]->quant->faults->stuck_at_0);
    CHECK(b[1]->quant->faults->seed == 1);
    CHECK(b[2]->quant->variability->factors == a[2]->quant->variability->factors);
    CHECK(b[2]->quant->variability->sigma_over_mu == 0.3);
}

TEST_CASE("damaged checkpoints are ingest errors") {
    const auto bytes = serialize(sample_checkpoint());
    CHECK_NOTHROW(deserialize(bytes));
    for (std::size_t pos : {std::size_t{0}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] ^= 0x40;
        CHECK_THROWS_AS(deserialize(bad), IngestError);
    }
    for (std::size_t len : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() - 9}) {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(len));
        CHECK_THROWS_AS(deserialize(cut), IngestError);
    }
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.bin"), IngestError);
}
