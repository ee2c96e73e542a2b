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

#include <cstdint>
#include <random>
#include <vector>

#include "crossbar_check.hpp"
#include "rqat/crossbar.hpp"
#include "rqat/errors.hpp"
#include "rqat/trainkit.hpp"

using namespace rqat;

namespace {

CrossbarLayer two_by_one() {
    CrossbarLayer L;
    L.rows = 1;
    L.cols = 2;
    L.codes = {0b01, 0b11};
    L.params.bits = 2;
    L.params.multipliers = {0.5, 1.0};
    L.params.offset = 0.0;
    L.act = make_act_quantizer(2, 1.0);
    return L;
}

}  // namespace

TEST_CASE("hand example: planes fold into the final scaling") {
    const auto L = two_by_one();
    const auto sums = accumulate_planes(std::vector<std::int64_t>{2, 3}, L);
    CHECK(sums.planes == std::vector<std::int64_t>{5, 3});
    CHECK(sums.offset_column == 5);
    const auto y = bit_sliced_matvec(std::vector<double>{2.0, 3.0}, L);
    CHECK(y[0] == 5.5);
    CHECK(y[0] == 2.0 * 0.5 + 3.0 * 1.5);
}

TEST_CASE("zero input and zero codes") {
    auto L = two_by_one();
    L.params.offset = -0.25;
    CHECK(bit_sliced_matvec(std::vector<double>{0.0, 0.0}, L)[0] == 0.0);
    L.codes = {0, 0};
    L.act = make_act_quantizer(3, 0.5);
    // inputs quantize to codes 2 and 5
    CHECK(bit_sliced_matvec(std::vector<double>{1.0, 2.5}, L)[0] == doctest::Approx(0.5 * -0.25 * 7.0));
}

TEST_CASE("malformed layers are configuration errors") {
    auto L = two_by_one();
    L.codes = {0b01};
    CHECK_THROWS_AS(bit_sliced_matvec(std::vector<double>{1.0}, L), ConfigError);
    L = two_by_one();
    L.codes = {0b01, 0b111};
    CHECK_THROWS_AS(bit_sliced_matvec(std::vector<double>{1.0, 1.0}, L), ConfigError);
    L = two_by_one();
    L.variability = VariabilityMap::unit(2, 2);
    CHECK_THROWS_AS(bit_sliced_matvec(std::vector<double>{1.0, 1.0}, L), ConfigError);
    L.model = ArrayModel::analog;
    CHECK_NOTHROW(bit_sliced_matvec(std::vector<double>{1.0, 1.0}, L));
    L = two_by_one();
    L.faults = FaultMap::none(3, 2);
    CHECK_THROWS_AS(bit_sliced_matvec(std::vector<double>{1.0, 1.0}, L), ConfigError);
    L = two_by_one();
    CHECK_THROWS_AS(bit_sliced_matvec(std::vector<double>{1.0}, L), ShapeError);
}

TEST_CASE("bit-sliced output equals the dense product") {
    std::mt19937_64 rng(123);
    using crossbar_check::Injection;
    for (auto inj : {Injection::none, Injection::faults, Injection::variability, Injection::both}) {
        double worst = 0.0;
        for (int k = 0; k < 300; ++k) {
            const auto L = crossbar_check::sample_layer(rng, inj);
            worst = std::max(worst, crossbar_check::max_relative_error(L, crossbar_check::sample_input(rng, L)));
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("plane sums are exact integers") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 200; ++k) {
        const auto L = crossbar_check::sample_layer(rng, crossbar_check::Injection::faults);
        std::vector<std::int64_t> q(L.cols);
        for (auto& v : q) v = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(L.act.q_p + 1));
        const auto sums = accumulate_planes(q, L);
        const auto bits = static_cast<std::size_t>(L.params.bits);
        for (std::size_t o = 0; o < L.rows; ++o) {
            for (std::size_t j = 0; j < bits; ++j) {
                std::int64_t want = 0;
                for (std::size_t i = 0; i < L.cols; ++i) {
                    const std::size_t cell = o * L.cols + i;
                    const Code code = apply_faults(L.codes[cell], L.faults->stuck_at_0[cell], L.faults->stuck_at_1[cell]);
                    if ((code >> j) & 1u) want += q[i];
                }
                CHECK(sums.planes[o * bits + j] == want);
            }
        }
    }
}

TEST_CASE("batched form agrees with the vector form") {
    std::mt19937_64 rng(77);
    for (int k = 0; k < 100; ++k) {
        const auto inj = static_cast<crossbar_check::Injection>(k % 4);
        const auto L = crossbar_check::sample_layer(rng, inj);
        Matrix codes(5, static_cast<Eigen::Index>(L.cols));
        std::vector<std::vector<double>> xs;
        for (Eigen::Index b = 0; b < codes.rows(); ++b) {
            xs.push_back(crossbar_check::sample_input(rng, L));
            for (std::size_t i = 0; i < L.cols; ++i) codes(b, static_cast<Eigen::Index>(i)) = act_code(xs.back()[i], L.act);
        }
        const Matrix y = bit_sliced_matmul(codes, L.act.scale, L);
        for (Eigen::Index b = 0; b < codes.rows(); ++b) {
            const auto v = bit_sliced_matvec(xs[static_cast<std::size_t>(b)], L);
            for (std::size_t o = 0; o < L.rows; ++o)
                CHECK(y(b, static_cast<Eigen::Index>(o)) == doctest::Approx(v[o]).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("narrow accumulators saturate") {
    CrossbarLayer L;
    L.rows = 1;
    L.cols = 4;
    L.codes = {1, 1, 1, 1};
    L.params.bits = 1;
    L.params.multipliers = {1.0};
    L.act = make_act_quantizer(4, 1.0);
    const std::vector<std::int64_t> q{15, 15, 15, 15};
    CHECK(accumulate_planes(q, L).planes[0] == 60);
    CrossbarOptions narrow;
    narrow.accumulator_bits = 6;  // max 31
    CHECK(accumulate_planes(q, L, narrow).planes[0] == 31);
    CHECK(bit_sliced_matvec(std::vector<double>{15, 15, 15, 15}, L, narrow)[0] == 31.0);
    Matrix codes(1, 4);
    codes << 15, 15, 15, 15;
    CHECK(bit_sliced_matmul(codes, 1.0, L, narrow)(0, 0) == 31.0);
}

TEST_CASE("crossbar view of a layer requires stored codes") {
    MatmulLayer layer("fc", 3, 4);
    CHECK_THROWS_AS(crossbar_from_layer(layer, ArrayModel::digital), ConfigError);
    layer.quant.emplace();
    layer.quant->params = init_quantizer(layer.weights(), 3, true, QuantMode::non_uniform);
    layer.act.emplace();
    CHECK_THROWS_AS(crossbar_from_layer(layer, ArrayModel::digital), ConfigError);
    layer.quant->codes.assign(12, 1);
    const auto x = crossbar_from_layer(layer, ArrayModel::analog);
    CHECK(x.rows == 3);
    CHECK(x.cols == 4);
    CHECK(x.model == ArrayModel::analog);
}
