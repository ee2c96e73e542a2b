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
#include <random>
#include <vector>

#include "oracle.hpp"
#include "rqat/errors.hpp"
#include "rqat/quantizer.hpp"

using namespace rqat;

namespace {

QuantizerParams params_of(std::vector<double> r, double c, QuantMode mode = QuantMode::non_uniform) {
    QuantizerParams p;
    p.bits = mode == QuantMode::learned_scale ? p.bits : static_cast<int>(r.size());
    p.multipliers = std::move(r);
    p.offset = c;
    p.mode = mode;
    return p;
}

}  // namespace

TEST_CASE("two-bit level set enumerates all codes with midpoint thresholds") {
    const std::vector<double> r{0.5, 1.0};
    const auto L = build_levels(r, 0.0);
    CHECK(L.values == std::vector<double>{0.0, 0.5, 1.0, 1.5});
    CHECK(L.codes == std::vector<Code>{0b00, 0b01, 0b10, 0b11});
    CHECK(L.thresholds == std::vector<double>{0.25, 0.75, 1.25});
}

TEST_CASE("learned scale reduces to a uniform grid") {
    const double s = 0.3;
    auto p = params_of({s}, 0.0, QuantMode::learned_scale);
    p.bits = 2;
    const auto L = build_levels(p);
    REQUIRE(L.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(L.values[k] == doctest::Approx(s * static_cast<double>(k)).epsilon(1e-15));
    CHECK(p.effective_multipliers() == std::vector<double>{s, 2 * s});
}

TEST_CASE("single bit symmetric levels") {
    const std::vector<double> r{1.0};
    const auto L = build_levels(r, -0.5);
    CHECK(L.values == std::vector<double>{-0.5, 0.5});
    CHECK(L.thresholds == std::vector<double>{0.0});
}

TEST_CASE("negative multipliers are re-sorted") {
    const std::vector<double> r{-1.0, 0.25};
    const auto L = build_levels(r, 0.0);
    CHECK(L.values == std::vector<double>{-1.0, -0.75, 0.0, 0.25});
    CHECK(L.codes == std::vector<Code>{0b01, 0b11, 0b00, 0b10});
}

TEST_CASE("non-finite or malformed parameters are rejected") {
    CHECK_THROWS_AS(build_levels(params_of({0.5, NAN}, 0.0)), ParameterError);
    CHECK_THROWS_AS(build_levels(params_of({0.5, 1.0}, INFINITY)), ParameterError);
    auto p = params_of({0.5, 1.0}, 0.0);
    p.bits = 3;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = params_of({0.5}, 0.0, QuantMode::learned_scale);
    p.bits = 0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    CHECK_THROWS_AS(quant_mode_from_string("log"), ParameterError);
}

TEST_CASE("quantize picks the nearest level and breaks ties toward the smaller code") {
    const auto L = build_levels(std::vector<double>{0.5, 1.0}, 0.0);
    const std::vector<double> x{0.7, 0.25, 0.0, 0.5, 1.0, 1.5, -3.0, 9.0};
    const auto q = quantize(x, L);
    CHECK(q.values == std::vector<double>{0.5, 0.0, 0.0, 0.5, 1.0, 1.5, 0.0, 1.5});
    CHECK(q.codes[0] == 0b01);
    CHECK(q.codes[1] == 0b00);
}

TEST_CASE("duplicate levels resolve to the smaller code") {
    // codes 01 and 10 both give 1.0
    const auto L = build_levels(std::vector<double>{1.0, 1.0}, 0.0);
    const std::vector<double> x{1.0, 1.2, 0.9};
    const auto q = quantize(x, L);
    for (auto c : q.codes) CHECK(c == 0b01);
}

TEST_CASE("dequantize evaluates the inner product plus offset") {
    const auto p = params_of({0.5, 1.0}, 0.0);
    CHECK(dequantize_codes(std::vector<Code>{0b01}, p)[0] == 0.5);
    CHECK(dequantize_codes(std::vector<Code>{0b00}, params_of({0.5, 1.0}, 0.125))[0] == 0.125);
    CHECK(dequantize_codes(std::vector<Code>{0b11}, params_of({0.5, 1.0}, -1.0))[0] == 0.5);
    CHECK_THROWS_AS(dequantize_codes(std::vector<Code>{0b100}, p), ShapeError);
}

TEST_CASE("quantize then dequantize is the identity on level values") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 6;
        std::vector<double> r(static_cast<std::size_t>(n));
        for (auto& v : r) v = g(rng);
        const auto p = params_of(r, g(rng));
        const auto L = build_levels(p);
        const auto q = quantize(L.values, L);
        CHECK(q.values == L.values);
        CHECK(dequantize_codes(q.codes, p) == L.values);
    }
}

TEST_CASE("quantize matches exhaustive enumeration") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> nb(1, 6);
    int mismatches = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = nb(rng);
        std::vector<double> r(static_cast<std::size_t>(n));
        for (auto& v : r) v = g(rng);
        const double c = g(rng);
        const auto L = build_levels(r, c);
        std::vector<double> x(8);
        for (auto& v : x) v = 3.0 * g(rng);
        x[0] = L.thresholds.empty() ? x[0] : L.thresholds[static_cast<std::size_t>(trial) % L.thresholds.size()];
        const auto q = quantize(x, L);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto want = oracle::brute_nearest(r, c, x[i]);
            if (q.codes[i] != want.code || q.values[i] != want.value) ++mismatches;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("learned-scale quantization equals clipped rounding on the grid") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 6.0);
    for (int bits = 1; bits <= 5; ++bits) {
        auto p = params_of({0.37}, -0.4, QuantMode::learned_scale);
        p.bits = bits;
        const auto L = build_levels(p);
        const double top = std::ldexp(1.0, bits) - 1.0;
        for (int i = 0; i < 500; ++i) {
            const double x = u(rng);
            const double t = (x - p.offset) / 0.37;
            if (std::abs(t - std::floor(t) - 0.5) < 1e-9) continue;
            const double k = std::clamp(std::round(t), 0.0, top);
            const auto q = quantize(std::vector<double>{x}, L);
            CHECK(q.values[0] == doctest::Approx(p.offset + 0.37 * k).epsilon(1e-12));
            CHECK(q.codes[0] == static_cast<Code>(k));
        }
    }
}

TEST_CASE("output changes only across thresholds and is monotone") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 5;
        std::vector<double> r(static_cast<std::size_t>(n));
        for (auto& v : r) v = g(rng);
        const auto L = build_levels(r, g(rng));
        for (std::size_t i = 0; i < L.size(); ++i) {
            const double lo = i == 0 ? L.values[0] - 1.0 : L.thresholds[i - 1];
            const double hi = i + 1 == L.size() ? L.values.back() + 1.0 : L.thresholds[i];
            if (!(hi > lo)) continue;
            const double mid = lo + 0.5 * (hi - lo);
            CHECK(L.values[nearest_level(L, mid)] == L.values[i]);
        }
        std::vector<double> xs(400);
        for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = -6.0 + 12.0 * static_cast<double>(k) / 399.0;
        const auto q = quantize(xs, L);
        for (std::size_t k = 1; k < xs.size(); ++k) CHECK(q.values[k] >= q.values[k - 1]);
    }
}

TEST_CASE("initialization follows the learned-step convention") {
    const std::vector<double> w{0.1, -0.3, 0.2, -0.2};
    const double s = 2.0 * 0.2 / std::sqrt(7.0);
    const auto p = init_quantizer(w, 4, true, QuantMode::non_uniform);
    REQUIRE(p.multipliers.size() == 4);
    for (int j = 0; j < 4; ++j) CHECK(p.multipliers[static_cast<std::size_t>(j)] == doctest::Approx(s * std::ldexp(1.0, j)));
    CHECK(p.offset == doctest::Approx(-s * 7.5));
    const auto u = init_quantizer(w, 3, false, QuantMode::learned_scale);
    CHECK(u.multipliers.size() == 1);
    CHECK(u.multipliers[0] == doctest::Approx(2.0 * 0.2 / std::sqrt(7.0)));
    CHECK(u.offset == 0.0);
    // symmetric signed grid: levels are +-s/2, +-3s/2, ...
    const auto L = build_levels(p);
    CHECK(L.values.front() == doctest::Approx(-7.5 * s));
    CHECK(L.values.back() == doctest::Approx(7.5 * s));
}

TEST_CASE("positive level counts") {
    CHECK(positive_levels(4, true) == 7);
    CHECK(positive_levels(4, false) == 15);
    CHECK(positive_levels(1, true) == 0);
    CHECK(positive_levels(2, false) == 3);
    for (auto m : {QuantMode::fixed, QuantMode::learned_scale, QuantMode::non_uniform})
        CHECK(quant_mode_from_string(to_string(m)) == m);
}
