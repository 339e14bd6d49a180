#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lasp/numerics.hpp"

using namespace lasp;

namespace {

ScoreMatrix direct_matmul(const QuantMatrix& a, const QuantMatrix& b) {
    ScoreMatrix s(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            std::int64_t acc = 0;
            for (std::size_t t = 0; t < a.cols(); ++t) acc += std::int64_t{a(i, t)} * b(j, t);
            s(i, j) = acc;
        }
    return s;
}

QuantizedMatrix random_quantized(std::size_t rows, std::size_t cols, int bits, std::mt19937_64& rng) {
    QuantScheme scheme{bits, 1.0};
    std::uniform_int_distribution<int> dist(scheme.min_code(), scheme.max_code());
    QuantizedMatrix m{QuantMatrix(rows, cols), scheme};
    for (auto& v : m.values.flat()) {
        v = dist(rng);
        if (bits == 1 && v == 0) v = 1;
    }
    return m;
}

}  // namespace

TEST_CASE("compute_scale is the max-abs entry") {
    CHECK(compute_scale(RealMatrix{{0.1, -0.77}, {0.5, 0.2}}) == doctest::Approx(0.77));
    CHECK(compute_scale(RealMatrix(3, 3, 0.0)) == 0.0);
    CHECK(compute_scale(RealMatrix{{-2.5, 1.0}}) == 2.5);
}

TEST_CASE("compute_scale rejects empty and non-finite input") {
    CHECK_THROWS_AS((void)compute_scale(RealMatrix()), EmptyMatrix);
    CHECK_THROWS_AS((void)compute_scale(RealMatrix{{1.0, std::numeric_limits<double>::quiet_NaN()}}), NonFinite);
    CHECK_THROWS_AS((void)compute_scale(RealMatrix{{std::numeric_limits<double>::infinity()}}), NonFinite);
}

TEST_CASE("quantize follows the symmetric rounding rule") {
    const RealMatrix k{{0.77, 0.0, -0.77, 0.11}};
    const auto q = quantize(k, 4);
    CHECK(q.scheme.scale == doctest::Approx(0.77));
    CHECK(q.values(0, 0) == 7);
    CHECK(q.values(0, 1) == 0);
    CHECK(q.values(0, 2) == -7);
    CHECK(q.values(0, 3) == 1);  // 7 / 0.77 * 0.11 = 1.0

    SUBCASE("ties round away from zero") {
        // scale 7 with 4 bits: factor exactly 1.
        const auto t = quantize(RealMatrix{{7.0, 2.5, -2.5, 0.5, -0.5}}, 4);
        CHECK(t.values(0, 1) == 3);
        CHECK(t.values(0, 2) == -3);
        CHECK(t.values(0, 3) == 1);
        CHECK(t.values(0, 4) == -1);
    }
    SUBCASE("one bit is the sign with sign(0) = +1") {
        const auto s = quantize(RealMatrix{{-0.3, 0.0, 2.0}}, 1);
        CHECK(s.values(0, 0) == -1);
        CHECK(s.values(0, 1) == 1);
        CHECK(s.values(0, 2) == 1);
    }
    SUBCASE("all-zero tensor quantizes to zeros") {
        const auto z = quantize(RealMatrix(2, 2, 0.0), 8);
        for (auto v : z.values.flat()) CHECK(v == 0);
    }
    CHECK_THROWS_AS((void)quantize(k, 3), UnsupportedBits);
    CHECK_THROWS_AS((void)quantize(k, 16), UnsupportedBits);
}

TEST_CASE("quantized values stay in the codomain, keep the shape and preserve order") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int bits : {1, 2, 4, 8}) {
        RealMatrix m(9, 7);
        for (double& x : m.flat()) x = normal(rng);
        const auto q = quantize(m, bits);
        CHECK(q.rows() == 9);
        CHECK(q.cols() == 7);
        for (auto v : q.values.flat()) CHECK(q.scheme.in_codomain(v));
    }
    // Monotonicity under a fixed scheme.
    for (int bits : {2, 4, 8}) {
        const QuantScheme scheme{bits, 3.0};
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int trial = 0; trial < 2000; ++trial) {
            double x = u(rng);
            double y = u(rng);
            if (x > y) std::swap(x, y);
            CHECK(quantize_value(x, scheme) <= quantize_value(y, scheme));
        }
    }
}

TEST_CASE("dequantization error is bounded by half a step") {
    std::mt19937_64 rng(5);
    for (int bits : {2, 4, 8}) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        RealMatrix m(16, 16);
        for (double& x : m.flat()) x = u(rng) * 0.9;
        const auto q = quantize(m, bits);
        const double bound = q.scheme.roundtrip_bound();
        CHECK(bound == doctest::Approx(q.scheme.scale / (2.0 * q.scheme.max_level())));
        for (std::size_t i = 0; i < m.flat().size(); ++i) {
            CHECK(std::abs(m.flat()[i] - q.scheme.step() * q.values.flat()[i]) <= bound * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("product table sizes and entries") {
    const auto lut4 = build_product_lut(4);
    CHECK(lut4.size() == 256);
    CHECK(lut4.product(7, 7) == 49);
    CHECK(lut4.product(-8, 7) == -56);

    const auto lut1 = build_product_lut(1);
    CHECK(lut1.size() == 4);
    CHECK(lut1.product(-1, 1) == -1);
    CHECK(lut1.product(-1, -1) == 1);

    CHECK(build_product_lut(8).size() == 65536);
    CHECK(build_product_lut(2).size() == 16);

    for (int bits : {2, 4, 8}) {
        const auto lut = build_product_lut(bits);
        for (int c = lut.lo(); c <= lut.hi(); ++c) CHECK(lut.product(0, c) == 0);
    }
    CHECK_THROWS_AS((void)build_product_lut(5), UnsupportedBits);
}

TEST_CASE("approx_scores hand examples") {
    const QuantScheme s4{4, 1.0};
    {
        QuantizedMatrix q{QuantMatrix{{1}}, s4};
        QuantizedMatrix k{QuantMatrix{{1}}, s4};
        CHECK(approx_scores(q, k, build_product_lut(4)) == ScoreMatrix{{1}});
    }
    {
        const QuantScheme s1{1, 1.0};
        QuantizedMatrix q{QuantMatrix{{1, -1}}, s1};
        QuantizedMatrix k{QuantMatrix{{1, 1}, {1, -1}}, s1};
        CHECK(approx_scores(q, k, build_product_lut(1)) == ScoreMatrix{{0, 2}});
    }
}

TEST_CASE("approx_scores errors") {
    const QuantScheme s4{4, 1.0};
    QuantizedMatrix q{QuantMatrix(2, 3), s4};
    QuantizedMatrix k{QuantMatrix(2, 4), s4};
    CHECK_THROWS_AS((void)approx_scores(q, k, build_product_lut(4)), ShapeMismatch);
    QuantizedMatrix k2{QuantMatrix(2, 3), QuantScheme{2, 1.0}};
    CHECK_THROWS_AS((void)approx_scores(q, k2, build_product_lut(4)), SchemeMismatch);
    CHECK_THROWS_AS((void)approx_scores(q, q, build_product_lut(8)), SchemeMismatch);
}

TEST_CASE("approx_scores is bit-exact against a direct integer matmul") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 12);
    int trials = 0;
    for (int bits : {1, 2, 4, 8}) {
        const auto lut = build_product_lut(bits);
        for (int t = 0; t < 300; ++t, ++trials) {
            const std::size_t n = bits == 4 && t == 0 ? 8 : static_cast<std::size_t>(dim(rng));
            const std::size_t m = bits == 4 && t == 0 ? 8 : static_cast<std::size_t>(dim(rng));
            const std::size_t d = bits == 4 && t == 0 ? 8 : static_cast<std::size_t>(dim(rng));
            const auto q = random_quantized(n, d, bits, rng);
            const auto k = random_quantized(m, d, bits, rng);
            REQUIRE(approx_scores(q, k, lut) == direct_matmul(q.values, k.values));
        }
    }
    CHECK(trials >= 1000);
}
