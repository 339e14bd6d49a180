#include <doctest.h>

#include <cmath>
#include <random>

#include "lasp/encoder.hpp"
#include "test_util.hpp"

using namespace lasp;
using namespace lasp::testing;

namespace {

std::vector<double> affine(std::span<const double> x, const RealMatrix& w, const std::vector<double>& b) {
    std::vector<double> y(b);
    for (std::size_t j = 0; j < w.cols(); ++j)
        for (std::size_t i = 0; i < x.size(); ++i) y[j] += x[i] * w(i, j);
    return y;
}

std::vector<double> layer_norm(std::vector<double> x, const std::vector<double>& g, const std::vector<double>& b) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = g[i] * (x[i] - mean) / std::sqrt(var + 1e-5) + b[i];
    return x;
}

// One token attends only to itself, so attention returns its value projection.
std::vector<double> single_token_oracle(std::span<const double> x, const EncoderWeights& w) {
    const auto v = affine(x, w.wv, w.bv);
    auto a = affine(v, w.wo, w.bo);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
    const auto y1 = layer_norm(a, w.ln1_gamma, w.ln1_beta);
    auto h = affine(y1, w.w1, w.b1);
    for (double& t : h) t = 0.5 * t * (1.0 + std::erf(t / std::sqrt(2.0)));
    auto f = affine(h, w.w2, w.b2);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += y1[i];
    return layer_norm(f, w.ln2_gamma, w.ln2_beta);
}

}  // namespace

TEST_CASE("gelu reference values") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429));
    CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707));
}

TEST_CASE("weights validation") {
    CHECK_THROWS_AS((void)random_encoder_weights(30, 4, 64, 1), InvalidConfig);
    auto w = random_encoder_weights(8, 2, 16, 1);
    w.validate();
    w.b1.pop_back();
    CHECK_THROWS_AS(w.validate(), ShapeMismatch);
    auto ok = random_encoder_weights(8, 2, 16, 1);
    CHECK_THROWS_AS((void)encoder_forward(RealMatrix(3, 5), ok, 2, 4, AttentionMode::Dense), ShapeMismatch);
}

TEST_CASE("sparse encoder with k = n matches dense") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        const auto w = random_encoder_weights(32, 4, 128, seed);
        const auto x = gaussian(16, 32, rng);
        const auto dense = encoder_forward(x, w, 16, 4, AttentionMode::Dense);
        const auto sparse = encoder_forward(x, w, 16, 4, AttentionMode::Sparse);
        REQUIRE(max_abs_diff(dense, sparse) <= 1e-5 * max_abs(dense));
    }
}

TEST_CASE("single token encoder depends only on that token") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed + 100);
        const auto w = random_encoder_weights(16, 4, 32, seed);
        const auto x = gaussian(1, 16, rng);
        const auto oracle = single_token_oracle(x.row(0), w);
        for (auto mode : {AttentionMode::Dense, AttentionMode::Sparse}) {
            const auto y = encoder_forward(x, w, 1, 4, mode);
            for (std::size_t c = 0; c < 16; ++c) REQUIRE(y(0, c) == doctest::Approx(oracle[c]).epsilon(1e-10));
        }
    }
}

TEST_CASE("encoder output rows are layer-normalized and deterministic") {
    std::mt19937_64 rng(9);
    const auto w = random_encoder_weights(24, 3, 48, 9);
    const auto x = gaussian(10, 24, rng);
    const auto y = encoder_forward(x, w, 4, 4, AttentionMode::Sparse);
    CHECK(y == encoder_forward(x, w, 4, 4, AttentionMode::Sparse));
    for (std::size_t i = 0; i < 10; ++i) {
        double mean = 0.0;
        for (double v : y.row(i)) mean += v;
        CHECK(std::abs(mean / 24.0) <= 1e-9);
    }
}

TEST_CASE("dense encoder is permutation equivariant") {
    std::mt19937_64 rng(13);
    const auto w = random_encoder_weights(16, 2, 32, 13);
    const auto x = gaussian(6, 16, rng);
    const std::size_t perm[] = {3, 0, 5, 1, 4, 2};
    RealMatrix xp(6, 16);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 16; ++c) xp(i, c) = x(perm[i], c);
    const auto y = encoder_forward(x, w, 6, 4, AttentionMode::Dense);
    const auto yp = encoder_forward(xp, w, 6, 4, AttentionMode::Dense);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t c = 0; c < 16; ++c) CHECK(yp(i, c) == doctest::Approx(y(perm[i], c)).epsilon(1e-10));
}

TEST_CASE("encoder error shrinks as k grows") {
    // n = 16, hidden 32, 4 heads, 100 seeds; dense forward is the oracle.
    const std::size_t ks[] = {2, 4, 8, 16};
    const double frozen[] = {1.61647, 1.02199, 0.494739};
    double mean[4] = {};
    for (std::uint64_t t = 0; t < 100; ++t) {
        std::mt19937_64 rng(5000 + t);
        const auto w = random_encoder_weights(32, 4, 128, 5000 + t);
        const auto x = gaussian(16, 32, rng);
        const auto dense = encoder_forward(x, w, 16, 4, AttentionMode::Dense);
        for (int i = 0; i < 4; ++i)
            mean[i] += max_abs_diff(encoder_forward(x, w, ks[i], 4, AttentionMode::Sparse), dense) / 100.0;
    }
    for (int i = 0; i < 3; ++i) {
        CHECK(mean[i + 1] <= mean[i]);
        CHECK(mean[i] == doctest::Approx(frozen[i]).epsilon(1e-4));
    }
    CHECK(mean[3] <= 1e-9);
}
