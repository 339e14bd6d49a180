#include "lasp/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

namespace lasp {

namespace {

constexpr double kLayerNormEps = 1e-5;

RealMatrix linear(const RealMatrix& x, const RealMatrix& w, const std::vector<double>& b) {
    RealMatrix y(x.rows(), w.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t o = 0; o < w.cols(); ++o) y(i, o) = b[o];
        for (std::size_t t = 0; t < x.cols(); ++t) {
            const double xi = x(i, t);
            for (std::size_t o = 0; o < w.cols(); ++o) y(i, o) += xi * w(t, o);
        }
    }
    return y;
}

void add_layer_norm(RealMatrix& x, const RealMatrix& residual, const std::vector<double>& gamma,
                    const std::vector<double>& beta) {
    const std::size_t h = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        double mean = 0.0;
        for (std::size_t t = 0; t < h; ++t) {
            row[t] += residual(i, t);
            mean += row[t];
        }
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(h);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t t = 0; t < h; ++t) row[t] = (row[t] - mean) * inv * gamma[t] + beta[t];
    }
}

RealMatrix head_slice(const RealMatrix& m, std::size_t head, std::size_t dh) {
    RealMatrix out(m.rows(), dh);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t t = 0; t < dh; ++t) out(i, t) = m(i, head * dh + t);
    return out;
}

RealMatrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    RealMatrix m(rows, cols);
    for (double& x : m.flat()) x = dist(rng);
    return m;
}

}  // namespace

void EncoderWeights::validate() const {
    if (hidden == 0 || heads == 0 || ffn == 0) throw ShapeMismatch("encoder dimensions must be positive");
    if (hidden % heads != 0) {
        throw ShapeMismatch("hidden " + std::to_string(hidden) + " not divisible by heads " + std::to_string(heads));
    }
    auto square = [&](const RealMatrix& m) { return m.rows() == hidden && m.cols() == hidden; };
    if (!square(wq) || !square(wk) || !square(wv) || !square(wo)) throw ShapeMismatch("attention weights must be hidden x hidden");
    if (w1.rows() != hidden || w1.cols() != ffn || w2.rows() != ffn || w2.cols() != hidden) {
        throw ShapeMismatch("feed-forward weights have inconsistent shapes");
    }
    for (const auto* v : {&bq, &bk, &bv, &bo, &b2, &ln1_gamma, &ln1_beta, &ln2_gamma, &ln2_beta}) {
        if (v->size() != hidden) throw ShapeMismatch("bias/norm vectors must have length hidden");
    }
    if (b1.size() != ffn) throw ShapeMismatch("b1 must have length ffn");
}

EncoderWeights random_encoder_weights(std::size_t hidden, std::size_t heads, std::size_t ffn, std::uint64_t seed) {
    if (hidden == 0 || heads == 0 || ffn == 0 || hidden % heads != 0) {
        throw InvalidConfig("encoder needs positive dimensions with hidden divisible by heads");
    }
    std::mt19937_64 rng(seed);
    EncoderWeights w;
    w.hidden = hidden;
    w.heads = heads;
    w.ffn = ffn;
    const double s_h = 1.0 / std::sqrt(static_cast<double>(hidden));
    const double s_f = 1.0 / std::sqrt(static_cast<double>(ffn));
    w.wq = gaussian(hidden, hidden, s_h, rng);
    w.wk = gaussian(hidden, hidden, s_h, rng);
    w.wv = gaussian(hidden, hidden, s_h, rng);
    w.wo = gaussian(hidden, hidden, s_h, rng);
    w.w1 = gaussian(hidden, ffn, s_h, rng);
    w.w2 = gaussian(ffn, hidden, s_f, rng);
    w.bq.assign(hidden, 0.0);
    w.bk.assign(hidden, 0.0);
    w.bv.assign(hidden, 0.0);
    w.bo.assign(hidden, 0.0);
    w.b1.assign(ffn, 0.0);
    w.b2.assign(hidden, 0.0);
    w.ln1_gamma.assign(hidden, 1.0);
    w.ln2_gamma.assign(hidden, 1.0);
    w.ln1_beta.assign(hidden, 0.0);
    w.ln2_beta.assign(hidden, 0.0);
    return w;
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

RealMatrix encoder_forward(const RealMatrix& x, const EncoderWeights& w, std::size_t k, int bits,
                           AttentionMode mode) {
    w.validate();
    if (x.cols() != w.hidden || x.rows() == 0) throw ShapeMismatch("encoder input must be n x hidden with n >= 1");
    const std::size_t n = x.rows();
    const std::size_t dh = w.hidden / w.heads;

    const RealMatrix q = linear(x, w.wq, w.bq);
    const RealMatrix kk = linear(x, w.wk, w.bk);
    const RealMatrix v = linear(x, w.wv, w.bv);

    RealMatrix concat(n, w.hidden);
    for (std::size_t h = 0; h < w.heads; ++h) {
        AttentionProblem p{head_slice(q, h, dh), head_slice(kk, h, dh), head_slice(v, h, dh), std::nullopt};
        const RealMatrix z = mode == AttentionMode::Dense ? dense_attention(p) : sparse_attention(p, k, bits).z;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < dh; ++t) concat(i, h * dh + t) = z(i, t);
    }

    RealMatrix attn = linear(concat, w.wo, w.bo);
    add_layer_norm(attn, x, w.ln1_gamma, w.ln1_beta);

    RealMatrix hidden = linear(attn, w.w1, w.b1);
    for (double& e : hidden.flat()) e = gelu(e);
    RealMatrix out = linear(hidden, w.w2, w.b2);
    add_layer_norm(out, attn, w.ln2_gamma, w.ln2_beta);
    return out;
}

}  // namespace lasp
