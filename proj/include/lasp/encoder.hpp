#pragma once

#include <cstdint>
#include <vector>

#include "lasp/attention.hpp"

namespace lasp {

/// Weights of one post-norm transformer encoder layer. Linear maps act on row
/// vectors: y = x W + b.
struct EncoderWeights {
    std::size_t hidden = 0;
    std::size_t heads = 0;
    std::size_t ffn = 0;

    RealMatrix wq, wk, wv, wo;  // hidden x hidden
    std::vector<double> bq, bk, bv, bo;
    RealMatrix w1;  // hidden x ffn
    std::vector<double> b1;
    RealMatrix w2;  // ffn x hidden
    std::vector<double> b2;
    std::vector<double> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    void validate() const;
};

/// Gaussian weights with std 1/sqrt(fan_in), unit gammas and zero betas.
[[nodiscard]] EncoderWeights random_encoder_weights(std::size_t hidden, std::size_t heads, std::size_t ffn,
                                                    std::uint64_t seed);

/// Exact erf-based GELU.
[[nodiscard]] double gelu(double x) noexcept;

/// Multi-head attention, add & layer-norm, GELU feed-forward, add & layer-norm.
[[nodiscard]] RealMatrix encoder_forward(const RealMatrix& x, const EncoderWeights& w, std::size_t k, int bits,
                                         AttentionMode mode);

}  // namespace lasp
