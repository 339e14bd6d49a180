#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lasp/matrix.hpp"
#include "lasp/numerics.hpp"

namespace lasp {

struct AttentionProblem {
    RealMatrix q;
    RealMatrix k;
    RealMatrix v;
    std::optional<BoolMatrix> mask;  // n x n, nonzero = attend

    [[nodiscard]] std::size_t seq_len() const noexcept { return q.rows(); }
    [[nodiscard]] std::size_t head_dim() const noexcept { return q.cols(); }

    /// Throws ShapeMismatch or AllMaskedRow.
    void validate() const;
};

struct TopKSelection {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> rows;
};

struct OpCounts {
    std::uint64_t lowbit_macs = 0;
    std::uint64_t exact_macs = 0;
    std::uint64_t exp_evals = 0;

    OpCounts& operator+=(const OpCounts& o) noexcept {
        lowbit_macs += o.lowbit_macs;
        exact_macs += o.exact_macs;
        exp_evals += o.exp_evals;
        return *this;
    }
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

struct SparseAttentionOutput {
    RealMatrix z;
    TopKSelection selection;
    OpCounts op_counts;
};

enum class AttentionMode { Dense, Sparse };

/// softmax(Q K^T / sqrt(d) + mask) V, stabilized by row-max subtraction.
[[nodiscard]] RealMatrix dense_attention(const AttentionProblem& p);

/// Row-softmax matrix of the dense formula; exposed for oracles.
[[nodiscard]] RealMatrix dense_attention_weights(const AttentionProblem& p);

/// Indices of the min(k, #unmasked) largest scores, descending, ties by ascending
/// index. Bottom-up merge of sorted runs, each run truncated to k.
[[nodiscard]] std::vector<std::size_t> topk_select(std::span<const std::int64_t> scores, std::size_t k,
                                                   std::span<const unsigned char> mask_row = {});

/// Real-valued overload; same ordering contract.
[[nodiscard]] std::vector<std::size_t> topk_select(std::span<const double> scores, std::size_t k,
                                                   std::span<const unsigned char> mask_row = {});

/// e_j = exp(q . K_s[j] / sqrt(d)) or 0 for masked candidates. Scale, mask and
/// exp are applied on the last iteration of each dot-product loop.
[[nodiscard]] std::vector<double> fused_row_scores(std::span<const double> q_row,
                                                   std::span<const std::span<const double>> keys,
                                                   std::span<const unsigned char> masked = {});

/// Same contract computed as three separate passes (dot, scale, mask+exp).
[[nodiscard]] std::vector<double> unfused_row_scores(std::span<const double> q_row,
                                                     std::span<const std::span<const double>> keys,
                                                     std::span<const unsigned char> masked = {});

/// z = sum_j e_j V_s[j] / sum_j e_j.
[[nodiscard]] std::vector<double> weighted_value_sum(std::span<const double> e,
                                                     std::span<const std::span<const double>> values);

/// Quantized pre-selection of top-k keys per query row followed by exact
/// re-scoring and normalization over the selected candidates. k is clamped to n.
[[nodiscard]] SparseAttentionOutput sparse_attention(const AttentionProblem& p, std::size_t k, int bits);

/// Closed-form operation counts. Dense: exact 2 n^2 d, exp n^2. Sparse, with
/// k clamped to n: exact 2 n k d, low-bit n^2 d, exp n k.
[[nodiscard]] OpCounts count_ops(std::size_t n, std::size_t d, std::size_t k, int bits, AttentionMode mode);

/// Upper bound on |q.k - q^.k^| for query row q against the keys of K, where
/// q^ and k^ are the dequantized images under the two schemes (bits >= 2).
[[nodiscard]] double score_error_bound(std::span<const double> q_row, const QuantScheme& q_scheme,
                                       const RealMatrix& keys, const QuantScheme& k_scheme);

}  // namespace lasp
