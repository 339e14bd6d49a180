#include "lasp/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lasp {

void AttentionProblem::validate() const {
    const std::size_t n = q.rows();
    const std::size_t d = q.cols();
    if (n == 0 || d == 0) throw ShapeMismatch("attention problem needs n >= 1 and d >= 1");
    if (k.rows() != n || k.cols() != d || v.rows() != n || v.cols() != d) {
        throw ShapeMismatch("Q, K and V must share shape " + std::to_string(n) + "x" + std::to_string(d));
    }
    if (!mask) return;
    if (mask->rows() != n || mask->cols() != n) throw ShapeMismatch("mask must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
        auto row = mask->row(i);
        if (std::none_of(row.begin(), row.end(), [](unsigned char m) { return m != 0; })) {
            throw AllMaskedRow("mask row " + std::to_string(i) + " has no attendable position");
        }
    }
}

namespace {

bool attendable(std::span<const unsigned char> mask_row, std::size_t j) {
    return mask_row.empty() || mask_row[j] != 0;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * b[t];
    return acc;
}

template <typename Score>
struct Ranked {
    Score value;
    std::size_t index;
};

// Merge two descending runs, keeping at most k entries. On equal scores the
// left run wins; left indices are always smaller, so ties resolve by index.
template <typename Score>
std::vector<Ranked<Score>> merge_runs(const std::vector<Ranked<Score>>& left,
                                      const std::vector<Ranked<Score>>& right, std::size_t k) {
    std::vector<Ranked<Score>> out;
    out.reserve(std::min(k, left.size() + right.size()));
    std::size_t i = 0;
    std::size_t j = 0;
    while (out.size() < k && (i < left.size() || j < right.size())) {
        if (j >= right.size() || (i < left.size() && !(right[j].value > left[i].value))) {
            out.push_back(left[i++]);
        } else {
            out.push_back(right[j++]);
        }
    }
    return out;
}

template <typename Score>
std::vector<std::size_t> merge_topk(std::span<const Score> scores, std::size_t k,
                                    std::span<const unsigned char> mask_row) {
    if (k == 0) throw InvalidConfig("topk_select: k must be >= 1");
    if (!mask_row.empty() && mask_row.size() != scores.size()) {
        throw ShapeMismatch("topk_select: mask row length differs from score row length");
    }
    std::vector<std::vector<Ranked<Score>>> runs;
    runs.reserve(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (attendable(mask_row, j)) runs.push_back({{scores[j], j}});
    }
    while (runs.size() > 1) {
        std::vector<std::vector<Ranked<Score>>> next;
        next.reserve((runs.size() + 1) / 2);
        for (std::size_t r = 0; r + 1 < runs.size(); r += 2) next.push_back(merge_runs(runs[r], runs[r + 1], k));
        if (runs.size() % 2 == 1) next.push_back(std::move(runs.back()));
        runs = std::move(next);
    }
    std::vector<std::size_t> out;
    if (runs.empty()) return out;
    const std::size_t take = std::min(k, runs.front().size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(runs.front()[i].index);
    return out;
}

void check_keys(std::span<const double> q_row, std::span<const std::span<const double>> keys,
                std::span<const unsigned char> masked) {
    if (keys.empty()) throw EmptyCandidateSet("row scoring needs at least one candidate");
    if (q_row.empty()) throw ShapeMismatch("query row must have d >= 1");
    if (!masked.empty() && masked.size() != keys.size()) {
        throw ShapeMismatch("masked flags must have one entry per candidate");
    }
    for (const auto& key : keys) {
        if (key.size() != q_row.size()) throw ShapeMismatch("candidate key length differs from query length");
    }
}

}  // namespace

RealMatrix dense_attention_weights(const AttentionProblem& p) {
    p.validate();
    const std::size_t n = p.seq_len();
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.head_dim()));
    RealMatrix w(n, n);
    std::span<const unsigned char> no_mask;
    for (std::size_t i = 0; i < n; ++i) {
        auto mask_row = p.mask ? p.mask->row(i) : no_mask;
        double row_max = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            if (!attendable(mask_row, j)) continue;
            w(i, j) = dot(p.q.row(i), p.k.row(j)) * scale;
            row_max = std::max(row_max, w(i, j));
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            w(i, j) = attendable(mask_row, j) ? std::exp(w(i, j) - row_max) : 0.0;
            sum += w(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) w(i, j) /= sum;
    }
    return w;
}

RealMatrix dense_attention(const AttentionProblem& p) {
    const RealMatrix w = dense_attention_weights(p);
    const std::size_t n = p.seq_len();
    const std::size_t d = p.head_dim();
    RealMatrix z(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double wij = w(i, j);
            if (wij == 0.0) continue;
            for (std::size_t t = 0; t < d; ++t) z(i, t) += wij * p.v(j, t);
        }
    return z;
}

std::vector<std::size_t> topk_select(std::span<const std::int64_t> scores, std::size_t k,
                                     std::span<const unsigned char> mask_row) {
    return merge_topk(scores, k, mask_row);
}

std::vector<std::size_t> topk_select(std::span<const double> scores, std::size_t k,
                                     std::span<const unsigned char> mask_row) {
    return merge_topk(scores, k, mask_row);
}

std::vector<double> fused_row_scores(std::span<const double> q_row, std::span<const std::span<const double>> keys,
                                     std::span<const unsigned char> masked) {
    check_keys(q_row, keys, masked);
    const std::size_t d = q_row.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> e(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            acc += q_row[t] * keys[j][t];
            if (t + 1 == d) {
                const bool is_masked = !masked.empty() && masked[j] != 0;
                e[j] = is_masked ? 0.0 : std::exp(acc * scale);
            }
        }
    }
    return e;
}

std::vector<double> unfused_row_scores(std::span<const double> q_row,
                                       std::span<const std::span<const double>> keys,
                                       std::span<const unsigned char> masked) {
    check_keys(q_row, keys, masked);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q_row.size()));
    std::vector<double> s(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) s[j] = dot(q_row, keys[j]);
    for (double& x : s) x *= scale;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const bool is_masked = !masked.empty() && masked[j] != 0;
        s[j] = is_masked ? 0.0 : std::exp(s[j]);
    }
    return s;
}

std::vector<double> weighted_value_sum(std::span<const double> e, std::span<const std::span<const double>> values) {
    if (e.size() != values.size()) throw ShapeMismatch("one exp-score per selected value row required");
    if (values.empty()) throw EmptyCandidateSet("weighted_value_sum needs at least one value row");
    const std::size_t d = values.front().size();
    double mass = 0.0;
    for (double x : e) mass += x;
    if (!(mass > 0.0)) throw ZeroMass("all candidate weights are zero");
    std::vector<double> z(d, 0.0);
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j].size() != d) throw ShapeMismatch("value rows differ in length");
        for (std::size_t t = 0; t < d; ++t) z[t] += e[j] * values[j][t];
    }
    for (double& x : z) x /= mass;
    return z;
}

SparseAttentionOutput sparse_attention(const AttentionProblem& p, std::size_t k, int bits) {
    p.validate();
    if (k == 0) throw InvalidConfig("sparse_attention: k must be >= 1");
    const std::size_t n = p.seq_len();
    const std::size_t d = p.head_dim();
    k = std::min(k, n);

    const QuantizedMatrix qq = quantize(p.q, bits);
    const QuantizedMatrix kq = quantize(p.k, bits);
    const ProductLut lut = build_product_lut(bits);
    const ScoreMatrix approx = approx_scores(qq, kq, lut);

    SparseAttentionOutput out;
    out.z = RealMatrix(n, d);
    out.selection.k = k;
    out.selection.rows.resize(n);
    out.op_counts.lowbit_macs = static_cast<std::uint64_t>(n) * n * d;

    std::span<const unsigned char> no_mask;
    std::vector<std::span<const double>> keys;
    std::vector<std::span<const double>> values;
    for (std::size_t i = 0; i < n; ++i) {
        auto& picked = out.selection.rows[i];
        picked = topk_select(approx.row(i), k, p.mask ? p.mask->row(i) : no_mask);
        keys.clear();
        values.clear();
        for (std::size_t j : picked) {
            keys.push_back(p.k.row(j));
            values.push_back(p.v.row(j));
        }
        const auto e = fused_row_scores(p.q.row(i), keys);
        const auto z = weighted_value_sum(e, values);
        std::copy(z.begin(), z.end(), out.z.row(i).begin());
        out.op_counts.exact_macs += 2 * static_cast<std::uint64_t>(picked.size()) * d;
        out.op_counts.exp_evals += picked.size();
    }
    return out;
}

OpCounts count_ops(std::size_t n, std::size_t d, std::size_t k, int bits, AttentionMode mode) {
    if (n == 0 || d == 0 || k == 0) throw InvalidConfig("count_ops: dimensions must be positive");
    if (!is_supported_bits(bits)) throw UnsupportedBits("count_ops: unsupported bits " + std::to_string(bits));
    OpCounts c;
    const std::uint64_t nn = n;
    const std::uint64_t dd = d;
    if (mode == AttentionMode::Dense) {
        c.exact_macs = 2 * nn * nn * dd;
        c.exp_evals = nn * nn;
    } else {
        const std::uint64_t kk = std::min(k, n);
        c.lowbit_macs = nn * nn * dd;
        c.exact_macs = 2 * nn * kk * dd;
        c.exp_evals = nn * kk;
    }
    return c;
}

double score_error_bound(std::span<const double> q_row, const QuantScheme& q_scheme, const RealMatrix& keys,
                         const QuantScheme& k_scheme) {
    if (q_scheme.bits < 2 || k_scheme.bits < 2) {
        throw UnsupportedBits("score_error_bound is defined for bits >= 2 only");
    }
    const double eq = q_scheme.roundtrip_bound();
    const double ek = k_scheme.roundtrip_bound();
    double q_l1 = 0.0;
    for (double x : q_row) q_l1 += std::abs(x);
    double k_l1_max = 0.0;
    for (std::size_t j = 0; j < keys.rows(); ++j) {
        double s = 0.0;
        for (double x : keys.row(j)) s += std::abs(x);
        k_l1_max = std::max(k_l1_max, s);
    }
    const auto d = static_cast<double>(q_row.size());
    return ek * q_l1 + eq * k_l1_max + d * eq * ek;
}

}  // namespace lasp
