#include "lasp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lasp {

namespace {

void require_supported(int bits) {
    if (!is_supported_bits(bits)) {
        throw UnsupportedBits("unsupported quantization width: " + std::to_string(bits) +
                              " (expected 1, 2, 4 or 8)");
    }
}

}  // namespace

int QuantScheme::max_level() const noexcept {
    return bits == 1 ? 1 : (1 << (bits - 1)) - 1;
}

bool QuantScheme::in_codomain(std::int32_t v) const noexcept {
    if (bits == 1) return v == -1 || v == 1;
    return v >= -max_level() && v <= max_level();
}

double QuantScheme::step() const noexcept {
    return scale / static_cast<double>(max_level());
}

bool is_supported_bits(int bits) noexcept {
    return bits == 1 || bits == 2 || bits == 4 || bits == 8;
}

double compute_scale(const RealMatrix& matrix) {
    if (matrix.empty()) throw EmptyMatrix("cannot compute scale of an empty matrix");
    double m = 0.0;
    for (double x : matrix.flat()) {
        if (!std::isfinite(x)) throw NonFinite("matrix contains NaN or Inf");
        m = std::max(m, std::abs(x));
    }
    return m;
}

std::int32_t quantize_value(double x, const QuantScheme& scheme) noexcept {
    if (scheme.bits == 1) return x < 0.0 ? -1 : 1;
    if (scheme.scale == 0.0) return 0;
    const double level = static_cast<double>(scheme.max_level());
    // std::round is half-away-from-zero. The clamp only guards |x| slightly
    // above scale from an external scheme.
    const double r = std::round(level / scheme.scale * x);
    return static_cast<std::int32_t>(std::clamp(r, -level, level));
}

QuantizedMatrix quantize(const RealMatrix& matrix, int bits) {
    require_supported(bits);
    QuantizedMatrix out;
    out.scheme = QuantScheme{bits, compute_scale(matrix)};
    out.values = QuantMatrix(matrix.rows(), matrix.cols());
    auto src = matrix.flat();
    auto dst = out.values.flat();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize_value(src[i], out.scheme);
    return out;
}

ProductLut::ProductLut(int bits) : bits_(bits) {
    require_supported(bits);
    if (bits == 1) {
        lo_ = -1;
        hi_ = 1;
        width_ = 2;
    } else {
        lo_ = -(1 << (bits - 1));
        hi_ = (1 << (bits - 1)) - 1;
        width_ = static_cast<std::size_t>(hi_ - lo_ + 1);
    }
    table_.resize(width_ * width_);
    auto code = [&](std::size_t idx) {
        return bits == 1 ? (idx == 0 ? -1 : 1) : lo_ + static_cast<int>(idx);
    };
    for (std::size_t i = 0; i < width_; ++i)
        for (std::size_t j = 0; j < width_; ++j) table_[i * width_ + j] = code(i) * code(j);
}

ProductLut build_product_lut(int bits) { return ProductLut(bits); }

ScoreMatrix approx_scores(const QuantizedMatrix& q, const QuantizedMatrix& k, const ProductLut& lut) {
    if (q.cols() != k.cols()) {
        throw ShapeMismatch("approx_scores: Q' has " + std::to_string(q.cols()) + " columns, K' has " +
                            std::to_string(k.cols()));
    }
    if (q.scheme.bits != lut.bits() || k.scheme.bits != lut.bits()) {
        throw SchemeMismatch("approx_scores: operand bit widths do not match the product table");
    }
    ScoreMatrix s(q.rows(), k.rows());
    const std::size_t d = q.cols();
    for (std::size_t i = 0; i < q.rows(); ++i) {
        auto qi = q.values.row(i);
        for (std::size_t j = 0; j < k.rows(); ++j) {
            auto kj = k.values.row(j);
            std::int64_t acc = 0;
            for (std::size_t t = 0; t < d; ++t) acc += lut.product(qi[t], kj[t]);
            s(i, j) = acc;
        }
    }
    return s;
}

}  // namespace lasp
