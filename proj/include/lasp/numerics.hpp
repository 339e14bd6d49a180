#pragma once

#include <cstdint>
#include <vector>

#include "lasp/matrix.hpp"

namespace lasp {

using QuantMatrix = Matrix<std::int32_t>;
using ScoreMatrix = Matrix<std::int64_t>;

/// Symmetric signed quantization scheme. For bits >= 2 the codomain is
/// [-(2^(b-1)-1), 2^(b-1)-1]; for bits == 1 it is {-1, +1}.
struct QuantScheme {
    int bits = 4;
    double scale = 0.0;  // max-abs of the source tensor

    /// Largest representable magnitude, 2^(b-1)-1 (1 for the sign scheme).
    [[nodiscard]] int max_level() const noexcept;
    [[nodiscard]] int min_code() const noexcept { return bits == 1 ? -1 : -max_level(); }
    [[nodiscard]] int max_code() const noexcept { return max_level(); }
    [[nodiscard]] bool in_codomain(std::int32_t v) const noexcept;

    /// Dequantization step M / (2^(b-1)-1). Zero for the all-zero tensor.
    [[nodiscard]] double step() const noexcept;
    /// Worst-case |x - step * x'| for |x| <= scale (bits >= 2 only).
    [[nodiscard]] double roundtrip_bound() const noexcept { return step() / 2.0; }

    friend bool operator==(const QuantScheme&, const QuantScheme&) = default;
};

struct QuantizedMatrix {
    QuantMatrix values;
    QuantScheme scheme;

    [[nodiscard]] std::size_t rows() const noexcept { return values.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return values.cols(); }
};

/// Exhaustive product table for a bit width. Indexed over the full signed b-bit
/// range [-2^(b-1), 2^(b-1)-1] for b >= 2 (256 entries at b = 4) and over
/// {-1, +1} for b = 1.
class ProductLut {
public:
    explicit ProductLut(int bits);

    [[nodiscard]] int bits() const noexcept { return bits_; }
    [[nodiscard]] int lo() const noexcept { return lo_; }
    [[nodiscard]] int hi() const noexcept { return hi_; }
    [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

    [[nodiscard]] std::int32_t product(std::int32_t a, std::int32_t c) const noexcept {
        return table_[index(a) * width_ + index(c)];
    }

private:
    [[nodiscard]] std::size_t index(std::int32_t v) const noexcept {
        return bits_ == 1 ? static_cast<std::size_t>((v + 1) / 2) : static_cast<std::size_t>(v - lo_);
    }

    int bits_;
    int lo_;
    int hi_;
    std::size_t width_;
    std::vector<std::int32_t> table_;
};

[[nodiscard]] bool is_supported_bits(int bits) noexcept;

/// Max-abs value of the matrix.
[[nodiscard]] double compute_scale(const RealMatrix& matrix);

/// Rounds half away from zero. For bits == 1 applies sign() with sign(0) = +1.
[[nodiscard]] QuantizedMatrix quantize(const RealMatrix& matrix, int bits);

/// Quantizes a single value against an explicit scheme.
[[nodiscard]] std::int32_t quantize_value(double x, const QuantScheme& scheme) noexcept;

[[nodiscard]] ProductLut build_product_lut(int bits);

/// S' = Q' K'^T where every scalar product is a table lookup.
[[nodiscard]] ScoreMatrix approx_scores(const QuantizedMatrix& q, const QuantizedMatrix& k,
                                        const ProductLut& lut);

}  // namespace lasp
