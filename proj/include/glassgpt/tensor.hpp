#pragma once

// Dense row-major float32 tensors and the handful of kernels a GPT-2 forward
// pass needs. Every reduction runs in ascending index order so results do not
// depend on blocking; outputs are checked for NaN/Inf.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "glassgpt/error.hpp"

namespace glassgpt {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

class Tensor {
public:
    /// Rank-0 tensor holding a single zero.
    Tensor() : data_(1, 0.0f) {}

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(element_count(shape_), 0.0f);
    }

    Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != element_count(shape_)) {
            throw shape_error("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + glassgpt::to_string(shape_));
        }
    }

    static Tensor filled(Shape shape, float value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Element (i, j) of a rank-2 tensor.
    float& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
    float at(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }

    /// Row i of the tensor viewed as [outer x last].
    std::span<float> row(std::size_t i) noexcept {
        const std::size_t n = shape_.empty() ? 1 : shape_.back();
        return std::span<float>(data_).subspan(i * n, n);
    }
    std::span<const float> row(std::size_t i) const noexcept {
        const std::size_t n = shape_.empty() ? 1 : shape_.back();
        return std::span<const float>(data_).subspan(i * n, n);
    }

    /// Same data, new shape of equal element count.
    Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
    Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_)); }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void validate_shape() const {
        for (std::size_t extent : shape_) {
            if (extent == 0) {
                throw shape_error("tensor extents must be positive, got " + glassgpt::to_string(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<float> data_;
};

/// Bitwise equality of shape and contents (distinguishes -0 from +0).
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    const auto x = a.data();
    const auto y = b.data();
    return std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
}

inline void require_finite(const Tensor& t, const char* what) {
    for (float v : t.data()) {
        if (!std::isfinite(v)) throw numeric_error(std::string("non-finite value produced by ") + what);
    }
}

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* operand) {
    if (t.rank() != rank) {
        throw shape_error(std::string(op) + ": " + operand + " must have rank " + std::to_string(rank) +
                          ", got " + to_string(t.shape()));
    }
}

inline void require_vector(const Tensor& t, std::size_t n, const char* op, const char* operand) {
    if (t.rank() != 1 || t.dim(0) != n) {
        throw shape_error(std::string(op) + ": " + operand + " must have shape [" + std::to_string(n) +
                          "], got " + to_string(t.shape()));
    }
}

}  // namespace detail

/// c = a·b for a[m×k], b[k×n]. Each c[i][j] accumulates t = 0..k-1 in order.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "matmul", "lhs");
    detail::require_rank(b, 2, "matmul", "rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw shape_error("matmul: inner extents disagree: " + to_string(a.shape()) + " · " + to_string(b.shape()));
    }
    Tensor c({m, n});
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = pc + i * n;
        const float* arow = pa + i * k;
        for (std::size_t t = 0; t < k; ++t) {
            const float av = arow[t];
            const float* brow = pb + t * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    require_finite(c, "matmul");
    return c;
}

/// c = a·bᵀ for a[m×k], b[n×k]; each element is a sequential dot product.
inline Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "matmul_transposed", "lhs");
    detail::require_rank(b, 2, "matmul_transposed", "rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw shape_error("matmul_transposed: inner extents disagree: " + to_string(a.shape()) + " · " +
                          to_string(b.shape()) + "ᵀ");
    }
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto brow = b.row(j);
            float acc = 0.0f;
            for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            c.at(i, j) = acc;
        }
    }
    require_finite(c, "matmul_transposed");
    return c;
}

/// x·w + bias, bias broadcast along rows.
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    detail::require_rank(w, 2, "linear", "weight");
    detail::require_vector(bias, w.dim(1), "linear", "bias");
    Tensor y = matmul(x, w);
    const auto b = bias.data();
    for (std::size_t i = 0; i < y.dim(0); ++i) {
        auto r = y.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
    }
    require_finite(y, "linear");
    return y;
}

/// Row-wise LayerNorm with population variance; eps sits inside the square root.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f) {
    detail::require_rank(x, 2, "layer_norm", "input");
    const std::size_t d = x.dim(1);
    detail::require_vector(gamma, d, "layer_norm", "gamma");
    detail::require_vector(beta, d, "layer_norm", "beta");
    if (!(eps > 0.0f)) throw precondition_error("layer_norm: eps must be positive");
    Tensor y(x.shape());
    const auto g = gamma.data();
    const auto b = beta.data();
    for (std::size_t i = 0; i < x.dim(0); ++i) {
        const auto in = x.row(i);
        double sum = 0.0;
        for (float v : in) sum += v;
        const double mean = sum / static_cast<double>(d);
        double sq = 0.0;
        for (float v : in) {
            const double c = v - mean;
            sq += c * c;
        }
        const double inv_std = 1.0 / std::sqrt(sq / static_cast<double>(d) + static_cast<double>(eps));
        auto out = y.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            out[j] = static_cast<float>((in[j] - mean) * inv_std) * g[j] + b[j];
        }
    }
    require_finite(y, "layer_norm");
    return y;
}

/// tanh-approximated GELU of a single value.
inline float gelu(float x) {
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

inline Tensor gelu(const Tensor& x) {
    Tensor y = x;
    for (float& v : y.data()) v = gelu(v);
    require_finite(y, "gelu");
    return y;
}

/// Softmax over the last axis: subtract the slice max, exponentiate, normalize.
inline Tensor softmax(const Tensor& x) {
    if (x.rank() == 0) return Tensor::filled({}, 1.0f);
    Tensor y(x.shape());
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.size() / n;
    std::vector<double> ex(n);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto in = x.row(i);
        const float mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            ex[j] = std::exp(static_cast<double>(in[j]) - static_cast<double>(mx));
            sum += ex[j];
        }
        auto out = y.row(i);
        for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(ex[j] / sum);
    }
    require_finite(y, "softmax");
    return y;
}

/// Elementwise a + b of equal shapes.
inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw shape_error("add: shapes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    Tensor c = a;
    auto out = c.data();
    const auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
    require_finite(c, "add");
    return c;
}

/// Columns [begin, begin+count) of a rank-2 tensor.
inline Tensor slice_columns(const Tensor& x, std::size_t begin, std::size_t count) {
    detail::require_rank(x, 2, "slice_columns", "input");
    if (count == 0 || begin + count > x.dim(1)) {
        throw shape_error("slice_columns: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                          ") outside " + to_string(x.shape()));
    }
    Tensor y({x.dim(0), count});
    for (std::size_t i = 0; i < x.dim(0); ++i) {
        const auto in = x.row(i).subspan(begin, count);
        std::copy(in.begin(), in.end(), y.row(i).begin());
    }
    return y;
}

/// Horizontal concatenation of rank-2 tensors with equal row counts.
inline Tensor concat_columns(std::span<const Tensor> parts) {
    if (parts.empty()) throw shape_error("concat_columns: no inputs");
    const std::size_t rows = parts.front().dim(0);
    std::size_t cols = 0;
    for (const Tensor& p : parts) {
        detail::require_rank(p, 2, "concat_columns", "part");
        if (p.dim(0) != rows) throw shape_error("concat_columns: row counts differ");
        cols += p.dim(1);
    }
    Tensor y({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        auto out = y.row(i).begin();
        for (const Tensor& p : parts) out = std::copy(p.row(i).begin(), p.row(i).end(), out);
    }
    return y;
}

/// Row i of a rank-2 tensor as a rank-1 tensor.
inline Tensor take_row(const Tensor& x, std::size_t i) {
    detail::require_rank(x, 2, "take_row", "input");
    if (i >= x.dim(0)) throw shape_error("take_row: row " + std::to_string(i) + " outside " + to_string(x.shape()));
    const auto r = x.row(i);
    return Tensor({x.dim(1)}, std::vector<float>(r.begin(), r.end()));
}

}  // namespace glassgpt
