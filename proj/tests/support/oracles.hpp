#pragma once

// Brute-force double-precision versions of the kernels, written straight from
// their definitions. Used by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "glassgpt/tensor.hpp"

namespace glassgpt::testing {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = dist(rng);
    return t;
}

inline std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t) c[i * n + j] += double(a.at(i, t)) * double(b.at(t, j));
    return c;
}

inline std::vector<double> naive_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t s = x.dim(0), d = x.dim(1);
    std::vector<double> y(s * d);
    for (std::size_t i = 0; i < s; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += x.at(i, j);
        mean /= double(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
        var /= double(d);
        for (std::size_t j = 0; j < d; ++j)
            y[i * d + j] = (x.at(i, j) - mean) / std::sqrt(var + eps) * gamma[j] + beta[j];
    }
    return y;
}

inline std::vector<double> naive_softmax_rows(const Tensor& x) {
    const std::size_t n = x.shape().back(), rows = x.size() / n;
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        long double z = 0.0L;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(static_cast<long double>(x[r * n + j]));
        for (std::size_t j = 0; j < n; ++j)
            y[r * n + j] = static_cast<double>(std::exp(static_cast<long double>(x[r * n + j])) / z);
    }
    return y;
}

inline double naive_gelu(double x) {
    const long double k = std::sqrt(2.0L / 3.14159265358979323846264338327950288L);
    const long double lx = x;
    return static_cast<double>(0.5L * lx * (1.0L + std::tanh(k * (lx + 0.044715L * lx * lx * lx))));
}

/// Largest |got - want| / max(1, |want|).
inline double max_scaled_error(std::span<const float> got, const std::vector<double>& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(double(got[i]) - want[i]) / std::max(1.0, std::abs(want[i])));
    }
    return worst;
}

inline double max_abs_error(std::span<const float> got, const std::vector<double>& want) {
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(double(got[i]) - want[i]));
    return worst;
}

/// Per-kernel randomized comparison. Each returns the worst error over `cases`.
struct OracleReport {
    std::size_t cases = 0;
    double worst = 0.0;
};

inline OracleReport check_matmul(std::mt19937_64& rng, std::size_t cases) {
    std::uniform_int_distribution<std::size_t> ext(1, 64);
    OracleReport r;
    for (; r.cases < cases; ++r.cases) {
        const std::size_t m = ext(rng), k = ext(rng), n = ext(rng);
        const Tensor a = random_tensor(rng, {m, k}), b = random_tensor(rng, {k, n});
        r.worst = std::max(r.worst, max_scaled_error(matmul(a, b).data(), naive_matmul(a, b)));
    }
    return r;
}

inline OracleReport check_layer_norm(std::mt19937_64& rng, std::size_t cases) {
    std::uniform_int_distribution<std::size_t> rows(1, 16), cols(2, 256);
    std::uniform_real_distribution<float> shift(-10.0f, 10.0f), spread(0.1f, 5.0f);
    OracleReport r;
    for (; r.cases < cases; ++r.cases) {
        const std::size_t s = rows(rng), d = cols(rng);
        const float c = shift(rng), w = spread(rng);
        const Tensor x = random_tensor(rng, {s, d}, c - w, c + w);
        const Tensor g = random_tensor(rng, {d}, 0.5f, 1.5f), b = random_tensor(rng, {d}, -0.5f, 0.5f);
        r.worst = std::max(r.worst, max_abs_error(layer_norm(x, g, b).data(), naive_layer_norm(x, g, b, 1e-5)));
    }
    return r;
}

inline OracleReport check_softmax(std::mt19937_64& rng, std::size_t cases) {
    std::uniform_int_distribution<std::size_t> rows(1, 8), cols(1, 300);
    std::uniform_real_distribution<float> scale(0.1f, 30.0f);
    OracleReport r;
    for (; r.cases < cases; ++r.cases) {
        const float sc = scale(rng);
        const Tensor x = random_tensor(rng, {rows(rng), cols(rng)}, -sc, sc);
        r.worst = std::max(r.worst, max_abs_error(softmax(x).data(), naive_softmax_rows(x)));
    }
    return r;
}

inline OracleReport check_gelu(std::mt19937_64& rng, std::size_t cases) {
    std::uniform_int_distribution<std::size_t> len(1, 512);
    OracleReport r;
    for (; r.cases < cases; ++r.cases) {
        const Tensor x = random_tensor(rng, {len(rng)}, -8.0f, 8.0f);
        std::vector<double> want(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) want[i] = naive_gelu(x[i]);
        r.worst = std::max(r.worst, max_scaled_error(gelu(x).data(), want));
    }
    return r;
}

}  // namespace glassgpt::testing
