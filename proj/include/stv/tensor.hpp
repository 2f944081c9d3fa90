#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace stv {

// Thrown on shape/dimension violations.
struct dim_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numeric invariant breaks (NaN input, diverging loss, ...).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of 64-bit floats. Rank is dynamic; most of the
/// codebase uses rank 1 and 2.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::initializer_list<std::size_t> s) : shape(s) { data.assign(numel(), 0.0); }
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) { data.assign(numel(), 0.0); }

    static Tensor zeros(std::initializer_list<std::size_t> s) { return Tensor(s); }
    static Tensor full(std::initializer_list<std::size_t> s, double v) {
        Tensor t(s);
        t.data.assign(t.numel(), v);
        return t;
    }
    static Tensor identity(std::size_t n);
    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.shape = {1, v.size()};
        t.data = std::move(v);
        return t;
    }
    static Tensor vec(std::vector<double> v) {
        Tensor t;
        t.shape = {v.size()};
        t.data = std::move(v);
        return t;
    }
    static Tensor from_rows(std::size_t rows, std::size_t cols, std::vector<double> v) {
        if (v.size() != rows * cols) throw dim_error("from_rows: size mismatch");
        Tensor t;
        t.shape = {rows, cols};
        t.data = std::move(v);
        return t;
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

// out = a @ b for a:[m x k], b:[k x n]. Throws dim_error on inner mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);
// out = a^T @ b for a:[k x m], b:[k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// out = a @ b^T for a:[m x k], b:[n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Row-stabilized softmax; each output row sums to 1. NaN input -> numeric_error.
Tensor softmax_rows(const Tensor& x);
// In-place variant over a raw row (used by the attention inner loop).
void softmax_inplace(double* row, std::size_t n);

double l2_norm(const Tensor& x);

// Per-vector normalization over the trailing dimension d with affine gain/bias.
// Variance epsilon 1e-5. d == 1 is rejected.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Index of the row maximum; ties resolve to the lowest index.
std::size_t argmax_with_ties(const Tensor& x);
std::size_t argmax_with_ties(const double* v, std::size_t n);

void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, double s);

inline constexpr double kLayerNormEps = 1e-5;

}  // namespace stv
