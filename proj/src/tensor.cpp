#include "stv/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace stv {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMatrix>;
using Map = Eigen::Map<RowMajorMatrix>;

void require_mat(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw dim_error(std::string(who) + ": expected rank-2 tensor");
}

}  // namespace

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_mat(a, "matmul");
    require_mat(b, "matmul");
    if (a.cols() != b.rows())
        throw dim_error("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()));
    Tensor out({a.rows(), b.cols()});
    ConstMap ma(a.data.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    ConstMap mb(b.data.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
    Map mo(out.data.data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols()));
    mo.noalias() = ma * mb;
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_mat(a, "matmul_tn");
    require_mat(b, "matmul_tn");
    if (a.rows() != b.rows()) throw dim_error("matmul_tn: leading dimensions differ");
    Tensor out({a.cols(), b.cols()});
    ConstMap ma(a.data.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    ConstMap mb(b.data.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
    Map mo(out.data.data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols()));
    mo.noalias() = ma.transpose() * mb;
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_mat(a, "matmul_nt");
    require_mat(b, "matmul_nt");
    if (a.cols() != b.cols()) throw dim_error("matmul_nt: trailing dimensions differ");
    Tensor out({a.rows(), b.rows()});
    ConstMap ma(a.data.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
    ConstMap mb(b.data.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
    Map mo(out.data.data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols()));
    mo.noalias() = ma * mb.transpose();
    return out;
}

void softmax_inplace(double* row, std::size_t n) {
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

Tensor softmax_rows(const Tensor& x) {
    require_mat(x, "softmax_rows");
    if (!x.all_finite()) throw numeric_error("softmax_rows: non-finite input");
    Tensor out = x;
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) softmax_inplace(out.data.data() + i * n, n);
    return out;
}

double l2_norm(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data) s += v * v;
    return std::sqrt(s);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    if (x.rank() == 0 || x.shape.back() < 2) throw dim_error("layer_norm: trailing dim must be >= 2");
    const std::size_t d = x.shape.back();
    if (gain.numel() != d || bias.numel() != d) throw dim_error("layer_norm: gain/bias size mismatch");
    Tensor out = x;
    const std::size_t nvec = x.numel() / d;
    for (std::size_t i = 0; i < nvec; ++i) {
        double* v = out.data.data() + i * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += v[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = v[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < d; ++j)
            v[j] = (v[j] - mean) * inv * gain.data[j] + bias.data[j];
    }
    return out;
}

std::size_t argmax_with_ties(const double* v, std::size_t n) {
    if (n == 0) throw dim_error("argmax_with_ties: empty input");
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

std::size_t argmax_with_ties(const Tensor& x) {
    return argmax_with_ties(x.data.data(), x.numel());
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw dim_error("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void scale_inplace(Tensor& a, double s) {
    for (double& v : a.data) v *= s;
}

}  // namespace stv
