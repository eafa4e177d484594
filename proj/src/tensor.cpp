#include "paflab/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "paflab/errors.hpp"
#include "paflab/rng.hpp"

namespace paflab {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap as_eigen(const Tensor& t) { return ConstMap(t.data(), t.rows(), t.cols()); }
MutMap as_eigen(Tensor& t) { return MutMap(t.data(), t.rows(), t.cols()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

template <typename F>
Tensor map_values(const Tensor& a, F f) {
    Tensor out(a.rows(), a.cols());
    auto src = a.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = f(src[i]);
    }
    return out;
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Tensor: " + std::to_string(data_.size()) + " values do not fill " + shape());
    }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("Tensor: ragged initializer rows");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
    return Tensor(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::eye(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        t(i, i) = 1.0;
    }
    return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
}

std::string Tensor::shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

bool all_finite(const Tensor& t) {
    return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + a.shape() + " by " + b.shape());
    }
    Tensor c(a.rows(), b.cols());
    if (a.cols() > 0) {
        as_eigen(c).noalias() = as_eigen(a) * as_eigen(b);
    }
    return c;
}

void gemm_accumulate(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t kb = transpose_b ? b.cols() : b.rows();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    if (k != kb || c.rows() != m || c.cols() != n) {
        throw DimensionError("gemm: incompatible " + a.shape() + ", " + b.shape() + " into " + c.shape());
    }
    if (k == 0) {
        return;
    }
    auto out = as_eigen(c);
    if (!transpose_a && !transpose_b) {
        out.noalias() += as_eigen(a) * as_eigen(b);
    } else if (transpose_a && !transpose_b) {
        out.noalias() += as_eigen(a).transpose() * as_eigen(b);
    } else if (!transpose_a && transpose_b) {
        out.noalias() += as_eigen(a) * as_eigen(b).transpose();
    } else {
        out.noalias() += as_eigen(a).transpose() * as_eigen(b).transpose();
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    add_in_place(out, b);
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    return map_values(a, [factor](double v) { return v * factor; });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elementwise_mul");
    Tensor out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(c, r) = a(r, c);
        }
    }
    return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row: cannot broadcast " + row.shape() + " over " + a.shape());
    }
    Tensor out = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) {
            dst[c] += row[c];
        }
    }
    return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    return cdf + x * pdf;
}

Tensor gelu(const Tensor& a) {
    return map_values(a, [](double v) { return gelu(v); });
}

Tensor relu(const Tensor& a) {
    return map_values(a, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
    Tensor out(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row(r);
        auto dst = out.row(r);
        const double peak = *std::max_element(src.begin(), src.end());
        double total = 0.0;
        for (std::size_t c = 0; c < src.size(); ++c) {
            dst[c] = std::exp(src[c] - peak);
            total += dst[c];
        }
        const double inv = 1.0 / total;
        for (double& v : dst) {
            v *= inv;
        }
    }
    return out;
}

Tensor row_mean(const Tensor& a) {
    Tensor out(a.rows(), 1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) {
            s += v;
        }
        out[r] = s / static_cast<double>(a.cols());
    }
    return out;
}

Tensor row_var(const Tensor& a) {
    const Tensor mean = row_mean(a);
    Tensor out(a.rows(), 1);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) {
            const double d = v - mean[r];
            s += d * d;
        }
        out[r] = s / static_cast<double>(a.cols());
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        return {};
    }
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw DimensionError("concat_cols: row mismatch " + parts.front().shape() + " vs " + p.shape());
        }
        cols += p.cols();
    }
    Tensor out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.row(r).data();
        for (const auto& p : parts) {
            auto src = p.row(r);
            std::copy(src.begin(), src.end(), dst);
            dst += src.size();
        }
    }
    return out;
}

Tensor split_cols(const Tensor& a, std::size_t first, std::size_t width) {
    if (first + width > a.cols()) {
        throw DimensionError("split_cols: columns [" + std::to_string(first) + ", " +
                             std::to_string(first + width) + ") outside " + a.shape());
    }
    Tensor out(a.rows(), width);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto src = a.row(r).subspan(first, width);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

Tensor gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    Tensor out(rows, cols);
    for (double& v : out.values()) {
        v = stddev * rng.normal();
    }
    return out;
}

void add_in_place(Tensor& target, const Tensor& other) {
    require_same_shape(target, other, "add_in_place");
    double* dst = target.data();
    const double* src = other.data();
    for (std::size_t i = 0; i < target.size(); ++i) {
        dst[i] += src[i];
    }
}

double mean_row_norm(const Tensor& a) {
    if (a.rows() == 0) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double sq = 0.0;
        for (double v : a.row(r)) {
            sq += v * v;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(a.rows());
}

}  // namespace paflab
