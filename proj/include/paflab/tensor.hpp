#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace paflab {

class Rng;

/// Dense row-major 2-D matrix of doubles. Vectors are stored as 1 x n rows.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
    Tensor(std::initializer_list<std::initializer_list<double>> rows);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
    static Tensor filled(std::size_t rows, std::size_t cols, double value);
    static Tensor eye(std::size_t n);
    static Tensor row_vector(std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }
    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    bool same_shape(const Tensor& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    /// "RxC"
    std::string shape() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// True when shapes match and every element has the same bit pattern.
bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

// Plain (non-recording) kernels. The differentiable counterparts in ops.hpp
// share names and semantics.

Tensor matmul(const Tensor& a, const Tensor& b);
/// c += op(a) * op(b), where op transposes when the flag is set.
void gemm_accumulate(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Adds a 1 x cols row to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);

double gelu(double x);
double gelu_derivative(double x);
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

/// n x 1 column of per-row means.
Tensor row_mean(const Tensor& a);
/// n x 1 column of per-row biased (divide-by-cols) variances.
Tensor row_var(const Tensor& a);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor split_cols(const Tensor& a, std::size_t first, std::size_t width);

Tensor gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

void add_in_place(Tensor& target, const Tensor& other);

/// Mean over rows of the per-row Euclidean norm.
double mean_row_norm(const Tensor& a);

}  // namespace paflab
