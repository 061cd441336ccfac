#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vfl {

// Dense row-major matrix of 64-bit floats. Shapes are explicit; every op
// validates its operands and throws std::invalid_argument on mismatch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows*cols entries, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

// a * b, aᵀ * b, a * bᵀ
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);

// a += s * b
void add_in_place(Matrix& a, const Matrix& b, double s = 1.0);
void scale_in_place(Matrix& a, double s);

double frobenius_norm(const Matrix& a);
double sum_squares(const Matrix& a);   // ‖a‖_F² — the squared-ℓ2 regularizer
double dot(const Matrix& a, const Matrix& b);  // ⟨a,b⟩_F
double max_abs(const Matrix& a);

Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx);
// dst.row(idx[i]) = src.row(i)
void scatter_rows(Matrix& dst, const std::vector<std::size_t>& idx, const Matrix& src);
Matrix gather_cols(const Matrix& a, const std::vector<std::size_t>& idx);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);  // [begin, end)
Matrix hconcat(const std::vector<Matrix>& parts);

// Solves A·X = B for symmetric positive-definite A (Cholesky).
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Flat parameter-vector helpers.
double dot(const std::vector<double>& a, const std::vector<double>& b);
double sum_squares(const std::vector<double>& a);
double max_abs(const std::vector<double>& a);
void axpy(std::vector<double>& y, const std::vector<double>& x, double a);  // y += a*x

// Shape mismatch reporting shared across modules.
[[noreturn]] void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b);

}  // namespace vfl
