#include "vfl/matrix.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace vfl {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

ConstMap map_of(const Matrix& m) {
  return ConstMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                  static_cast<Eigen::Index>(m.cols));
}

MutMap map_of(Matrix& m) {
  return MutMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                static_cast<Eigen::Index>(m.cols));
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw std::invalid_argument("Matrix: " + std::to_string(data.size()) +
                                " values for shape " + std::to_string(r) + "x" +
                                std::to_string(c));
  }
}

void throw_shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw_shape_error("matmul", a, b);
  Matrix out(a.rows, b.cols);
  map_of(out).noalias() = map_of(a) * map_of(b);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw_shape_error("matmul_tn", a, b);
  Matrix out(a.cols, b.cols);
  map_of(out).noalias() = map_of(a).transpose() * map_of(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw_shape_error("matmul_nt", a, b);
  Matrix out(a.rows, b.rows);
  map_of(out).noalias() = map_of(a) * map_of(b).transpose();
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  map_of(out) = map_of(a).transpose();
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape_error("add", a, b);
  Matrix out = a;
  add_in_place(out, b, 1.0);
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape_error("sub", a, b);
  Matrix out = a;
  add_in_place(out, b, -1.0);
  return out;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix out = a;
  scale_in_place(out, s);
  return out;
}

void add_in_place(Matrix& a, const Matrix& b, double s) {
  if (!a.same_shape(b)) throw_shape_error("add_in_place", a, b);
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += s * b.data[i];
}

void scale_in_place(Matrix& a, double s) {
  for (double& v : a.data) v *= s;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(sum_squares(a)); }

double sum_squares(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v * v;
  return acc;
}

double dot(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape_error("dot", a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), a.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx[i]) +
                                  " out of range for " + std::to_string(a.rows) +
                                  " rows");
    }
    const double* src = a.data.data() + idx[i] * a.cols;
    std::copy(src, src + a.cols, out.data.data() + i * a.cols);
  }
  return out;
}

void scatter_rows(Matrix& dst, const std::vector<std::size_t>& idx, const Matrix& src) {
  if (src.rows != idx.size() || src.cols != dst.cols)
    throw_shape_error("scatter_rows", dst, src);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= dst.rows) {
      throw std::invalid_argument("scatter_rows: index " + std::to_string(idx[i]) +
                                  " out of range for " + std::to_string(dst.rows) +
                                  " rows");
    }
    const double* from = src.data.data() + i * src.cols;
    std::copy(from, from + src.cols, dst.data.data() + idx[i] * dst.cols);
  }
}

Matrix gather_cols(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix out(a.rows, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= a.cols) {
      throw std::invalid_argument("gather_cols: index " + std::to_string(idx[j]) +
                                  " out of range for " + std::to_string(a.cols) +
                                  " cols");
    }
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out(i, j) = a(i, idx[j]);
    }
  }
  return out;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) +
                                ", " + std::to_string(end) + ") for " +
                                std::to_string(a.cols) + " cols");
  }
  Matrix out(a.rows, end - begin);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* src = a.data.data() + i * a.cols + begin;
    std::copy(src, src + (end - begin), out.data.data() + i * out.cols);
  }
  return out;
}

Matrix hconcat(const std::vector<Matrix>& parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: no parts");
  std::size_t total_cols = 0;
  for (const Matrix& p : parts) {
    if (p.rows != parts.front().rows) throw_shape_error("hconcat", parts.front(), p);
    total_cols += p.cols;
  }
  Matrix out(parts.front().rows, total_cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* dst = out.data.data() + i * total_cols;
    for (const Matrix& p : parts) {
      const double* src = p.data.data() + i * p.cols;
      std::copy(src, src + p.cols, dst);
      dst += p.cols;
    }
  }
  return out;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows != a.cols) throw std::invalid_argument("solve_spd: matrix not square");
  if (a.rows != b.rows) throw_shape_error("solve_spd", a, b);
  Eigen::LLT<EigenRowMajor> llt(map_of(a));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_spd: Cholesky factorization failed");
  }
  Matrix out(b.rows, b.cols);
  map_of(out) = llt.solve(map_of(b));
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: vector lengths " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares(const std::vector<double>& a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return acc;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

void axpy(std::vector<double>& y, const std::vector<double>& x, double a) {
  if (y.size() != x.size()) {
    throw std::invalid_argument("axpy: vector lengths " + std::to_string(y.size()) +
                                " and " + std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace vfl
