#pragma once

// Dense row-major matrix plus the error types shared by every module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace itsc {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract violation on shapes or argument ranges.
class shape_error : public error {
 public:
  using error::error;
};

// Non-finite values or degenerate numerics.
class numeric_error : public error {
 public:
  using error::error;
};

// File parsing / serialization failures.
class io_error : public error {
 public:
  using error::error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw shape_error(msg);
}

template <class Real>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<Real> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(int r, int c, Real fill = Real(0))
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  Real* operator[](int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const Real* operator[](int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  Real& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const Real& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void zero() { std::fill(data.begin(), data.end(), Real(0)); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

template <class Real>
bool all_finite(const Real* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  return true;
}

template <class Real>
bool all_finite(const Matrix<Real>& m) {
  return all_finite(m.data.data(), m.size());
}

inline std::string shape_str(int r, int c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace itsc
