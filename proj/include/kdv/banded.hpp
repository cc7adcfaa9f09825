#pragma once

// Square banded matrices in LAPACK band storage and their LU factorization.

#include <lapacke.h>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "kdv/errors.hpp"

namespace kdv {

/// n x n matrix with kl sub- and ku super-diagonals.
/// Stored column-major with leading dimension 2*kl+ku+1 so the same buffer feeds dgbtrf.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(std::size_t n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(ld_ * n, 0.0) {}

  std::size_t size() const { return n_; }
  int kl() const { return kl_; }
  int ku() const { return ku_; }

  bool in_band(std::size_t i, std::size_t j) const {
    const long d = static_cast<long>(j) - static_cast<long>(i);
    return d <= ku_ && -d <= kl_;
  }
  double& at(std::size_t i, std::size_t j) {
    if (!in_band(i, j) || i >= n_ || j >= n_) throw InvalidArgument("BandMatrix: entry outside band");
    return ab_[j * ld_ + (kl_ + ku_ + i - j)];
  }
  double get(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_ || !in_band(i, j)) return 0.0;
    return ab_[j * ld_ + (kl_ + ku_ + i - j)];
  }

  /// y = A x
  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t lo = j > static_cast<std::size_t>(ku_) ? j - ku_ : 0;
      const std::size_t hi = std::min(n_ - 1, j + kl_);
      for (std::size_t i = lo; i <= hi; ++i) y[i] += get(i, j) * x[j];
    }
    return y;
  }
  /// y = A^T x
  std::vector<double> multiply_transpose(const std::vector<double>& x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t lo = j > static_cast<std::size_t>(ku_) ? j - ku_ : 0;
      const std::size_t hi = std::min(n_ - 1, j + kl_);
      double s = 0.0;
      for (std::size_t i = lo; i <= hi; ++i) s += get(i, j) * x[i];
      y[j] = s;
    }
    return y;
  }

  const std::vector<double>& storage() const { return ab_; }
  std::vector<double>& storage() { return ab_; }
  int leading_dim() const { return ld_; }

 private:
  std::size_t n_ = 0;
  int kl_ = 0, ku_ = 0, ld_ = 1;
  std::vector<double> ab_;
};

/// LU factorization with partial pivoting (dgbtrf); solves with A or A^T.
class BandedLU {
 public:
  BandedLU() = default;
  explicit BandedLU(const BandMatrix& a) : lu_(a), ipiv_(a.size()) {
    const auto n = static_cast<lapack_int>(a.size());
    const lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, a.kl(), a.ku(),
                                           lu_.storage().data(), lu_.leading_dim(), ipiv_.data());
    if (info != 0)
      throw SolverError("BandedLU: factorization failed (info = " + std::to_string(info) + ")");
  }

  void solve_inplace(std::vector<double>& b, bool transpose = false) const {
    if (b.size() != lu_.size()) throw InvalidArgument("BandedLU: right-hand side size mismatch");
    const auto n = static_cast<lapack_int>(lu_.size());
    const lapack_int info =
        LAPACKE_dgbtrs(LAPACK_COL_MAJOR, transpose ? 'T' : 'N', n, lu_.kl(), lu_.ku(), 1,
                       lu_.storage().data(), lu_.leading_dim(), ipiv_.data(), b.data(), n);
    if (info != 0) throw SolverError("BandedLU: solve failed");
  }
  std::vector<double> solve(std::vector<double> b, bool transpose = false) const {
    solve_inplace(b, transpose);
    return b;
  }

 private:
  BandMatrix lu_;
  std::vector<lapack_int> ipiv_;
};

}  // namespace kdv
