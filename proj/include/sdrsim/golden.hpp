#pragma once
// Reference MMSE detector: x = (H^H H + s2 I)^-1 H^H y through a Cholesky
// factorization G = L L^H and two triangular solves.

#include <Eigen/Dense>
#include <complex>
#include <optional>

#include "sdrsim/error.hpp"

namespace sdrsim {

template <typename Scalar>
using CMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using CVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

struct DetectionProblem {
  CMatrix<double> H;  // n_rx x n_tx
  CVector<double> y;  // n_rx
  double sigma2 = 0;

  int n_rx() const { return static_cast<int>(H.rows()); }
  int n_tx() const { return static_cast<int>(H.cols()); }
  /// Throws ConfigError unless n_rx >= n_tx >= 1, y has n_rx entries and
  /// sigma2 >= 0 (zero only for noise-free channels).
  void validate() const;
};

/// A pivot that is not strictly positive, at column `index`.
struct NonPositiveDiagonal : Error {
  int index;
  explicit NonPositiveDiagonal(int j) : Error("non-positive pivot at column " + std::to_string(j)), index(j) {}
};

template <typename Scalar>
CMatrix<Scalar> gram(const CMatrix<Scalar>& H, Scalar sigma2) {
  CMatrix<Scalar> G = H.adjoint() * H;
  G.diagonal().array() += sigma2;
  // exactly Hermitian
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    G(i, i) = std::complex<Scalar>(G(i, i).real(), 0);
    for (Eigen::Index j = 0; j < i; ++j) G(j, i) = std::conj(G(i, j));
  }
  return G;
}

template <typename Scalar>
CVector<Scalar> matched_filter(const CMatrix<Scalar>& H, const CVector<Scalar>& y) {
  return H.adjoint() * y;
}

/// Lower-triangular L with real positive diagonal and L L^H = G.
template <typename Scalar>
CMatrix<Scalar> cholesky(const CMatrix<Scalar>& G) {
  const Eigen::Index n = G.rows();
  CMatrix<Scalar> L = CMatrix<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar d = G(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(L(j, k));
    if (!(d > 0)) throw NonPositiveDiagonal(static_cast<int>(j));
    const Scalar ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      std::complex<Scalar> s = G(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
      L(i, j) = s / ljj;
    }
  }
  return L;
}

/// Solves L u = b.
template <typename Scalar>
CVector<Scalar> tri_solve_lower(const CMatrix<Scalar>& L, const CVector<Scalar>& b) {
  return L.template triangularView<Eigen::Lower>().solve(b);
}

/// Solves L^H x = u.
template <typename Scalar>
CVector<Scalar> tri_solve_upper(const CMatrix<Scalar>& L, const CVector<Scalar>& u) {
  return L.adjoint().template triangularView<Eigen::Upper>().solve(u);
}

template <typename Scalar>
struct MmseIntermediates {
  CMatrix<Scalar> G;
  CVector<Scalar> z;
  CMatrix<Scalar> L;
  CVector<Scalar> x;
};

template <typename Scalar>
MmseIntermediates<Scalar> mmse_steps(const CMatrix<Scalar>& H, const CVector<Scalar>& y, Scalar sigma2) {
  MmseIntermediates<Scalar> r;
  r.G = gram(H, sigma2);
  r.z = matched_filter(H, y);
  r.L = cholesky(r.G);
  r.x = tri_solve_upper(r.L, tri_solve_lower(r.L, r.z));
  return r;
}

/// Double-precision detector on the unquantized problem.
CVector<double> golden_mmse(const DetectionProblem& p);

}  // namespace sdrsim
