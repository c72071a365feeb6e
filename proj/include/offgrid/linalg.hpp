#ifndef OFFGRID_LINALG_HPP
#define OFFGRID_LINALG_HPP

// Dense Hermitian helpers: PSD projection from the positive part of the
// spectrum, extreme eigenvalues and operator norms.

#include <algorithm>
#include <vector>

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include "offgrid/core.hpp"

namespace offgrid::linalg {

struct PositivePart {
  RVector values;   // eigenvalues > 0, ascending
  CMatrix vectors;  // matching orthonormal eigenvectors (columns)
};

/// Positive eigenpairs of a Hermitian matrix. Householder tridiagonalization
/// followed by MRRR on the real tridiagonal restricted to (0, inf), so the
/// cost beyond the reduction scales with the number of positive eigenvalues.
inline PositivePart positive_eigenpairs(const CMatrix& A) {
  const Eigen::Index n = A.rows();
  PositivePart out;
  if (n == 0) return out;
  if (n == 1) {
    double a = A(0, 0).real();
    if (a > 0.0) {
      out.values = RVector::Constant(1, a);
      out.vectors = CMatrix::Ones(1, 1);
    }
    return out;
  }
  Eigen::Tridiagonalization<CMatrix> tri(A);
  RVector d = tri.diagonal();
  RVector e(n);
  e.head(n - 1) = tri.subDiagonal();
  e[n - 1] = 0.0;
  RVector w(n);
  RMatrix z(n, n);
  std::vector<lapack_int> isuppz(static_cast<std::size_t>(2 * n));
  lapack_int found = 0;
  lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'V', static_cast<lapack_int>(n), d.data(), e.data(),
                                   0.0, std::numeric_limits<double>::max(), 0, 0, 0.0, &found, w.data(),
                                   z.data(), static_cast<lapack_int>(n), isuppz.data());
  if (info != 0) {
    // MRRR can fail on pathological spectra; fall back to the full solver.
    Eigen::SelfAdjointEigenSolver<CMatrix> es(A);
    Eigen::Index k = 0;
    while (k < n && es.eigenvalues()[k] <= 0.0) ++k;
    out.values = es.eigenvalues().tail(n - k);
    out.vectors = es.eigenvectors().rightCols(n - k);
    return out;
  }
  out.values = w.head(found);
  CMatrix zc = z.leftCols(found).cast<cplx>();
  out.vectors = tri.matrixQ() * zc;
  return out;
}

/// Repeated PSD projections of same-sized matrices with persistent
/// workspace; the dense buffers are allocated once.
class PsdProjector {
 public:
  explicit PsdProjector(Eigen::Index n)
      : n_(n), tri_(n), d_(n), e_(n), w_(n), z_(n, n), isuppz_(static_cast<std::size_t>(2 * n)) {}

  /// Writes the projection of A into out and returns its rank.
  Eigen::Index project(const CMatrix& A, CMatrix& out) {
    if (n_ < 2) {
      out = project_small(A);
      return out.size() > 0 && out(0, 0).real() > 0.0 ? 1 : 0;
    }
    tri_.compute(A);
    d_ = tri_.diagonal();
    e_.head(n_ - 1) = tri_.subDiagonal();
    e_[n_ - 1] = 0.0;
    // Work with whichever side of the spectrum is smaller:
    // A_+ = V_+ L_+ V_+^*  or  A_+ = A - V_- L_- V_-^*.
    const Eigen::Index negatives = sturm_negative_count();
    const bool positive_side = n_ - negatives <= negatives;
    const double big = std::numeric_limits<double>::max();
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dstevr(
        LAPACK_COL_MAJOR, 'V', 'V', static_cast<lapack_int>(n_), d_.data(), e_.data(), positive_side ? 0.0 : -big,
        positive_side ? big : 0.0, 0, 0, 0.0, &found, w_.data(), z_.data(), static_cast<lapack_int>(n_),
        isuppz_.data());
    if (info != 0) {
      out = project_dense(A);
      return rank_of(out);
    }
    const Eigen::Index rank = positive_side ? found : n_ - found;
    if (found == 0) {
      if (positive_side)
        out.setZero(n_, n_);
      else
        out = A;
      return rank;
    }
    vecs_ = z_.leftCols(found).cast<cplx>();
    tri_.matrixQ().applyThisOnTheLeft(vecs_, work_);
    scaled_ = vecs_ * w_.head(found).asDiagonal();
    if (positive_side) {
      out.resize(n_, n_);
      out.noalias() = scaled_ * vecs_.adjoint();
    } else {
      out = A;
      out.noalias() -= scaled_ * vecs_.adjoint();
      out = 0.5 * (out + out.adjoint()).eval();
    }
    return rank;
  }

 private:
  // Number of negative eigenvalues of the tridiagonal (d_, e_) from the
  // signs of its LDL^T pivots.
  Eigen::Index sturm_negative_count() const {
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    Eigen::Index count = 0;
    double piv = d_[0];
    for (Eigen::Index i = 0;; ++i) {
      if (std::abs(piv) < tiny) piv = -tiny;
      if (piv < 0.0) ++count;
      if (i + 1 == n_) break;
      piv = d_[i + 1] - e_[i] * e_[i] / piv;
    }
    return count;
  }

  static CMatrix project_dense(const CMatrix& A) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(A);
    const RVector lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  }

  static Eigen::Index rank_of(const CMatrix& P) {
    const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(P, Eigen::EigenvaluesOnly).eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    return (ev.array() > 1e-12 * scale).count();
  }

  static CMatrix project_small(const CMatrix& A) {
    CMatrix out = CMatrix::Zero(A.rows(), A.cols());
    if (A.size() == 1 && A(0, 0).real() > 0.0) out(0, 0) = A(0, 0).real();
    return out;
  }

  Eigen::Index n_;
  Eigen::Tridiagonalization<CMatrix> tri_;
  RVector d_, e_, w_;
  RMatrix z_;
  std::vector<lapack_int> isuppz_;
  CMatrix vecs_, scaled_;
  CVector work_;
};

/// Frobenius-nearest positive semidefinite matrix.
inline CMatrix project_psd(const CMatrix& A, Eigen::Index* rank = nullptr) {
  PositivePart p = positive_eigenpairs(A);
  if (rank != nullptr) *rank = p.values.size();
  if (p.values.size() == 0) return CMatrix::Zero(A.rows(), A.cols());
  return p.vectors * p.values.asDiagonal() * p.vectors.adjoint();
}

inline RVector hermitian_eigenvalues(const CMatrix& A) {
  return Eigen::SelfAdjointEigenSolver<CMatrix>(A, Eigen::EigenvaluesOnly).eigenvalues();
}

/// Spectral norm of a Hermitian matrix.
inline double hermitian_norm(const CMatrix& A) {
  RVector ev = hermitian_eigenvalues(A);
  return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
}

/// Spectral norm of a general matrix.
inline double operator_norm(const CMatrix& A) {
  Eigen::JacobiSVD<CMatrix> svd(A);
  return svd.singularValues()[0];
}

}  // namespace offgrid::linalg

#endif
