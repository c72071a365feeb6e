#ifndef OFFGRID_CORE_HPP
#define OFFGRID_CORE_HPP

// Index sets, atoms, signal synthesis, Toeplitz construction and frequency
// geometry on the unit circle.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "offgrid/error.hpp"

namespace offgrid {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// e^{i theta}
inline cplx cis(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Reduces a frequency to [0, 1).
inline double wrap_unit(double f) {
  double r = f - std::floor(f);
  if (r >= 1.0) r = 0.0;  // f slightly below an integer can round up
  return r;
}

/// Reduces a frequency difference to (-1/2, 1/2].
inline double wrap_centered(double d) {
  double r = d - std::floor(d);
  if (r > 0.5) r -= 1.0;
  return r;
}

/// The time indices J of a sampled signal: either {0..n-1} or {-2M..2M}.
class IndexSet {
 public:
  enum class Kind { FirstN, Symmetric };

  static IndexSet first_n(int n) {
    require(n >= 2, ErrorKind::Domain, "FirstN index set needs n >= 2, got " + std::to_string(n));
    return IndexSet(Kind::FirstN, n);
  }

  static IndexSet symmetric(int M) {
    require(M >= 1, ErrorKind::Domain, "Symmetric index set needs M >= 1, got " + std::to_string(M));
    return IndexSet(Kind::Symmetric, M);
  }

  Kind kind() const { return kind_; }
  /// n for FirstN, M for Symmetric.
  int parameter() const { return param_; }
  int size() const { return kind_ == Kind::FirstN ? param_ : 4 * param_ + 1; }
  int first() const { return kind_ == Kind::FirstN ? 0 : -2 * param_; }
  int last() const { return first() + size() - 1; }

  /// Index value j at position p.
  int at(int p) const { return first() + p; }
  /// Position of index value j.
  int position(int j) const { return j - first(); }
  bool contains(int j) const { return j >= first() && j <= last(); }

  std::vector<int> indices() const {
    std::vector<int> out(static_cast<std::size_t>(size()));
    for (int p = 0; p < size(); ++p) out[static_cast<std::size_t>(p)] = at(p);
    return out;
  }

  bool operator==(const IndexSet&) const = default;

 private:
  IndexSet(Kind k, int p) : kind_(k), param_(p) {}
  Kind kind_;
  int param_;
};

struct SpectralEntry {
  double frequency;
  cplx coefficient;
};

/// A line spectrum: frequencies in [0,1) with nonzero complex coefficients.
class SpectralModel {
 public:
  SpectralModel() = default;

  /// Frequencies are reduced mod 1. Throws InvalidModel on duplicate
  /// frequencies (wrap-around) or zero coefficients.
  explicit SpectralModel(std::vector<SpectralEntry> entries) : entries_(std::move(entries)) {
    for (auto& e : entries_) {
      require(std::isfinite(e.frequency), ErrorKind::InvalidModel, "non-finite frequency");
      e.frequency = wrap_unit(e.frequency);
      require(std::abs(e.coefficient) > 0.0 && std::isfinite(std::abs(e.coefficient)),
              ErrorKind::InvalidModel, "coefficients must be finite and nonzero");
    }
    for (std::size_t a = 0; a < entries_.size(); ++a)
      for (std::size_t b = a + 1; b < entries_.size(); ++b) {
        double d = std::abs(entries_[a].frequency - entries_[b].frequency);
        d = std::min(d, 1.0 - d);
        // 1e-14 absorbs rounding from the mod-1 reduction (1.1 vs 0.1).
        require(d > 1e-14, ErrorKind::InvalidModel,
                "duplicate frequency " + std::to_string(entries_[a].frequency));
      }
  }

  SpectralModel(const std::vector<double>& freqs, const std::vector<cplx>& coeffs)
      : SpectralModel(zip(freqs, coeffs)) {}

  const std::vector<SpectralEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::vector<double> frequencies() const {
    std::vector<double> f;
    f.reserve(entries_.size());
    for (const auto& e : entries_) f.push_back(e.frequency);
    return f;
  }

  std::vector<cplx> coefficients() const {
    std::vector<cplx> c;
    c.reserve(entries_.size());
    for (const auto& e : entries_) c.push_back(e.coefficient);
    return c;
  }

  /// Sum of coefficient magnitudes, an upper bound on the atomic norm.
  double l1() const {
    double s = 0.0;
    for (const auto& e : entries_) s += std::abs(e.coefficient);
    return s;
  }

 private:
  static std::vector<SpectralEntry> zip(const std::vector<double>& f, const std::vector<cplx>& c) {
    require(f.size() == c.size(), ErrorKind::InvalidModel, "frequency/coefficient count mismatch");
    std::vector<SpectralEntry> out;
    out.reserve(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) out.push_back({f[k], c[k]});
    return out;
  }

  std::vector<SpectralEntry> entries_;
};

/// A full-length signal over an index set.
struct ComplexSignal {
  IndexSet index_set;
  CVector samples;

  ComplexSignal(IndexSet J, CVector x) : index_set(J), samples(std::move(x)) {
    require(samples.size() == J.size(), ErrorKind::Precondition, "sample count must equal |J|");
  }

  cplx operator[](int j) const { return samples[index_set.position(j)]; }
  double norm() const { return samples.norm(); }
};

/// Observed samples on a sorted mask T of J.
class SampleSet {
 public:
  SampleSet(IndexSet J, std::vector<int> mask, CVector values)
      : index_set_(J), mask_(std::move(mask)), values_(std::move(values)) {
    require(static_cast<Eigen::Index>(mask_.size()) == values_.size(), ErrorKind::Precondition,
            "mask and value counts differ");
    for (std::size_t i = 0; i < mask_.size(); ++i) {
      require(J.contains(mask_[i]), ErrorKind::InvalidModel,
              "mask index " + std::to_string(mask_[i]) + " outside J");
      if (i > 0) {
        require(mask_[i] != mask_[i - 1], ErrorKind::InvalidModel, "duplicate mask index");
        require(mask_[i] > mask_[i - 1], ErrorKind::InvalidModel, "mask must be sorted");
      }
    }
  }

  /// Observe `x` on `mask` (sorted internally).
  static SampleSet observe(const ComplexSignal& x, std::vector<int> mask) {
    std::sort(mask.begin(), mask.end());
    CVector v(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) {
      require(x.index_set.contains(mask[i]), ErrorKind::InvalidModel, "mask index outside J");
      v[static_cast<Eigen::Index>(i)] = x[mask[i]];
    }
    return SampleSet(x.index_set, std::move(mask), std::move(v));
  }

  static SampleSet full(const ComplexSignal& x) { return observe(x, x.index_set.indices()); }

  const IndexSet& index_set() const { return index_set_; }
  const std::vector<int>& mask() const { return mask_; }
  const CVector& values() const { return values_; }
  int m() const { return static_cast<int>(mask_.size()); }

  /// Positions of the mask inside J.
  std::vector<int> positions() const {
    std::vector<int> p(mask_.size());
    for (std::size_t i = 0; i < mask_.size(); ++i) p[i] = index_set_.position(mask_[i]);
    return p;
  }

  /// Boolean membership over positions of J.
  std::vector<bool> membership() const {
    std::vector<bool> in(static_cast<std::size_t>(index_set_.size()), false);
    for (int j : mask_) in[static_cast<std::size_t>(index_set_.position(j))] = true;
    return in;
  }

 private:
  IndexSet index_set_;
  std::vector<int> mask_;
  CVector values_;
};

/// Generator u of the Hermitian Toeplitz matrix whose first column is u.
class HermitianToeplitz {
 public:
  explicit HermitianToeplitz(CVector u) : u_(std::move(u)) {
    require(u_.size() >= 1, ErrorKind::Precondition, "Toeplitz generator must be nonempty");
    u_[0] = cplx(u_[0].real(), 0.0);
  }

  const CVector& generator() const { return u_; }
  Eigen::Index dimension() const { return u_.size(); }
  double trace() const { return static_cast<double>(u_.size()) * u_[0].real(); }

  CMatrix matrix() const {
    const Eigen::Index n = u_.size();
    CMatrix T(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) T(j, k) = j >= k ? u_[j - k] : std::conj(u_[k - j]);
    return T;
  }

 private:
  CVector u_;
};

inline CMatrix toeplitz_matrix(const CVector& u) { return HermitianToeplitz(u).matrix(); }

/// [a(f, phi)]_j = exp(i(2 pi f j + phi)), j in J.
inline ComplexSignal atom(double f, double phi, const IndexSet& J) {
  require(f >= 0.0 && f < 1.0, ErrorKind::Domain, "atom frequency must lie in [0,1)");
  require(phi >= 0.0 && phi < kTwoPi, ErrorKind::Domain, "atom phase must lie in [0,2pi)");
  CVector a(J.size());
  for (int p = 0; p < J.size(); ++p) a[p] = cis(kTwoPi * f * J.at(p) + phi);
  return ComplexSignal(J, std::move(a));
}

/// Column a(f,0) over an arbitrary list of integer indices. No range checks
/// on f so that it can be used inside iterative refinement.
inline CVector steering(double f, const std::vector<int>& idx) {
  CVector a(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) a[static_cast<Eigen::Index>(i)] = cis(kTwoPi * f * idx[i]);
  return a;
}

/// x_j = sum_k c_k exp(i 2 pi f_k j).
inline ComplexSignal synthesize(const SpectralModel& model, const IndexSet& J) {
  CVector x = CVector::Zero(J.size());
  for (const auto& e : model.entries())
    for (int p = 0; p < J.size(); ++p) x[p] += e.coefficient * cis(kTwoPi * e.frequency * J.at(p));
  return ComplexSignal(J, std::move(x));
}

inline double wrap_distance(double f1, double f2) {
  double d = std::abs(wrap_unit(f1) - wrap_unit(f2));
  return std::min(d, 1.0 - d);
}

/// Minimum pairwise wrap distance; +inf for fewer than two frequencies.
inline double min_separation(const std::vector<double>& freqs) {
  double best = std::numeric_limits<double>::infinity();
  if (freqs.size() < 2) return best;
  std::vector<double> f(freqs.size());
  std::transform(freqs.begin(), freqs.end(), f.begin(), wrap_unit);
  std::sort(f.begin(), f.end());
  for (std::size_t k = 1; k < f.size(); ++k) best = std::min(best, f[k] - f[k - 1]);
  best = std::min(best, 1.0 - (f.back() - f.front()));
  return best;
}

// ---------------------------------------------------------------------------
// Re-centering {0..n-1} onto {-2M..2M}, n = 4M + n0 with M = floor((n-1)/4).

struct SymmetricShift {
  int M;
  int n0;
  /// Indices of {0..n-1} beyond the symmetric window (4M+1 .. n-1).
  std::vector<int> dropped;
  int offset() const { return 2 * M; }
};

inline SymmetricShift symmetric_shift_for(int n) {
  require(n >= 5, ErrorKind::Size, "symmetric reduction needs n >= 5, got " + std::to_string(n));
  SymmetricShift s{(n - 1) / 4, 0, {}};
  s.n0 = n - 4 * s.M;
  for (int j = 4 * s.M + 1; j < n; ++j) s.dropped.push_back(j);
  return s;
}

struct ShiftedSignal {
  ComplexSignal signal;
  SymmetricShift shift;
};

/// x~_j = x_{j+2M}, j in {-2M..2M}.
inline ShiftedSignal shift_to_symmetric(const ComplexSignal& x) {
  require(x.index_set.kind() == IndexSet::Kind::FirstN, ErrorKind::Precondition,
          "shift_to_symmetric expects a FirstN signal");
  SymmetricShift s = symmetric_shift_for(x.index_set.size());
  IndexSet J = IndexSet::symmetric(s.M);
  return {ComplexSignal(J, x.samples.head(J.size())), s};
}

struct ShiftedSamples {
  SampleSet samples;
  SymmetricShift shift;
  /// Observed indices (in {0..n-1}) that fell outside the symmetric window.
  std::vector<int> dropped_observed;
};

inline ShiftedSamples shift_to_symmetric(const SampleSet& obs) {
  require(obs.index_set().kind() == IndexSet::Kind::FirstN, ErrorKind::Precondition,
          "shift_to_symmetric expects FirstN samples");
  SymmetricShift s = symmetric_shift_for(obs.index_set().size());
  std::vector<int> mask;
  std::vector<cplx> vals;
  std::vector<int> dropped;
  for (int i = 0; i < obs.m(); ++i) {
    int j = obs.mask()[static_cast<std::size_t>(i)];
    if (j <= 4 * s.M) {
      mask.push_back(j - s.offset());
      vals.push_back(obs.values()[i]);
    } else {
      dropped.push_back(j);
    }
  }
  CVector v = Eigen::Map<CVector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return {SampleSet(IndexSet::symmetric(s.M), std::move(mask), std::move(v)), s, std::move(dropped)};
}

/// Inverse of shift_to_symmetric on the retained window; dropped indices are
/// filled from `tail` when given, zero otherwise.
inline ComplexSignal shift_from_symmetric(const ComplexSignal& xs, int n, const CVector* tail = nullptr) {
  require(xs.index_set.kind() == IndexSet::Kind::Symmetric, ErrorKind::Precondition,
          "shift_from_symmetric expects a Symmetric signal");
  SymmetricShift s = symmetric_shift_for(n);
  require(s.M == xs.index_set.parameter(), ErrorKind::Precondition, "window size does not match n");
  CVector x = CVector::Zero(n);
  x.head(xs.samples.size()) = xs.samples;
  if (tail != nullptr) {
    require(tail->size() == static_cast<Eigen::Index>(s.dropped.size()), ErrorKind::Precondition,
            "tail length must equal the dropped index count");
    x.tail(tail->size()) = *tail;
  }
  return ComplexSignal(IndexSet::first_n(n), std::move(x));
}

/// Model seen from the symmetric window: c~_k = c_k exp(i 2 pi f_k 2M).
inline SpectralModel shift_model_to_symmetric(const SpectralModel& model, int M) {
  std::vector<SpectralEntry> e = model.entries();
  for (auto& x : e) x.coefficient *= cis(kTwoPi * x.frequency * 2.0 * M);
  return SpectralModel(std::move(e));
}

}  // namespace offgrid

#endif
