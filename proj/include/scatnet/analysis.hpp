#pragma once

#include <vector>

#include <Eigen/Core>

#include "scatnet/encoder.hpp"
#include "scatnet/filterbank.hpp"
#include "scatnet/scattering.hpp"

namespace scatnet {

/// First local layer F1 (K × colors·paths) reindexed by scattering order.
///
/// Column layouts, matching enumerate_paths:
///   f0: c
///   f1: (c·J + j1)·L + θ1
///   f2: ((c·P2 + pair)·L + θ1)·L + θ2, pair enumerating j1 < j2 in
///       lexicographic order and P2 = J(J−1)/2.
template <typename Scalar>
struct AngularOperatorViewT {
  int J = 0;
  int L = 0;
  int colors = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> f0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> f1;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> f2;

  long K() const { return f1.rows(); }
  int pairs() const { return J * (J - 1) / 2; }
};

using AngularOperatorView = AngularOperatorViewT<double>;
using AngularSpectrumView = AngularOperatorViewT<std::complex<double>>;

AngularOperatorView split_first_layer(const Eigen::MatrixXd& weights, int J, int L, int colors);
AngularOperatorView split_first_layer(const SleModel& model, int J, int L, int colors);

/// Inverse of split_first_layer.
Eigen::MatrixXd reassemble_first_layer(const AngularOperatorView& view);

struct NormalizedView {
  AngularOperatorView view;
  /// Rows (order, k) whose norm was zero and were left unchanged.
  std::vector<std::pair<int, long>> zero_filters;
};

/// Scales every row of f0, f1 and f2 to unit ℓ2 norm independently.
NormalizedView normalize_view(const AngularOperatorView& view);

/// Unnormalized DFT of f1 along θ1 and of f2 along (θ1, θ2); f0 is copied.
AngularSpectrumView angular_dft(const AngularOperatorView& view);

/// Inverse of angular_dft (1/L and 1/L² factors); real parts are returned.
AngularOperatorView inverse_angular_dft(const AngularSpectrumView& spectrum);

struct SparsifyResult {
  SleModel model;
  double sparsity = 0.0;  ///< fraction of f1/f2 Fourier coefficients set to zero
  double epsilon = 0.0;
};

/// Zeroes the angular Fourier coefficients of F1's order-1/2 blocks with
/// magnitude ≤ epsilon and reinstalls the inverse transform into a copy of
/// the model. When nothing is zeroed the copy is exact.
SparsifyResult threshold_sparsify(const SleModel& model, int J, int L, int colors, double epsilon);

/// Smallest threshold whose sparsification zeroes at least `fraction` of the
/// f1/f2 Fourier coefficients.
double sparsity_threshold(const SleModel& model, int J, int L, int colors, double fraction);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long> counts;
};

Histogram magnitude_histogram(const Eigen::ArrayXd& magnitudes, int bins);

struct SpectrumReport {
  Eigen::VectorXd omega1;  ///< Ω1(ω1), ω1 ∈ [0, L)
  Eigen::MatrixXd omega2;  ///< Ω2(ω1, ω2)
  Histogram histogram1;    ///< |F̂1¹| amplitudes
  Histogram histogram2;    ///< |F̂1²| amplitudes
};

/// Ω1(ω1) = Σ_{k,c,j1} |F̂¹(k,c,j1,ω1)|², Ω2(ω1,ω2) = Σ_{k,c,j1,j2} |F̂²|².
SpectrumReport omega_spectra(const AngularSpectrumView& spectrum, int histogram_bins = 50);

/// Share of Ω1 carried by ω1 ∈ {−1, 0, 1}.
double low_frequency_share(const SpectrumReport& report);

struct CovarianceReport {
  int quarter_turns = 0;
  double order1_error = 0.0;  ///< relative ℓ2 error of the S1 identity
  double order2_error = 0.0;  ///< relative ℓ2 error of the S2 identity (θ1 and θ2 shifted)
  double order2_theta1_only_error = 0.0;  ///< S2 with only θ1 shifted
};

/// Compares S(r·x) against the rotated and angle-shifted S x for a square
/// N×N image on the periodic grid, rotating about pixel (0, 0) by
/// quarter_turns·90°. Angle indices shift by quarter_turns·L/4 modulo L.
CovarianceReport covariance_check(const RealImage& plane, const FilterBank& bank, int quarter_turns);

}  // namespace scatnet
