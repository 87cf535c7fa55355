#pragma once

#include <numbers>
#include <vector>

#include "scatnet/types.hpp"

namespace scatnet {

struct FilterBankConfig {
  int J = 2;   ///< number of scales; averaging window 2^J
  int L = 8;   ///< number of orientations θ_t = 2πt/L over the full circle
  int N = 32;  ///< padded side length
  double morlet_sigma = 0.8;
  double morlet_xi = 3.0 * std::numbers::pi / 4.0;
  double morlet_slant = 1.0;
  /// Spatial width of φ_J is lowpass_sigma · 2^J.
  double lowpass_sigma = 0.5;

  /// Defaults for a given (J, L, N). The slant is tied to L as 8/L: L
  /// orientations over the full circle have the angular density of L/2
  /// orientations over a half circle.
  static FilterBankConfig standard(int J, int L, int N);

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;

  bool operator==(const FilterBankConfig&) const = default;
};

/// Real-valued DFT samples of a filter on the grid of resolution r
/// (side N / 2^r), frequency origin at (0, 0).
struct FourierFilter {
  int resolution = 0;
  RealImage values;

  int side() const { return static_cast<int>(values.rows()); }
};

/// Dilated and rotated Morlet wavelet ψ_{j,θ} sampled directly in frequency.
/// Its spectrum is ψ̂(2^j r_{-θ} ω) where the mother wavelet is
///   ψ̂(ω) = exp(-σ²/2 ((ω1 - ξ)² + ω2²/s²)) - β exp(-σ²/2 (ω1² + ω2²/s²))
/// summed over the spectral translates ω + 2π(a, b); β makes ψ̂(0) = 0.
FourierFilter build_morlet(int j, int theta_index, const FilterBankConfig& config);

/// Isotropic Gaussian φ_J of spatial width lowpass_sigma·2^J, unit DC gain.
FourierFilter build_gaussian(const FilterBankConfig& config);

/// Folds the filter spectrum by 2^r, giving the spectrum of its impulse
/// response decimated by 2^r. The result has resolution filter.resolution + r.
FourierFilter periodize(const FourierFilter& filter, int r);

/// Immutable family {ψ_{j,θ}} ∪ {φ_J} with every periodized copy needed by
/// the scattering cascade: ψ_{j,θ} at resolutions 0..j, φ_J at 0..J.
class FilterBank {
public:
  explicit FilterBank(const FilterBankConfig& config);

  /// Assembles a bank from explicit resolution-0 filters (tests, file I/O).
  FilterBank(const FilterBankConfig& config, std::vector<FourierFilter> wavelets,
             FourierFilter lowpass);

  const FilterBankConfig& config() const { return config_; }

  const FourierFilter& psi(int j, int theta_index, int resolution) const;
  const FourierFilter& phi(int resolution) const;

  /// Number of stored resolutions for wavelet (j, θ): j + 1.
  int psi_resolutions(int j) const { return j + 1; }

  /// Global factor applied to every wavelet so the Littlewood-Paley sum peaks
  /// at one.
  double wavelet_gain() const { return wavelet_gain_; }

private:
  void populate(std::vector<FourierFilter> wavelets, FourierFilter lowpass);

  FilterBankConfig config_;
  double wavelet_gain_ = 1.0;
  std::vector<std::vector<FourierFilter>> psi_;  // index j*L + θ, then resolution
  std::vector<FourierFilter> phi_;
};

struct LittlewoodPaley {
  /// |φ̂_J(ω)|² + ½ Σ_{j,θ} (|ψ̂_{j,θ}(ω)|² + |ψ̂_{j,θ}(-ω)|²) on the N×N grid.
  RealImage curve;
  double lp_min = 0.0;
  double lp_max = 0.0;
};

/// Frame diagnostic at resolution 0. lp_min / lp_max are taken over
/// frequencies with |ω| ≤ band_limit (radians).
LittlewoodPaley littlewood_paley(const FilterBank& bank,
                                 double band_limit = std::numbers::pi * 7.0 / 8.0);

/// Extrema of an LP curve over the annulus lo ≤ |ω| ≤ hi.
std::pair<double, double> lp_extrema(const RealImage& curve, double lo, double hi);

/// Signed angular frequency (radians) of DFT index k on a grid of size n.
inline double grid_frequency(int k, int n) {
  const int signed_k = k < n / 2 ? k : k - n;
  return 2.0 * std::numbers::pi * signed_k / n;
}

}  // namespace scatnet
