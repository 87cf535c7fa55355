#include "scatnet/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "scatnet/spectral.hpp"

namespace scatnet {

namespace {

// Spectral translates summed on each side; the Gaussian tails beyond
// 2π·kTranslates are far below double precision for every supported σ.
constexpr int kTranslates = 3;

void check_index(int value, int bound, const char* name) {
  if (value < 0 || value >= bound) {
    throw std::invalid_argument(std::string(name) + " = " + std::to_string(value) +
                                " out of range [0, " + std::to_string(bound) + ")");
  }
}

// Samples f(ω) summed over translates on the N×N grid.
template <typename F>
RealImage sample_periodic(int n, F&& f) {
  RealImage out(n, n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int r = 0; r < n; ++r) {
    const double w1 = grid_frequency(r, n);
    for (int c = 0; c < n; ++c) {
      const double w2 = grid_frequency(c, n);
      double acc = 0.0;
      for (int a = -kTranslates; a <= kTranslates; ++a) {
        for (int b = -kTranslates; b <= kTranslates; ++b) {
          acc += f(w1 + two_pi * a, w2 + two_pi * b);
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

FilterBankConfig FilterBankConfig::standard(int J, int L, int N) {
  FilterBankConfig config;
  config.J = J;
  config.L = L;
  config.N = N;
  config.morlet_slant = L > 0 ? 8.0 / L : 1.0;
  return config;
}

void FilterBankConfig::validate() const {
  if (J < 1) throw std::invalid_argument("J must be >= 1, got " + std::to_string(J));
  if (L < 1) throw std::invalid_argument("L must be >= 1, got " + std::to_string(L));
  if (J > 20 || !is_power_of_two(N) || N < (2 << J)) {
    throw std::invalid_argument("N = " + std::to_string(N) + " must be a power of two of at least 2^(J+1) = " +
                                std::to_string(J > 20 ? 0 : 2 << J));
  }
  if (!(morlet_sigma > 0.0)) throw std::invalid_argument("morlet_sigma must be positive");
  if (!(morlet_xi > 0.0 && morlet_xi < std::numbers::pi)) {
    throw std::invalid_argument("morlet_xi must lie in (0, pi)");
  }
  if (!(morlet_slant > 0.0)) throw std::invalid_argument("morlet_slant must be positive");
  if (!(lowpass_sigma > 0.0)) throw std::invalid_argument("lowpass_sigma must be positive");
}

FourierFilter build_morlet(int j, int theta_index, const FilterBankConfig& config) {
  config.validate();
  check_index(j, config.J, "j");
  check_index(theta_index, config.L, "theta_index");

  const double theta = 2.0 * std::numbers::pi * theta_index / config.L;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double scale = std::ldexp(1.0, j);
  const double sigma2 = config.morlet_sigma * config.morlet_sigma;
  const double inv_slant2 = 1.0 / (config.morlet_slant * config.morlet_slant);
  const double xi = config.morlet_xi;

  // Spectral coordinates in the wavelet's own frame: ν = 2^j r_{-θ} ω.
  auto frame = [&](double w1, double w2) {
    return std::pair{scale * (ct * w1 + st * w2), scale * (-st * w1 + ct * w2)};
  };
  auto gabor = [&](double w1, double w2) {
    const auto [v1, v2] = frame(w1, w2);
    return std::exp(-0.5 * sigma2 * ((v1 - xi) * (v1 - xi) + v2 * v2 * inv_slant2));
  };
  auto envelope = [&](double w1, double w2) {
    const auto [v1, v2] = frame(w1, w2);
    return std::exp(-0.5 * sigma2 * (v1 * v1 + v2 * v2 * inv_slant2));
  };

  const int n = config.N;
  RealImage g = sample_periodic(n, gabor);
  RealImage e = sample_periodic(n, envelope);
  const double beta = g(0, 0) / e(0, 0);
  return FourierFilter{0, g - beta * e};
}

FourierFilter build_gaussian(const FilterBankConfig& config) {
  config.validate();
  const double width = config.lowpass_sigma * std::ldexp(1.0, config.J);
  const double w2 = width * width;
  RealImage values = sample_periodic(config.N, [&](double a, double b) {
    return std::exp(-0.5 * w2 * (a * a + b * b));
  });
  values /= values(0, 0);
  return FourierFilter{0, values};
}

FourierFilter periodize(const FourierFilter& filter, int r) {
  if (r < 0) throw std::invalid_argument("periodize: negative resolution step");
  const long factor = 1L << r;
  if (filter.side() % factor != 0 || filter.side() / factor < 1) {
    throw std::invalid_argument("periodize: 2^" + std::to_string(r) +
                                " exceeds the filter side " + std::to_string(filter.side()));
  }
  return FourierFilter{filter.resolution + r, fold_spectrum(filter.values, r)};
}

FilterBank::FilterBank(const FilterBankConfig& config) : config_(config) {
  config_.validate();
  std::vector<FourierFilter> wavelets;
  wavelets.reserve(config_.J * config_.L);
  for (int j = 0; j < config_.J; ++j) {
    for (int t = 0; t < config_.L; ++t) wavelets.push_back(build_morlet(j, t, config_));
  }
  FourierFilter lowpass = build_gaussian(config_);

  // Scale the wavelets so that max_ω (|φ̂|² + g² Σ|ψ̂|²) = 1, the value at ω = 0.
  RealImage energy = RealImage::Zero(config_.N, config_.N);
  for (const auto& w : wavelets) energy += w.values.square();
  const RealImage phi2 = lowpass.values.square();
  double gain2 = std::numeric_limits<double>::infinity();
  for (long i = 0; i < energy.size(); ++i) {
    if (energy(i) > 1e-12) gain2 = std::min(gain2, (1.0 - phi2(i)) / energy(i));
  }
  if (std::isfinite(gain2) && gain2 > 0.0) {
    wavelet_gain_ = std::sqrt(gain2);
    for (auto& w : wavelets) w.values *= wavelet_gain_;
  }
  populate(std::move(wavelets), std::move(lowpass));
}

FilterBank::FilterBank(const FilterBankConfig& config, std::vector<FourierFilter> wavelets,
                       FourierFilter lowpass)
    : config_(config) {
  config_.validate();
  if (static_cast<int>(wavelets.size()) != config_.J * config_.L) {
    throw std::invalid_argument("expected J*L = " + std::to_string(config_.J * config_.L) +
                                " wavelets, got " + std::to_string(wavelets.size()));
  }
  auto check = [&](const FourierFilter& f) {
    if (f.resolution != 0 || f.side() != config_.N || f.values.cols() != config_.N) {
      throw std::invalid_argument("filters must be given at resolution 0 with side N");
    }
  };
  for (const auto& w : wavelets) check(w);
  check(lowpass);
  populate(std::move(wavelets), std::move(lowpass));
}

void FilterBank::populate(std::vector<FourierFilter> wavelets, FourierFilter lowpass) {
  psi_.clear();
  phi_.clear();
  for (int j = 0; j < config_.J; ++j) {
    for (int t = 0; t < config_.L; ++t) {
      std::vector<FourierFilter> copies;
      FourierFilter& base = wavelets[j * config_.L + t];
      for (int r = 1; r <= j; ++r) copies.push_back(periodize(base, r));
      copies.insert(copies.begin(), std::move(base));
      psi_.push_back(std::move(copies));
    }
  }
  for (int r = 1; r <= config_.J; ++r) phi_.push_back(periodize(lowpass, r));
  phi_.insert(phi_.begin(), std::move(lowpass));
}

const FourierFilter& FilterBank::psi(int j, int theta_index, int resolution) const {
  check_index(j, config_.J, "j");
  check_index(theta_index, config_.L, "theta_index");
  check_index(resolution, j + 1, "psi resolution");
  return psi_[j * config_.L + theta_index][resolution];
}

const FourierFilter& FilterBank::phi(int resolution) const {
  check_index(resolution, config_.J + 1, "phi resolution");
  return phi_[resolution];
}

LittlewoodPaley littlewood_paley(const FilterBank& bank, double band_limit) {
  const auto& config = bank.config();
  const int n = config.N;
  RealImage psi2 = RealImage::Zero(n, n);
  for (int j = 0; j < config.J; ++j) {
    for (int t = 0; t < config.L; ++t) psi2 += bank.psi(j, t, 0).values.square();
  }
  // ½ (|ψ̂(ω)|² + |ψ̂(-ω)|²): -ω is index (n - r) mod n.
  RealImage mirrored(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) mirrored(r, c) = psi2((n - r) % n, (n - c) % n);
  }
  LittlewoodPaley lp;
  lp.curve = bank.phi(0).values.square() + 0.5 * (psi2 + mirrored);
  std::tie(lp.lp_min, lp.lp_max) = lp_extrema(lp.curve, 0.0, band_limit);
  return lp;
}

std::pair<double, double> lp_extrema(const RealImage& curve, double lo, double hi) {
  const int n = static_cast<int>(curve.rows());
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double radius = std::hypot(grid_frequency(r, n), grid_frequency(c, n));
      if (radius < lo || radius > hi) continue;
      mn = std::min(mn, curve(r, c));
      mx = std::max(mx, curve(r, c));
    }
  }
  if (!std::isfinite(mn)) throw std::invalid_argument("lp_extrema: empty frequency band");
  return {mn, mx};
}

}  // namespace scatnet
