#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "scatnet/types.hpp"

namespace scatnet {

// ---------------------------------------------------------------------------
// Radix-2 FFT
// ---------------------------------------------------------------------------

/// Precomputed bit-reversal table and twiddles for a power-of-two length.
template <typename Scalar>
class FftPlan {
public:
  explicit FftPlan(int n) : n_(n) {
    if (!is_power_of_two(n)) {
      throw std::invalid_argument("FFT length must be a power of two, got " + std::to_string(n));
    }
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    reversed_.resize(n);
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
      reversed_[i] = r;
    }
    twiddles_.resize(std::max(1, n / 2));
    for (int k = 0; k < n / 2; ++k) {
      // Computed in long double so float plans get correctly rounded twiddles.
      const long double angle = -2.0L * std::numbers::pi_v<long double> * k / n;
      twiddles_[k] = {static_cast<Scalar>(std::cos(angle)), static_cast<Scalar>(std::sin(angle))};
    }
  }

  int size() const { return n_; }

  /// In-place unnormalized transform of `n` elements spaced by `stride`.
  void transform(std::complex<Scalar>* data, bool inverse) const {
    for (int i = 0; i < n_; ++i) {
      const int r = reversed_[i];
      if (i < r) std::swap(data[i], data[r]);
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len / 2;
      const int step = n_ / len;
      for (int start = 0; start < n_; start += len) {
        for (int k = 0; k < half; ++k) {
          std::complex<Scalar> w = twiddles_[k * step];
          if (inverse) w = std::conj(w);
          const std::complex<Scalar> a = data[start + k];
          const std::complex<Scalar> b = data[start + k + half] * w;
          data[start + k] = a + b;
          data[start + k + half] = a - b;
        }
      }
    }
  }

  /// Shared plan for length `n`; plans are immutable once built.
  static const FftPlan& get(int n) {
    static std::mutex mutex;
    static std::map<int, FftPlan> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, FftPlan(n)).first;
    return it->second;
  }

private:
  int n_;
  std::vector<int> reversed_;
  std::vector<std::complex<Scalar>> twiddles_;
};

namespace detail {

template <typename Scalar>
void fft2_inplace(ComplexImageT<Scalar>& img, bool inverse) {
  if (img.rows() != img.cols() || !is_power_of_two(img.rows())) {
    throw std::invalid_argument("dft2 requires a square power-of-two image, got " +
                                std::to_string(img.rows()) + "x" + std::to_string(img.cols()));
  }
  const int n = static_cast<int>(img.rows());
  const FftPlan<Scalar>& plan = FftPlan<Scalar>::get(n);
  for (int r = 0; r < n; ++r) plan.transform(img.data() + static_cast<long>(r) * n, inverse);
  std::vector<std::complex<Scalar>> column(n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) column[r] = img(r, c);
    plan.transform(column.data(), inverse);
    for (int r = 0; r < n; ++r) img(r, c) = column[r];
  }
}

}  // namespace detail

/// Unnormalized forward 2D DFT of a square power-of-two image.
template <typename Scalar>
ComplexImageT<Scalar> dft2(ComplexImageT<Scalar> img) {
  detail::fft2_inplace(img, false);
  return img;
}

template <typename Scalar>
ComplexImageT<Scalar> dft2(const RealImageT<Scalar>& img) {
  return dft2<Scalar>(ComplexImageT<Scalar>(img.template cast<std::complex<Scalar>>()));
}

/// Inverse of dft2 (carries the 1/side² factor).
template <typename Scalar>
ComplexImageT<Scalar> idft2(ComplexImageT<Scalar> spectrum) {
  detail::fft2_inplace(spectrum, true);
  spectrum /= static_cast<Scalar>(spectrum.size());
  return spectrum;
}

// ---------------------------------------------------------------------------
// Spectral folding and convolution
// ---------------------------------------------------------------------------

/// Folds a spectrum onto a grid 2^k times smaller:
///   out[m, n] = 4^{-k} Σ_{a,b} in[m + a·side/2^k, n + b·side/2^k].
/// This is the spectrum of the spatially decimated signal.
template <typename Derived>
auto fold_spectrum(const Eigen::ArrayBase<Derived>& in, int k) {
  using Scalar = typename Derived::Scalar;
  using Out = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const long side = in.rows();
  if (k < 0 || in.rows() != in.cols()) {
    throw std::invalid_argument("fold_spectrum: square input and k >= 0 required");
  }
  const long factor = 1L << k;
  if (side % factor != 0) {
    throw std::invalid_argument("fold_spectrum: 2^" + std::to_string(k) + " does not divide side " +
                                std::to_string(side));
  }
  const long out_side = side / factor;
  if (k == 0) return Out(in);
  Out out = Out::Zero(out_side, out_side);
  for (long a = 0; a < factor; ++a) {
    for (long b = 0; b < factor; ++b) {
      out += in.block(a * out_side, b * out_side, out_side, out_side);
    }
  }
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  out /= static_cast<Real>(factor * factor);
  return out;
}

/// (x ⋆ h)(2^k u) given X = dft2(x) and H = dft2(h) on the same grid.
/// The product is folded by 2^k in frequency and inverse transformed, so the
/// result is the circular convolution decimated by 2^k.
template <typename Scalar, typename FilterDerived>
ComplexImageT<Scalar> conv_subsample(const ComplexImageT<Scalar>& signal_spectrum,
                                     const Eigen::ArrayBase<FilterDerived>& filter, int k) {
  if (signal_spectrum.rows() != filter.rows() || signal_spectrum.cols() != filter.cols()) {
    throw std::invalid_argument("conv_subsample: filter resolution " +
                                std::to_string(filter.rows()) + " does not match signal " +
                                std::to_string(signal_spectrum.rows()));
  }
  ComplexImageT<Scalar> product = signal_spectrum * filter.template cast<std::complex<Scalar>>();
  return idft2<Scalar>(fold_spectrum(product, k));
}

/// Elementwise magnitude as a complex image with zero imaginary parts.
template <typename Scalar>
ComplexImageT<Scalar> modulus(const ComplexImageT<Scalar>& img) {
  return img.abs().template cast<std::complex<Scalar>>();
}

template <typename Scalar>
RealImageT<Scalar> modulus_real(const ComplexImageT<Scalar>& img) {
  return img.abs();
}

// ---------------------------------------------------------------------------
// Boundary handling
// ---------------------------------------------------------------------------

/// Placement of an H×W image inside a padded side×side canvas.
struct PadGeometry {
  int side = 0;
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

/// Offsets used by pad_reflect: centered, rounded down to a multiple of
/// `alignment` so that dyadic subsampling grids stay aligned with the image.
inline PadGeometry pad_geometry(int height, int width, int side, int alignment = 1) {
  if (!is_power_of_two(side)) {
    throw std::invalid_argument("pad target " + std::to_string(side) + " is not a power of two");
  }
  if (height > side || width > side || height <= 0 || width <= 0) {
    throw std::invalid_argument("image " + std::to_string(height) + "x" + std::to_string(width) +
                                " does not fit a " + std::to_string(side) + " canvas");
  }
  PadGeometry g{side, (side - height) / 2, (side - width) / 2, height, width};
  g.top -= g.top % alignment;
  g.left -= g.left % alignment;
  return g;
}

namespace detail {
/// Symmetric reflection (edge sample repeated) of index i into [0, n).
inline int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}
}  // namespace detail

/// Symmetric-reflection padding of `img` into the canvas described by `geom`.
template <typename Derived>
auto pad_reflect(const Eigen::ArrayBase<Derived>& img, const PadGeometry& geom) {
  using Scalar = typename Derived::Scalar;
  RealImageT<Scalar> out(geom.side, geom.side);
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  for (int r = 0; r < geom.side; ++r) {
    const int sr = detail::reflect_index(r - geom.top, h);
    for (int c = 0; c < geom.side; ++c) {
      out(r, c) = img(sr, detail::reflect_index(c - geom.left, w));
    }
  }
  return out;
}

template <typename Derived>
auto pad_reflect(const Eigen::ArrayBase<Derived>& img, int side) {
  return pad_reflect(img, pad_geometry(static_cast<int>(img.rows()), static_cast<int>(img.cols()), side));
}

/// Crops a grid subsampled by 2^k back to the cells covering the original
/// image region.
template <typename Derived>
auto unpad(const Eigen::ArrayBase<Derived>& grid, const PadGeometry& geom, int k) {
  using Scalar = typename Derived::Scalar;
  const int step = 1 << k;
  const int top = geom.top / step;
  const int left = geom.left / step;
  const int rows = (geom.height + step - 1) / step;
  const int cols = (geom.width + step - 1) / step;
  return RealImageT<Scalar>(grid.block(top, left, rows, cols));
}

/// Periodic rotation of a square grid by quarter_turns × 90° about index
/// (0, 0): out(u) = in(r_{-θ} u) with r_{-90°}(u1, u2) = (u2, -u1).
template <typename Derived>
auto rotate_quarter(const Eigen::ArrayBase<Derived>& in, int quarter_turns) {
  using Out = Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const long n = in.rows();
  if (in.cols() != n) throw std::invalid_argument("rotate_quarter: square grid required");
  const int q = ((quarter_turns % 4) + 4) % 4;
  Out out(n, n);
  for (long r = 0; r < n; ++r) {
    for (long c = 0; c < n; ++c) {
      long sr = r, sc = c;
      for (int t = 0; t < q; ++t) {
        const long nr = sc;
        const long nc = (n - sr) % n;
        sr = nr;
        sc = nc;
      }
      out(r, c) = in(sr, sc);
    }
  }
  return out;
}

}  // namespace scatnet
