#include "scatnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

#include "scatnet/spectral.hpp"

namespace scatnet {

namespace {

using CMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

// Length-L DFT matrix, unnormalized; the inverse uses conj and 1/L.
CMatrix dft_matrix(int L, bool inverse) {
  CMatrix m(L, L);
  const double sign = inverse ? 1.0 : -1.0;
  for (int w = 0; w < L; ++w) {
    for (int t = 0; t < L; ++t) {
      // Reduce w·t modulo L first so the angle stays exact for large products.
      const double angle = sign * 2.0 * std::numbers::pi * ((w * t) % L) / L;
      m(w, t) = {std::cos(angle), std::sin(angle)};
    }
  }
  if (inverse) m /= static_cast<double>(L);
  return m;
}

// Applies `op` along one angle axis. Columns are laid out as
// (outer, axis, inner) with inner varying fastest.
template <typename In>
CMatrix transform_axis(const In& block, const CMatrix& op, int L, int inner) {
  const long groups = block.cols() / (static_cast<long>(L) * inner);
  CMatrix out(block.rows(), block.cols());
  CMatrix slice(block.rows(), L);
  for (long g = 0; g < groups; ++g) {
    for (int i = 0; i < inner; ++i) {
      for (int t = 0; t < L; ++t) slice.col(t) = block.col((g * L + t) * inner + i).template cast<std::complex<double>>();
      const CMatrix result = slice * op.transpose();
      for (int w = 0; w < L; ++w) out.col((g * L + w) * inner + i) = result.col(w);
    }
  }
  return out;
}

void check_view_shape(long cols1, long cols2, long cols0, int J, int L, int colors) {
  const long pairs = static_cast<long>(J) * (J - 1) / 2;
  if (cols0 != colors || cols1 != static_cast<long>(colors) * J * L ||
      cols2 != static_cast<long>(colors) * pairs * L * L) {
    throw std::invalid_argument("angular view has inconsistent block widths");
  }
}

}  // namespace

AngularOperatorView split_first_layer(const Eigen::MatrixXd& weights, int J, int L, int colors) {
  const long per_color = path_count(J, L);
  if (weights.cols() != colors * per_color) {
    throw std::invalid_argument("split_first_layer: F1 has " + std::to_string(weights.cols()) +
                                " inputs, expected channel_count = " +
                                std::to_string(colors * per_color));
  }
  AngularOperatorView view;
  view.J = J;
  view.L = L;
  view.colors = colors;
  const long K = weights.rows();
  const long n1 = static_cast<long>(J) * L;
  const long n2 = per_color - 1 - n1;
  view.f0.resize(K, colors);
  view.f1.resize(K, colors * n1);
  view.f2.resize(K, colors * n2);
  for (int c = 0; c < colors; ++c) {
    const long base = c * per_color;
    view.f0.col(c) = weights.col(base);
    view.f1.middleCols(c * n1, n1) = weights.middleCols(base + 1, n1);
    view.f2.middleCols(c * n2, n2) = weights.middleCols(base + 1 + n1, n2);
  }
  return view;
}

AngularOperatorView split_first_layer(const SleModel& model, int J, int L, int colors) {
  if (model.local.empty()) throw std::invalid_argument("split_first_layer: model has no local layers");
  return split_first_layer(model.local.front().weight, J, L, colors);
}

Eigen::MatrixXd reassemble_first_layer(const AngularOperatorView& view) {
  const int colors = view.colors;
  check_view_shape(view.f1.cols(), view.f2.cols(), view.f0.cols(), view.J, view.L, colors);
  const long n1 = view.f1.cols() / colors;
  const long n2 = view.f2.cols() / colors;
  const long per_color = 1 + n1 + n2;
  Eigen::MatrixXd weights(view.f1.rows(), colors * per_color);
  for (int c = 0; c < colors; ++c) {
    const long base = c * per_color;
    weights.col(base) = view.f0.col(c);
    weights.middleCols(base + 1, n1) = view.f1.middleCols(c * n1, n1);
    weights.middleCols(base + 1 + n1, n2) = view.f2.middleCols(c * n2, n2);
  }
  return weights;
}

NormalizedView normalize_view(const AngularOperatorView& view) {
  NormalizedView out{view, {}};
  auto normalize = [&](Eigen::MatrixXd& block, int order) {
    for (long k = 0; k < block.rows(); ++k) {
      const double norm = block.row(k).norm();
      if (norm > 0.0) {
        block.row(k) /= norm;
      } else if (block.cols() > 0) {
        out.zero_filters.emplace_back(order, k);
      }
    }
  };
  normalize(out.view.f0, 0);
  normalize(out.view.f1, 1);
  normalize(out.view.f2, 2);
  return out;
}

AngularSpectrumView angular_dft(const AngularOperatorView& view) {
  const int L = view.L;
  const CMatrix op = dft_matrix(L, false);
  AngularSpectrumView s;
  s.J = view.J;
  s.L = L;
  s.colors = view.colors;
  s.f0 = view.f0.cast<std::complex<double>>();
  s.f1 = transform_axis(view.f1, op, L, 1);
  // θ2 is the fastest axis, then θ1.
  s.f2 = transform_axis(transform_axis(view.f2, op, L, 1), op, L, L);
  return s;
}

AngularOperatorView inverse_angular_dft(const AngularSpectrumView& spectrum) {
  const int L = spectrum.L;
  const CMatrix op = dft_matrix(L, true);
  AngularOperatorView v;
  v.J = spectrum.J;
  v.L = L;
  v.colors = spectrum.colors;
  v.f0 = spectrum.f0.real();
  v.f1 = transform_axis(spectrum.f1, op, L, 1).real();
  v.f2 = transform_axis(transform_axis(spectrum.f2, op, L, 1), op, L, L).real();
  return v;
}

SparsifyResult threshold_sparsify(const SleModel& model, int J, int L, int colors, double epsilon) {
  SparsifyResult result{model, 0.0, epsilon};
  AngularSpectrumView spectrum = angular_dft(split_first_layer(model, J, L, colors));
  long zeroed = 0;
  auto threshold = [&](auto& block) {
    for (long i = 0; i < block.size(); ++i) {
      if (std::abs(block(i)) <= epsilon) {
        block(i) = 0.0;
        ++zeroed;
      }
    }
  };
  threshold(spectrum.f1);
  threshold(spectrum.f2);
  const long total = spectrum.f1.size() + spectrum.f2.size();
  result.sparsity = total > 0 ? static_cast<double>(zeroed) / static_cast<double>(total) : 0.0;
  if (zeroed > 0) {
    result.model.local.front().weight = reassemble_first_layer(inverse_angular_dft(spectrum));
  }
  return result;
}

double sparsity_threshold(const SleModel& model, int J, int L, int colors, double fraction) {
  if (fraction <= 0.0) return 0.0;
  const AngularSpectrumView spectrum = angular_dft(split_first_layer(model, J, L, colors));
  std::vector<double> mags;
  mags.reserve(spectrum.f1.size() + spectrum.f2.size());
  for (long i = 0; i < spectrum.f1.size(); ++i) mags.push_back(std::abs(spectrum.f1(i)));
  for (long i = 0; i < spectrum.f2.size(); ++i) mags.push_back(std::abs(spectrum.f2(i)));
  if (mags.empty()) return 0.0;
  std::sort(mags.begin(), mags.end());
  const auto need = static_cast<std::size_t>(std::ceil(std::min(fraction, 1.0) * mags.size()));
  return mags[std::max<std::size_t>(need, 1) - 1];
}

Histogram magnitude_histogram(const Eigen::ArrayXd& magnitudes, int bins) {
  Histogram h;
  h.counts.assign(std::max(bins, 1), 0);
  if (magnitudes.size() == 0) return h;
  h.hi = magnitudes.maxCoeff();
  const double width = h.hi > 0.0 ? h.hi / h.counts.size() : 1.0;
  for (double m : magnitudes) {
    const auto bin = std::min<std::size_t>(static_cast<std::size_t>(m / width), h.counts.size() - 1);
    ++h.counts[bin];
  }
  return h;
}

SpectrumReport omega_spectra(const AngularSpectrumView& spectrum, int histogram_bins) {
  const int L = spectrum.L;
  SpectrumReport report;
  report.omega1 = Eigen::VectorXd::Zero(L);
  report.omega2 = Eigen::MatrixXd::Zero(L, L);
  const Eigen::ArrayXXd e1 = spectrum.f1.array().abs2();
  const Eigen::ArrayXXd e2 = spectrum.f2.array().abs2();
  for (long col = 0; col < e1.cols(); ++col) report.omega1(col % L) += e1.col(col).sum();
  for (long col = 0; col < e2.cols(); ++col) {
    report.omega2((col / L) % L, col % L) += e2.col(col).sum();
  }
  const Eigen::ArrayXXd a1 = spectrum.f1.array().abs();
  const Eigen::ArrayXXd a2 = spectrum.f2.array().abs();
  report.histogram1 = magnitude_histogram(a1.reshaped(), histogram_bins);
  report.histogram2 = magnitude_histogram(a2.reshaped(), histogram_bins);
  return report;
}

double low_frequency_share(const SpectrumReport& report) {
  const long L = report.omega1.size();
  const double total = report.omega1.sum();
  if (L == 0 || total <= 0.0) return 0.0;
  std::set<long> bins{0, 1 % L, (L - 1) % L};
  double low = 0.0;
  for (long b : bins) low += report.omega1(b);
  return low / total;
}

CovarianceReport covariance_check(const RealImage& plane, const FilterBank& bank, int quarter_turns) {
  const int L = bank.config().L;
  if (L % 4 != 0) {
    throw UnsupportedConfiguration("covariance_check needs L divisible by 4, got L = " + std::to_string(L));
  }
  const int J = bank.config().J;
  const int side = bank.config().N >> J;
  const auto paths = enumerate_paths(J, L);
  const Eigen::MatrixXd base = scattering2d_plane(plane, bank, paths);
  const Eigen::MatrixXd turned = scattering2d_plane(rotate_quarter(plane, quarter_turns), bank, paths);

  const int shift = ((quarter_turns % 4 + 4) % 4) * (L / 4);
  auto wrap = [L](int t) { return ((t % L) + L) % L; };
  auto index_of = [&](const ScatteringPath& p) {
    return static_cast<long>(std::find(paths.begin(), paths.end(), p) - paths.begin());
  };
  auto grid = [&](long row) {
    RealImage g(side, side);
    for (int i = 0; i < side * side; ++i) g(i / side, i % side) = base(row, i);
    return g;
  };

  double err1 = 0, ref1 = 0, err2 = 0, ref2 = 0, err2_t1 = 0;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const ScatteringPath& path = paths[p];
    if (path.order == 0) continue;
    RealImage actual(side, side);
    for (int i = 0; i < side * side; ++i) actual(i / side, i % side) = turned(static_cast<long>(p), i);
    ScatteringPath source = path;
    source.theta1 = wrap(path.theta1 - shift);
    if (path.order == 2) source.theta2 = wrap(path.theta2 - shift);
    const RealImage predicted = rotate_quarter(grid(index_of(source)), quarter_turns);
    const double e = (actual - predicted).square().sum();
    const double r = actual.square().sum();
    if (path.order == 1) {
      err1 += e;
      ref1 += r;
    } else {
      err2 += e;
      ref2 += r;
      ScatteringPath partial = path;
      partial.theta1 = wrap(path.theta1 - shift);
      err2_t1 += (actual - rotate_quarter(grid(index_of(partial)), quarter_turns)).square().sum();
    }
  }
  CovarianceReport report;
  report.quarter_turns = quarter_turns;
  auto rel = [](double e, double r) { return r > 0.0 ? std::sqrt(e / r) : std::sqrt(e); };
  report.order1_error = rel(err1, ref1);
  report.order2_error = rel(err2, ref2);
  report.order2_theta1_only_error = rel(err2_t1, ref2);
  return report;
}

}  // namespace scatnet
