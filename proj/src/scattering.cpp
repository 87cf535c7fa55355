#include "scatnet/scattering.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "scatnet/spectral.hpp"

namespace scatnet {

std::vector<ScatteringPath> enumerate_paths(int J, int L, PathSet set) {
  if (J < 1 || L < 1) throw std::invalid_argument("enumerate_paths: J and L must be >= 1");
  std::vector<ScatteringPath> paths;
  paths.push_back({0});
  for (int j1 = 0; j1 < J; ++j1) {
    for (int t1 = 0; t1 < L; ++t1) paths.push_back({1, j1, t1});
  }
  auto add_order2 = [&](bool increasing) {
    for (int j1 = 0; j1 < J; ++j1) {
      for (int j2 = 0; j2 < J; ++j2) {
        if ((j1 < j2) != increasing) continue;
        for (int t1 = 0; t1 < L; ++t1) {
          for (int t2 = 0; t2 < L; ++t2) paths.push_back({2, j1, t1, j2, t2});
        }
      }
    }
  };
  add_order2(true);
  if (set == PathSet::All) add_order2(false);
  return paths;
}

long path_count(int J, int L) {
  return 1 + static_cast<long>(J) * L + static_cast<long>(J) * (J - 1) / 2 * L * L;
}

long channel_count(int J, int L, int colors) { return colors * path_count(J, L); }

RealImage ScatteringOutput::channel(long index) const {
  RealImage grid(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) grid(r, c) = data(index, r * width + c);
  }
  return grid;
}

namespace {

// Coarse-grid convolutions with decimated filters carry a 4^{-r} gain; the
// factor restores samples of the full-resolution convolution.
double resolution_gain(int r) { return static_cast<double>(1L << (2 * r)); }

RealImage smooth(const ComplexImage& spectrum, const FilterBank& bank, int resolution) {
  const int J = bank.config().J;
  return resolution_gain(resolution) *
         conv_subsample(spectrum, bank.phi(resolution).values, J - resolution).real();
}

}  // namespace

Eigen::MatrixXd scattering2d_plane(const RealImage& plane, const FilterBank& bank,
                                   const std::vector<ScatteringPath>& paths) {
  const auto& config = bank.config();
  if (plane.rows() != config.N || plane.cols() != config.N) {
    throw std::invalid_argument("scattering2d_plane: plane must be " + std::to_string(config.N) +
                                "x" + std::to_string(config.N));
  }
  const int J = config.J;
  const int out_side = config.N >> J;
  const ComplexImage spectrum = dft2<double>(plane);

  // First-layer modulus spectra keyed by (j1, θ1, resolution).
  std::map<std::tuple<int, int, int>, ComplexImage> first_layer;
  auto first = [&](int j1, int t1, int r) -> const ComplexImage& {
    auto key = std::make_tuple(j1, t1, r);
    auto it = first_layer.find(key);
    if (it == first_layer.end()) {
      ComplexImage u = modulus(conv_subsample(spectrum, bank.psi(j1, t1, 0).values, r));
      it = first_layer.emplace(key, dft2<double>(std::move(u))).first;
    }
    return it->second;
  };

  Eigen::MatrixXd out(static_cast<long>(paths.size()), static_cast<long>(out_side) * out_side);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const ScatteringPath& path = paths[p];
    RealImage coeffs;
    if (path.order == 0) {
      coeffs = smooth(spectrum, bank, 0);
    } else if (path.order == 1) {
      coeffs = smooth(first(path.j1, path.theta1, path.j1), bank, path.j1);
    } else {
      // Non-increasing paths (diagnostic only) keep the first layer at the
      // finer of the two scales so that ψ_{j2} is resolvable.
      const int r1 = std::min(path.j1, path.j2);
      const ComplexImage& u1 = first(path.j1, path.theta1, r1);
      ComplexImage u2 = resolution_gain(r1) *
                        conv_subsample(u1, bank.psi(path.j2, path.theta2, r1).values,
                                       path.j2 - r1);
      coeffs = smooth(dft2<double>(modulus(u2)), bank, path.j2);
    }
    out.row(static_cast<long>(p)) = Eigen::Map<const Eigen::RowVectorXd>(coeffs.data(), coeffs.size());
  }
  return out;
}

ScatteringOutput scattering2d(const Image& image, const FilterBank& bank,
                              const ScatteringOptions& options) {
  const auto& config = bank.config();
  if (image.colors() < 1) throw std::invalid_argument("scattering2d: image has no channels");
  if (image.height() > config.N || image.width() > config.N) {
    throw std::invalid_argument("scattering2d: image " + std::to_string(image.height()) + "x" +
                                std::to_string(image.width()) + " exceeds bank side " +
                                std::to_string(config.N));
  }
  const int J = config.J;
  const PadGeometry geom = pad_geometry(image.height(), image.width(), config.N, 1 << J);
  const int grid = config.N >> J;

  ScatteringOutput out;
  out.paths = enumerate_paths(J, config.L, options.paths);
  out.colors = image.colors();
  out.height = (image.height() + (1 << J) - 1) >> J;
  out.width = (image.width() + (1 << J) - 1) >> J;
  const long n_paths = static_cast<long>(out.paths.size());
  out.data.resize(out.colors * n_paths, static_cast<long>(out.height) * out.width);

  for (int c = 0; c < out.colors; ++c) {
    const auto& plane = image.channels[c];
    if (plane.rows() != image.height() || plane.cols() != image.width()) {
      throw std::invalid_argument("scattering2d: color planes differ in shape");
    }
    const Eigen::MatrixXd coeffs = scattering2d_plane(pad_reflect(plane, geom), bank, out.paths);
    for (long p = 0; p < n_paths; ++p) {
      RealImage row_grid(grid, grid);
      for (int i = 0; i < grid * grid; ++i) row_grid(i / grid, i % grid) = coeffs(p, i);
      const RealImage cropped = unpad(row_grid, geom, J);
      out.data.row(c * n_paths + p) =
          Eigen::Map<const Eigen::RowVectorXd>(cropped.data(), cropped.size());
    }
  }
  return out;
}

double first_stage_energy(const RealImage& plane, const FilterBank& bank) {
  const auto& config = bank.config();
  if (plane.rows() != config.N || plane.cols() != config.N) {
    throw std::invalid_argument("first_stage_energy: plane must be N x N");
  }
  const ComplexImage spectrum = dft2<double>(plane);
  double energy = conv_subsample(spectrum, bank.phi(0).values, 0).abs2().sum();
  for (int j = 0; j < config.J; ++j) {
    for (int t = 0; t < config.L; ++t) {
      energy += conv_subsample(spectrum, bank.psi(j, t, 0).values, 0).abs2().sum();
    }
  }
  return energy;
}

}  // namespace scatnet
