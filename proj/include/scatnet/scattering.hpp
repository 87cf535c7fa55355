#pragma once

#include <vector>

#include "scatnet/filterbank.hpp"
#include "scatnet/types.hpp"

namespace scatnet {

struct ScatteringPath {
  int order = 0;
  int j1 = -1;
  int theta1 = -1;
  int j2 = -1;
  int theta2 = -1;

  bool operator==(const ScatteringPath&) const = default;
};

enum class PathSet {
  Increasing,  ///< j1 < j2 only (production output)
  All,         ///< also j1 >= j2, appended after the increasing paths
};

/// Canonical order: order 0; order 1 by (j1, θ1); order 2 by (j1, j2, θ1, θ2).
std::vector<ScatteringPath> enumerate_paths(int J, int L, PathSet set = PathSet::Increasing);

/// colors × (1 + J·L + ½·J·(J−1)·L²).
long channel_count(int J, int L, int colors);

/// Number of increasing paths per color.
long path_count(int J, int L);

struct ScatteringOutput {
  std::vector<ScatteringPath> paths;
  int colors = 0;
  int height = 0;  ///< output grid rows
  int width = 0;   ///< output grid cols
  /// Rows indexed by color * paths.size() + path, columns by spatial
  /// position (row-major over the output grid).
  Eigen::MatrixXd data;

  int spatial_side() const { return height; }
  long channels() const { return static_cast<long>(data.rows()); }

  /// Output grid of one channel.
  RealImage channel(long index) const;
};

struct ScatteringOptions {
  PathSet paths = PathSet::Increasing;
};

/// Order 0/1/2 scattering of each color plane independently. Images smaller
/// than the bank side are reflection padded and the output grid is cropped
/// back to the cells covering the image.
ScatteringOutput scattering2d(const Image& image, const FilterBank& bank,
                              const ScatteringOptions& options = {});

/// Single-plane variant on an exactly N×N (periodic) grid, no padding.
/// Returns |paths| × (N/2^J)² coefficients.
Eigen::MatrixXd scattering2d_plane(const RealImage& plane, const FilterBank& bank,
                                   const std::vector<ScatteringPath>& paths);

/// ‖x⋆φ_J‖² + Σ_{j,θ} ‖x⋆ψ_{j,θ}‖², all at full resolution (no subsampling),
/// for an N×N plane.
double first_stage_energy(const RealImage& plane, const FilterBank& bank);

}  // namespace scatnet
