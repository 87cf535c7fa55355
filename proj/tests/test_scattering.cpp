#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scatnet/data.hpp"
#include "scatnet/scattering.hpp"
#include "scatnet/spectral.hpp"

using namespace scatnet;
using scatnet::testing::random_real;

namespace {

// Scattering on a periodic plane written with spatial sums only: filters are
// taken to space once, every convolution is a direct circular sum on the
// current grid with the filter sampled at the grid step.
class SpatialScattering {
public:
  explicit SpatialScattering(const FilterBank& bank) : bank_(bank), n_(bank.config().N) {
    auto to_space = [&](const RealImage& spectrum) {
      return ComplexImage(idft2(ComplexImage(spectrum.cast<std::complex<double>>())));
    };
    for (int j = 0; j < bank.config().J; ++j)
      for (int t = 0; t < bank.config().L; ++t) psi_.push_back(to_space(bank.psi(j, t, 0).values));
    phi_ = to_space(bank.phi(0).values);
  }

  Eigen::MatrixXd operator()(const RealImage& x, const std::vector<ScatteringPath>& paths) const {
    const int J = bank_.config().J;
    const int L = bank_.config().L;
    const ComplexImage xc = x.cast<std::complex<double>>();
    Eigen::MatrixXd out(static_cast<long>(paths.size()), (n_ >> J) * (n_ >> J));
    for (std::size_t p = 0; p < paths.size(); ++p) {
      const auto& path = paths[p];
      ComplexImage s;
      if (path.order == 0) {
        s = conv(xc, 0, phi_, J);
      } else {
        const ComplexImage u1 = conv(xc, 0, psi_[path.j1 * L + path.theta1], path.j1).abs().cast<std::complex<double>>();
        if (path.order == 1) {
          s = conv(u1, path.j1, phi_, J);
        } else {
          const ComplexImage u2 =
              conv(u1, path.j1, psi_[path.j2 * L + path.theta2], path.j2).abs().cast<std::complex<double>>();
          s = conv(u2, path.j2, phi_, J);
        }
      }
      for (long i = 0; i < s.size(); ++i) out(static_cast<long>(p), i) = s(i / s.cols(), i % s.cols()).real();
    }
    return out;
  }

private:
  // y lives on the grid of step 2^r; the output on the grid of step 2^t.
  ComplexImage conv(const ComplexImage& y, int r, const ComplexImage& h, int t) const {
    const long m = y.rows();
    const long step_in = 1L << r;
    const long out_side = n_ >> t;
    const long ratio = 1L << (t - r);
    ComplexImage out(out_side, out_side);
    for (long a = 0; a < out_side; ++a) {
      for (long b = 0; b < out_side; ++b) {
        std::complex<double> acc = 0.0;
        for (long v1 = 0; v1 < m; ++v1) {
          for (long v2 = 0; v2 < m; ++v2) {
            const long d1 = (((a * ratio - v1) * step_in) % n_ + n_) % n_;
            const long d2 = (((b * ratio - v2) * step_in) % n_ + n_) % n_;
            acc += y(v1, v2) * h(d1, d2);
          }
        }
        out(a, b) = acc * static_cast<double>(step_in * step_in);
      }
    }
    return out;
  }

  const FilterBank& bank_;
  int n_;
  std::vector<ComplexImage> psi_;
  ComplexImage phi_;
};

Image gray(const RealImage& plane) { return Image{{plane}}; }

}  // namespace

TEST(EnumeratePaths, CountsAndOrder) {
  EXPECT_EQ(enumerate_paths(1, 3).size(), 4u);
  EXPECT_EQ(enumerate_paths(2, 8).size(), 81u);
  EXPECT_EQ(enumerate_paths(4, 8).size(), 417u);
  const auto paths = enumerate_paths(3, 2);
  EXPECT_EQ(paths.front().order, 0);
  for (std::size_t i = 1; i < paths.size(); ++i) {
    const auto& a = paths[i - 1];
    const auto& b = paths[i];
    EXPECT_LE(a.order, b.order);
    if (a.order == b.order && b.order == 1) {
      EXPECT_LT(std::tie(a.j1, a.theta1), std::tie(b.j1, b.theta1));
    }
    if (a.order == b.order && b.order == 2) {
      EXPECT_LT(std::tie(a.j1, a.j2, a.theta1, a.theta2), std::tie(b.j1, b.j2, b.theta1, b.theta2));
      EXPECT_LT(b.j1, b.j2);
    }
  }
  EXPECT_THROW(enumerate_paths(0, 8), std::invalid_argument);
}

TEST(EnumeratePaths, DiagnosticSetAppendsNonIncreasing) {
  const auto inc = enumerate_paths(3, 4);
  const auto all = enumerate_paths(3, 4, PathSet::All);
  EXPECT_EQ(all.size(), 1u + 3 * 4 + 9 * 16);
  for (std::size_t i = 0; i < inc.size(); ++i) EXPECT_EQ(all[i], inc[i]);
  for (std::size_t i = inc.size(); i < all.size(); ++i) EXPECT_GE(all[i].j1, all[i].j2);
}

TEST(ChannelCount, Examples) {
  EXPECT_EQ(channel_count(4, 8, 3), 1251);
  EXPECT_EQ(channel_count(2, 8, 3), 243);
  EXPECT_EQ(channel_count(1, 1, 1), 2);
  for (int J = 1; J <= 5; ++J)
    for (int L = 1; L <= 9; ++L) EXPECT_EQ(path_count(J, L), static_cast<long>(enumerate_paths(J, L).size()));
}

TEST(Scattering2d, MatchesSpatialOracle) {
  const FilterBank bank(FilterBankConfig::standard(2, 4, 16));
  std::mt19937_64 rng(1);
  const RealImage x = random_real(16, rng);
  const auto paths = enumerate_paths(2, 4);
  const Eigen::MatrixXd fast = scattering2d_plane(x, bank, paths);
  const Eigen::MatrixXd slow = SpatialScattering(bank)(x, paths);
  EXPECT_LT((fast - slow).norm(), 1e-10 * slow.norm());
}

TEST(Scattering2d, ZeroImageGivesZero) {
  const FilterBank bank(FilterBankConfig{});
  Image img{{RealImage::Zero(32, 32), RealImage::Zero(32, 32), RealImage::Zero(32, 32)}};
  const ScatteringOutput s = scattering2d(img, bank);
  EXPECT_EQ(s.channels(), 243);
  EXPECT_EQ(s.height, 8);
  EXPECT_EQ(s.width, 8);
  EXPECT_EQ(s.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Scattering2d, ConstantImage) {
  const FilterBank bank(FilterBankConfig{});
  const double c = 0.6;
  const ScatteringOutput s = scattering2d(gray(RealImage::Constant(32, 32, c)), bank);
  EXPECT_LT((s.data.row(0).array() - c).abs().maxCoeff(), 1e-10);
  EXPECT_LE(s.data.bottomRows(s.channels() - 1).cwiseAbs().maxCoeff(), 1e-3 * c);
}

TEST(Scattering2d, ImageNetGeometry) {
  const FilterBank bank(FilterBankConfig::standard(4, 8, 256));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  Image img;
  for (int c = 0; c < 3; ++c) {
    RealImage p(224, 224);
    for (long i = 0; i < p.size(); ++i) p(i) = u(rng);
    img.channels.push_back(p);
  }
  const ScatteringOutput s = scattering2d(img, bank);
  EXPECT_EQ(s.channels(), 1251);
  EXPECT_EQ(s.height, 14);
  EXPECT_EQ(s.width, 14);
}

TEST(Scattering2d, RejectsOversizedImage) {
  const FilterBank bank(FilterBankConfig{});
  EXPECT_THROW(scattering2d(gray(RealImage::Zero(40, 40)), bank), std::invalid_argument);
}

TEST(Scattering2d, CoefficientsNonNegativeProperty) {
  const FilterBank bank(FilterBankConfig{});
  const auto planes = natural_test_planes(5, 32, 3);
  for (const auto& p : planes) {
    const ScatteringOutput s = scattering2d(gray(p - 0.5), bank);
    EXPECT_GE(s.data.bottomRows(s.channels() - 1).minCoeff(), -1e-12);
  }
}

TEST(Scattering2d, ColorPlanesAreIndependent) {
  const FilterBank bank(FilterBankConfig{});
  const auto planes = natural_test_planes(3, 32, 4);
  const ScatteringOutput rgb = scattering2d(Image{{planes[0], planes[1], planes[2]}}, bank);
  const ScatteringOutput g = scattering2d(gray(planes[1]), bank);
  EXPECT_EQ((rgb.data.middleRows(81, 81) - g.data).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Scattering2d, PaddedSmallImageGrid) {
  const FilterBank bank(FilterBankConfig{});
  const RealImage plane = natural_test_planes(1, 32, 5)[0].topLeftCorner(28, 28);
  const ScatteringOutput s = scattering2d(gray(plane), bank);
  EXPECT_EQ(s.height, 7);
  EXPECT_EQ(s.width, 7);
  EXPECT_EQ(s.data.cols(), 49);
}

TEST(Scattering2d, NonExpansiveProperty) {
  const FilterBank bank(FilterBankConfig{});
  const auto paths = enumerate_paths(2, 8);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const RealImage x = random_real(32, rng);
    const RealImage y = random_real(32, rng);
    const double lhs = (scattering2d_plane(x, bank, paths) - scattering2d_plane(y, bank, paths)).norm();
    const double rhs = (x - y).matrix().norm();
    EXPECT_LE(lhs, 1.05 * rhs);
  }
}

TEST(FirstStageEnergy, WithinFrameBoundsProperty) {
  const FilterBank bank(FilterBankConfig{});
  const LittlewoodPaley lp = littlewood_paley(bank);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ComplexImage spectrum = dft2(random_real(32, rng));
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        if (std::hypot(grid_frequency(r, 32), grid_frequency(c, 32)) > 7 * std::numbers::pi / 8) spectrum(r, c) = 0.0;
    const RealImage x = idft2(spectrum).real();
    const double ratio = first_stage_energy(x, bank) / x.square().sum();
    EXPECT_GE(ratio, lp.lp_min - 0.02);
    EXPECT_LE(ratio, lp.lp_max + 0.02);
  }
}

TEST(Scattering2d, PathTableMatchesOutput) {
  const FilterBank bank(FilterBankConfig{});
  const ScatteringOutput s = scattering2d(gray(RealImage::Zero(32, 32)), bank, {PathSet::All});
  EXPECT_EQ(s.paths.size(), 1u + 16 + 4 * 64);
  EXPECT_EQ(s.channels(), static_cast<long>(s.paths.size()));
}
