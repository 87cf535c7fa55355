#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scatnet {

// Dense 2D arrays are row-major so that (row, col) ↔ (u1, u2) and the
// frequency origin sits at index (0, 0).
template <typename Scalar>
using RealImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ComplexImageT =
    Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RealImage = RealImageT<double>;
using ComplexImage = ComplexImageT<double>;

/// A multi-channel image, one plane per color, values nominally in [0, 1].
struct Image {
  std::vector<RealImage> channels;

  int colors() const { return static_cast<int>(channels.size()); }
  int height() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int width() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
};

/// Malformed input data. `offset` is the byte position where parsing failed.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

private:
  std::uint64_t offset_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A valid but unsupported parameter combination (e.g. L not divisible by 4
/// for grid-exact rotation checks).
class UnsupportedConfiguration : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

constexpr bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace scatnet
