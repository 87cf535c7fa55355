#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scatnet/types.hpp"

namespace scatnet {

struct LabeledImageSet {
  std::vector<Image> images;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

constexpr int kCifarSide = 32;
constexpr int kCifarClasses = 10;
constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Parses one CIFAR-10 binary batch: 3073-byte records of one label byte
/// followed by 1024 red, 1024 green and 1024 blue bytes (row-major).
/// Pixels are scaled to [0, 1].
LabeledImageSet load_cifar10_batch(const std::filesystem::path& file);

/// Same as load_cifar10_batch over an in-memory buffer.
LabeledImageSet parse_cifar10(const std::vector<std::uint8_t>& bytes);

struct CifarSplit {
  LabeledImageSet train;
  LabeledImageSet test;
};

/// Loads data_batch_1..5.bin and test_batch.bin from `directory`.
CifarSplit load_cifar10(const std::filesystem::path& directory);

/// Binary P6 PPM with maxval 255.
Image load_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Exactly `per_class` samples of every class, drawn without replacement.
/// Output is grouped by class in ascending order; within a class the order
/// follows the draw.
LabeledImageSet sample_subset(const LabeledImageSet& set, int per_class, std::uint64_t seed);

/// Deterministic generator used by every stochastic component.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) from one 64-bit draw (portable across
/// standard libraries, unlike std::uniform_int_distribution).
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

struct AugmentParams {
  int crop_top = 0;   ///< offset into the padded image, in [0, 2·padding]
  int crop_left = 0;
  bool flip = false;
};

/// Draws crop offsets, then the flip bit.
AugmentParams draw_augment(Rng& rng, int padding, bool allow_flip);

/// Reflection-pads by `padding`, crops H×W at the given offset, and mirrors
/// horizontally when params.flip is set.
Image apply_augment(const Image& image, int padding, const AugmentParams& params);

/// Random pad-crop plus horizontal flip with probability ½.
Image augment(const Image& image, Rng& rng, int padding = 4, bool allow_flip = true);

/// Ten-class images of oriented gratings, blobs and edges with 1/f noise. A
/// stand-in dataset for command-line demos and tests where no CIFAR-10 copy
/// is available.
LabeledImageSet make_synthetic_textures(int per_class, int side, std::uint64_t seed);

/// Random "natural-like" single-plane test images: 1/f^α noise plus a few
/// soft ellipses and edges, scaled to [0, 1].
std::vector<RealImage> natural_test_planes(int count, int side, std::uint64_t seed);

}  // namespace scatnet
