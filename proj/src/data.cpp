#include "scatnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "scatnet/filterbank.hpp"
#include "scatnet/spectral.hpp"

namespace scatnet {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void append(LabeledImageSet& into, LabeledImageSet&& from) {
  into.images.insert(into.images.end(), std::make_move_iterator(from.images.begin()),
                     std::make_move_iterator(from.images.end()));
  into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
  into.class_count = std::max(into.class_count, from.class_count);
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(Rng& rng) {
  // Box-Muller on our own uniform draws keeps streams portable.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RealImage rescale01(RealImage img) {
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (hi - lo < 1e-12) return RealImage::Constant(img.rows(), img.cols(), 0.5);
  return (img - lo) / (hi - lo);
}

// Real field with amplitude spectrum ∝ 1/|f|^alpha.
RealImage power_law_noise(int side, double alpha, Rng& rng) {
  ComplexImage spectrum(side, side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double f = std::hypot(grid_frequency(r, side), grid_frequency(c, side));
      const double amp = f > 0.0 ? std::pow(f, -alpha) : 0.0;
      spectrum(r, c) = {amp * normal(rng), amp * normal(rng)};
    }
  }
  return idft2<double>(spectrum).real();
}

}  // namespace

LabeledImageSet parse_cifar10(const std::vector<std::uint8_t>& bytes) {
  LabeledImageSet set;
  set.class_count = kCifarClasses;
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::size_t record = bytes.size() / kCifarRecordBytes;
    throw FormatError("truncated CIFAR-10 record " + std::to_string(record),
                      record * kCifarRecordBytes);
  }
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  set.images.reserve(count);
  set.labels.reserve(count);
  constexpr int plane = kCifarSide * kCifarSide;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t base = i * kCifarRecordBytes;
    const int label = bytes[base];
    if (label >= kCifarClasses) {
      throw FormatError("CIFAR-10 label " + std::to_string(label) + " out of range", base);
    }
    Image img;
    img.channels.assign(3, RealImage(kCifarSide, kCifarSide));
    for (int c = 0; c < 3; ++c) {
      const std::uint8_t* px = bytes.data() + base + 1 + c * plane;
      for (int k = 0; k < plane; ++k) img.channels[c](k / kCifarSide, k % kCifarSide) = px[k] / 255.0;
    }
    set.images.push_back(std::move(img));
    set.labels.push_back(label);
  }
  return set;
}

LabeledImageSet load_cifar10_batch(const fs::path& file) { return parse_cifar10(read_bytes(file)); }

CifarSplit load_cifar10(const fs::path& directory) {
  CifarSplit split;
  split.train.class_count = split.test.class_count = kCifarClasses;
  for (int b = 1; b <= 5; ++b) {
    append(split.train, load_cifar10_batch(directory / ("data_batch_" + std::to_string(b) + ".bin")));
  }
  split.test = load_cifar10_batch(directory / "test_batch.bin");
  return split;
}

Image load_ppm(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&] {
    skip_space();
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') ++pos;
    return std::string(bytes.begin() + start, bytes.begin() + pos);
  };
  auto read_int = [&](const char* what) {
    const std::size_t at = pos;
    const std::string token = read_token();
    try {
      std::size_t used = 0;
      const int v = std::stoi(token, &used);
      if (used != token.size() || v <= 0) throw std::invalid_argument(token);
      return v;
    } catch (const std::exception&) {
      throw FormatError(std::string("bad PPM ") + what + " '" + token + "'", at);
    }
  };
  if (read_token() != "P6") throw FormatError("not a binary P6 PPM", 0);
  const int width = read_int("width");
  const int height = read_int("height");
  const std::size_t maxval_at = pos;
  const int maxval = read_int("maxval");
  if (maxval != 255) throw FormatError("PPM maxval must be 255", maxval_at);
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() < pos + need) throw FormatError("truncated PPM raster", bytes.size());
  Image img;
  img.channels.assign(3, RealImage(height, width));
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int k = 0; k < 3; ++k) img.channels[k](r, c) = bytes[pos++] / 255.0;
    }
  }
  return img;
}

void write_ppm(const fs::path& path, const Image& image) {
  if (image.colors() != 3) throw std::invalid_argument("write_ppm: need 3 color planes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(image.channels[k](r, c), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
      }
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

LabeledImageSet sample_subset(const LabeledImageSet& set, int per_class, std::uint64_t seed) {
  if (per_class < 0) throw std::invalid_argument("sample_subset: negative per_class");
  std::vector<std::vector<std::size_t>> by_class(set.class_count);
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    const int label = set.labels[i];
    if (label < 0 || label >= set.class_count) {
      throw std::invalid_argument("sample_subset: label out of range");
    }
    by_class[label].push_back(i);
  }
  LabeledImageSet out;
  out.class_count = set.class_count;
  Rng rng(seed);
  for (int c = 0; c < set.class_count; ++c) {
    auto& pool = by_class[c];
    if (static_cast<int>(pool.size()) < per_class) {
      throw std::invalid_argument("sample_subset: class " + std::to_string(c) + " has only " +
                                  std::to_string(pool.size()) + " samples, need " +
                                  std::to_string(per_class));
    }
    // Partial Fisher-Yates.
    for (int k = 0; k < per_class; ++k) {
      const std::size_t pick = k + uniform_index(rng, pool.size() - k);
      std::swap(pool[k], pool[pick]);
      out.images.push_back(set.images[pool[k]]);
      out.labels.push_back(c);
    }
  }
  return out;
}

AugmentParams draw_augment(Rng& rng, int padding, bool allow_flip) {
  AugmentParams p;
  p.crop_top = static_cast<int>(uniform_index(rng, 2 * padding + 1));
  p.crop_left = static_cast<int>(uniform_index(rng, 2 * padding + 1));
  p.flip = allow_flip && (rng() >> 63) != 0;
  return p;
}

Image apply_augment(const Image& image, int padding, const AugmentParams& params) {
  const int h = image.height();
  const int w = image.width();
  Image out;
  for (const auto& plane : image.channels) {
    RealImage crop(h, w);
    for (int r = 0; r < h; ++r) {
      const int sr = detail::reflect_index(r + params.crop_top - padding, h);
      for (int c = 0; c < w; ++c) {
        const int cc = params.flip ? w - 1 - c : c;
        crop(r, c) = plane(sr, detail::reflect_index(cc + params.crop_left - padding, w));
      }
    }
    out.channels.push_back(std::move(crop));
  }
  return out;
}

Image augment(const Image& image, Rng& rng, int padding, bool allow_flip) {
  return apply_augment(image, padding, draw_augment(rng, padding, allow_flip));
}

std::vector<RealImage> natural_test_planes(int count, int side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RealImage> planes;
  for (int i = 0; i < count; ++i) {
    RealImage img = power_law_noise(side, 1.0, rng);
    img /= std::max(1e-12, img.abs().maxCoeff());
    const int shapes = 2 + static_cast<int>(uniform_index(rng, 3));
    for (int s = 0; s < shapes; ++s) {
      const double cy = uniform01(rng) * side;
      const double cx = uniform01(rng) * side;
      const double ry = (0.1 + 0.25 * uniform01(rng)) * side;
      const double rx = (0.1 + 0.25 * uniform01(rng)) * side;
      const double angle = uniform01(rng) * std::numbers::pi;
      const double level = 2.0 * uniform01(rng) - 1.0;
      const double ca = std::cos(angle), sa = std::sin(angle);
      for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
          const double dy = r - cy, dx = c - cx;
          const double u = (ca * dy + sa * dx) / ry;
          const double v = (-sa * dy + ca * dx) / rx;
          const double d = std::sqrt(u * u + v * v);
          img(r, c) += level / (1.0 + std::exp(8.0 * (d - 1.0)));
        }
      }
    }
    planes.push_back(rescale01(std::move(img)));
  }
  return planes;
}

LabeledImageSet make_synthetic_textures(int per_class, int side, std::uint64_t seed) {
  LabeledImageSet set;
  set.class_count = 10;
  Rng rng(seed);
  for (int i = 0; i < per_class; ++i) {
    for (int label = 0; label < 10; ++label) {
      // Classes differ in grating orientation (5 values) and frequency band (2).
      const double orientation = std::numbers::pi * (label % 5) / 5.0 + 0.15 * (uniform01(rng) - 0.5);
      const double freq = (label < 5 ? 0.55 : 1.25) * (0.9 + 0.2 * uniform01(rng));
      const double phase = 2.0 * std::numbers::pi * uniform01(rng);
      const double contrast = 0.3 + 0.4 * uniform01(rng);
      const RealImage noise = power_law_noise(side, 1.0, rng);
      const double noise_scale = 0.8 / std::max(1e-12, noise.abs().maxCoeff());
      Image img;
      for (int c = 0; c < 3; ++c) {
        const double tint = 0.6 + 0.4 * uniform01(rng);
        RealImage plane(side, side);
        for (int r = 0; r < side; ++r) {
          for (int col = 0; col < side; ++col) {
            const double t = freq * (std::cos(orientation) * r + std::sin(orientation) * col);
            plane(r, col) = 0.5 + tint * contrast * 0.5 * std::sin(t + phase) +
                            0.25 * noise_scale * noise(r, col);
          }
        }
        img.channels.push_back(plane.cwiseMax(0.0).cwiseMin(1.0));
      }
      set.images.push_back(std::move(img));
      set.labels.push_back(label);
    }
  }
  return set;
}

}  // namespace scatnet
