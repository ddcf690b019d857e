// Noise-injection protocol: a uniformly placed noise square, or a diffuse ROI
// made of the top-N pixels of a Gaussian-smoothed white-noise field. ROI
// pixels are refilled with per-channel Gaussian noise matching the image's
// channel statistics; all other pixels are left untouched.

#pragma once

#include "attnboot/bootstrap.hpp"
#include "attnboot/core.hpp"
#include "attnboot/random.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string_view>
#include <vector>

namespace attnboot {

enum class NoiseKind { square, diffuse };

inline std::string_view to_string(NoiseKind k) { return k == NoiseKind::square ? "square" : "diffuse"; }

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "square") return NoiseKind::square;
  if (s == "diffuse") return NoiseKind::diffuse;
  throw invalid_input("unknown noise kind '" + std::string(s) + "'");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::square;
  Index square_size = 100;
  double lambda = 20.0;      // clustering parameter of the diffuse field
  Index pixel_count = 10000;  // N_p, diffuse ROI size
  std::uint64_t seed = 0;

  void validate() const {
    if (square_size < 1) throw invalid_input("square size must be >= 1");
    if (pixel_count < 1) throw invalid_input("diffuse ROI pixel count must be >= 1");
    if (!(lambda >= 0.0)) throw invalid_input("clustering parameter must be >= 0");
  }
};

template <typename Scalar>
struct Injection {
  Image<Scalar> image;
  RoiMask mask;
  Index top = 0;   // square only
  Index left = 0;  // square only
};

/// Copy of `image` with masked pixels replaced by clamped Gaussian noise
/// using the image's own channel statistics. Draws: masked pixels in
/// row-major order, channels inner.
template <typename Scalar>
Image<Scalar> fill_roi_noise(const Image<Scalar>& image, const RoiMask& mask, RandomStream& rng) {
  if (mask.height() != image.height() || mask.width() != image.width()) {
    throw invalid_input("mask does not match image dimensions");
  }
  const auto stats = channel_stats(image);
  typename Image<Scalar>::Pixels px = image.pixels();
  for (Index i = 0; i < px.rows(); ++i) {
    if (!mask.at_flat(i)) continue;
    auto row = px.row(i);
    fill_gaussian(row, stats, 1.0, rng);
  }
  return Image<Scalar>(image.height(), image.width(), std::move(px));
}

template <typename Scalar>
Injection<Scalar> inject_square(const Image<Scalar>& image, const NoiseSpec& spec) {
  spec.validate();
  const Index s = spec.square_size;
  if (image.height() < s || image.width() < s) {
    throw invalid_input("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                        " is smaller than the " + std::to_string(s) + "-pixel noise square");
  }
  RandomStream rng(spec.seed);
  const auto left = static_cast<Index>(rng.below(static_cast<std::uint64_t>(image.width() - s + 1)));
  const auto top = static_cast<Index>(rng.below(static_cast<std::uint64_t>(image.height() - s + 1)));
  RoiMask mask(image.height(), image.width());
  mask.members().block(top, left, s, s).setConstant(true);
  return {fill_roi_noise(image, mask, rng), std::move(mask), top, left};
}

/// Signed FFT sample frequency of bin k out of n, in cycles per sample
/// (range [-0.5, 0.5)).
inline double fft_frequency(Index k, Index n) {
  return double(k <= (n - 1) / 2 ? k : k - n) / double(n);
}

/// Gaussian low-pass of a real field in the frequency domain:
/// multiply by exp(-(fx^2 + fy^2) * lambda^2), frequencies in cycles/pixel.
inline PixelMapd smooth_field(const PixelMapd& field, double lambda) {
  using Complex = std::complex<double>;
  const Index h = field.rows();
  const Index w = field.cols();
  Eigen::Array<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> spec = field.cast<Complex>();

  Eigen::FFT<double> fft;
  std::vector<Complex> in, out;
  const auto transform_rows = [&](bool forward) {
    for (Index r = 0; r < h; ++r) {
      in.assign(spec.row(r).data(), spec.row(r).data() + w);
      forward ? fft.fwd(out, in) : fft.inv(out, in);
      for (Index c = 0; c < w; ++c) spec(r, c) = out[std::size_t(c)];
    }
  };
  const auto transform_cols = [&](bool forward) {
    in.resize(std::size_t(h));
    for (Index c = 0; c < w; ++c) {
      for (Index r = 0; r < h; ++r) in[std::size_t(r)] = spec(r, c);
      forward ? fft.fwd(out, in) : fft.inv(out, in);
      for (Index r = 0; r < h; ++r) spec(r, c) = out[std::size_t(r)];
    }
  };

  transform_rows(true);
  transform_cols(true);
  const double l2 = lambda * lambda;
  for (Index r = 0; r < h; ++r) {
    const double fy = fft_frequency(r, h);
    for (Index c = 0; c < w; ++c) {
      const double fx = fft_frequency(c, w);
      spec(r, c) *= std::exp(-(fx * fx + fy * fy) * l2);
    }
  }
  transform_cols(false);
  transform_rows(false);
  return spec.real();
}

/// Row-major indices of the k largest values; ties go to the lower index.
inline std::vector<Index> top_k_indices(const PixelMapd& values, Index k) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index(0));
  const double* v = values.data();
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [v](Index i, Index j) {
    return v[i] != v[j] ? v[i] > v[j] : i < j;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

/// Diffuse ROI mask: N(0,1) field -> Gaussian low-pass -> min-max -> top N_p.
inline RoiMask diffuse_mask(Index height, Index width, const NoiseSpec& spec) {
  spec.validate();
  if (spec.pixel_count > height * width) {
    throw invalid_input("diffuse ROI of " + std::to_string(spec.pixel_count) + " pixels exceeds the " +
                        std::to_string(height * width) + "-pixel image");
  }
  RandomStream rng(mix_seed(spec.seed, 0));
  PixelMapd field(height, width);
  for (Index i = 0; i < field.size(); ++i) field.data()[i] = rng.normal();
  PixelMapd smooth = smooth_field(field, spec.lambda);
  const double lo = smooth.minCoeff();
  const double hi = smooth.maxCoeff();
  if (hi > lo) smooth = (smooth - lo) / (hi - lo);

  RoiMask mask(height, width);
  for (Index i : top_k_indices(smooth, spec.pixel_count)) mask(i / width, i % width) = true;
  return mask;
}

template <typename Scalar>
Injection<Scalar> diffuse_roi(const Image<Scalar>& image, const NoiseSpec& spec) {
  RoiMask mask = diffuse_mask(image.height(), image.width(), spec);
  RandomStream rng(mix_seed(spec.seed, 1));
  return {fill_roi_noise(image, mask, rng), std::move(mask), 0, 0};
}

template <typename Scalar>
Injection<Scalar> inject(const Image<Scalar>& image, const NoiseSpec& spec) {
  return spec.kind == NoiseKind::square ? inject_square(image, spec) : diffuse_roi(image, spec);
}

struct TextureSpec {
  Index height = 480;
  Index width = 480;
  double mean = 0.5;
  double structure_sd = 0.03;  // amplitude of the smooth component
  double noise_sd = 0.1;       // amplitude of the i.i.d. component
  double lambda = 8.0;         // smoothing of the structure field
  std::uint64_t seed = 0;
};

/// Synthetic test image: per channel, an independent unit-variance smoothed
/// field plus i.i.d. Gaussian noise, clamped to [0,1].
inline Imaged synthetic_texture(const TextureSpec& spec) {
  if (spec.height < 1 || spec.width < 1) throw invalid_input("texture dimensions must be positive");
  if (!(spec.structure_sd >= 0.0 && spec.noise_sd >= 0.0)) throw invalid_input("texture amplitudes must be >= 0");
  Imaged::Pixels px(spec.height * spec.width, 3);
  for (Index ch = 0; ch < 3; ++ch) {
    RandomStream rng(mix_seed(spec.seed, std::uint64_t(ch)));
    PixelMapd field(spec.height, spec.width);
    for (Index i = 0; i < field.size(); ++i) field.data()[i] = rng.normal();
    PixelMapd structure = PixelMapd::Zero(spec.height, spec.width);
    if (spec.structure_sd > 0.0) {
      structure = smooth_field(field, spec.lambda);
      structure -= structure.mean();
      const double sd = std::sqrt(structure.square().mean());
      if (sd > 0.0) structure /= sd;
    }
    for (Index i = 0; i < px.rows(); ++i) {
      const double v = spec.mean + spec.structure_sd * structure.data()[i] + spec.noise_sd * rng.normal();
      px(i, ch) = std::clamp(v, 0.0, 1.0);
    }
  }
  return Imaged(spec.height, spec.width, px);
}

/// Arithmetic mean of z over the ROI.
template <typename Derived>
double mean_roi_z(const Eigen::DenseBase<Derived>& z, const RoiMask& mask) {
  if (z.rows() != mask.height() || z.cols() != mask.width()) throw invalid_input("mean_roi_z: shape mismatch");
  if (mask.count() == 0) throw invalid_input("mean_roi_z: empty ROI");
  double sum = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    for (Index c = 0; c < z.cols(); ++c) {
      if (mask(r, c)) sum += double(z(r, c));
    }
  }
  return sum / double(mask.count());
}

/// Keeps perturbed images whose ROI is not read as signal: |<z>| <= 1.
inline bool passes_z_filter(double mean_z) { return std::abs(mean_z) <= 1.0; }

}  // namespace attnboot
