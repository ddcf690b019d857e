// Bootstrap null images.
//
// Parametric replicates draw every channel sample independently from
// Normal(mu_c, (omega * sigma_c)^2) and clamp to [0, 1]. Nonparametric
// replicates resample whole RGB pixels with replacement. Replicate b (1-based)
// of an ensemble is seeded with mix_seed(config.seed, b), so ensembles do not
// depend on generation order or thread count.

#pragma once

#include "attnboot/core.hpp"
#include "attnboot/parallel.hpp"
#include "attnboot/random.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace attnboot {

template <typename Scalar>
struct ChannelStats {
  Eigen::Array<Scalar, 1, 3> mean;
  Eigen::Array<Scalar, 1, 3> stddev;
};

/// Population mean and standard deviation (divide by pixel count) per channel.
template <typename Scalar>
ChannelStats<Scalar> channel_stats(const Image<Scalar>& image) {
  const auto& px = image.pixels();
  const Scalar n = Scalar(px.rows());
  ChannelStats<Scalar> s;
  s.mean = px.colwise().sum() / n;
  s.stddev = ((px.rowwise() - s.mean).square().colwise().sum() / n).sqrt();
  return s;
}

enum class BootstrapMode { parametric, nonparametric };

inline std::string_view to_string(BootstrapMode m) {
  return m == BootstrapMode::parametric ? "parametric" : "nonparametric";
}

inline BootstrapMode parse_bootstrap_mode(std::string_view s) {
  if (s == "parametric") return BootstrapMode::parametric;
  if (s == "nonparametric") return BootstrapMode::nonparametric;
  throw invalid_input("unknown bootstrap mode '" + std::string(s) + "'");
}

struct BootstrapConfig {
  BootstrapMode mode = BootstrapMode::parametric;
  Index replicates = 1;  // B
  double omega = 1.0;    // width multiplier on sigma_c, parametric mode only
  std::uint64_t seed = 0;

  void validate() const {
    if (replicates < 1) throw invalid_input("bootstrap replicate count must be >= 1");
    if (!(omega > 0.0)) throw invalid_input("bootstrap width multiplier must be > 0");
  }
};

/// Fills `px` with independent per-channel Normal(mean_c, (omega*sd_c)^2)
/// draws, clamped to [0, 1]. Draw order: pixels row-major, channels inner.
template <typename Scalar, typename Derived>
void fill_gaussian(Eigen::DenseBase<Derived>& px, const ChannelStats<Scalar>& stats, double omega,
                   RandomStream& rng) {
  for (Index i = 0; i < px.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) {
      const double v = double(stats.mean[c]) + omega * double(stats.stddev[c]) * rng.normal();
      px(i, c) = Scalar(std::clamp(v, 0.0, 1.0));
    }
  }
}

template <typename Scalar>
Image<Scalar> parametric_null(const Image<Scalar>& image, const ChannelStats<Scalar>& stats,
                              double omega, std::uint64_t seed) {
  if (!(omega > 0.0)) throw invalid_input("bootstrap width multiplier must be > 0");
  RandomStream rng(seed);
  typename Image<Scalar>::Pixels px(image.pixel_count(), 3);
  fill_gaussian(px, stats, omega, rng);
  return Image<Scalar>(image.height(), image.width(), std::move(px));
}

template <typename Scalar>
Image<Scalar> nonparametric_null(const Image<Scalar>& image, std::uint64_t seed) {
  RandomStream rng(seed);
  const auto& src = image.pixels();
  const auto m = static_cast<std::uint64_t>(src.rows());
  typename Image<Scalar>::Pixels px(src.rows(), 3);
  for (Index i = 0; i < px.rows(); ++i) px.row(i) = src.row(static_cast<Index>(rng.below(m)));
  return Image<Scalar>(image.height(), image.width(), std::move(px));
}

/// One replicate with an explicit seed, dispatching on the mode.
template <typename Scalar>
Image<Scalar> null_replicate(const Image<Scalar>& image, const ChannelStats<Scalar>& stats,
                             const BootstrapConfig& config, std::uint64_t seed) {
  return config.mode == BootstrapMode::parametric ? parametric_null(image, stats, config.omega, seed)
                                                  : nonparametric_null(image, seed);
}

template <typename Scalar>
std::vector<Image<Scalar>> generate_ensemble(const Image<Scalar>& image, const BootstrapConfig& config,
                                             unsigned threads = 0) {
  config.validate();
  const auto stats = channel_stats(image);
  std::vector<Image<Scalar>> out(static_cast<std::size_t>(config.replicates), Image<Scalar>(1, 1));
  parallel_for(
      out.size(),
      [&](std::size_t k) {
        out[k] = null_replicate(image, stats, config, mix_seed(config.seed, k + 1));
      },
      threads);
  return out;
}

}  // namespace attnboot
