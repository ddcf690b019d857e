// Uncertainty statistics for one attention map against its bootstrap null:
// null moments, z-statistics, empirical p-values, local false discovery
// rates and the proportion of null scores.

#pragma once

#include "attnboot/attention.hpp"
#include "attnboot/bootstrap.hpp"
#include "attnboot/core.hpp"
#include "attnboot/parallel.hpp"
#include "attnboot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace attnboot {

template <typename Scalar>
struct NullMoments {
  Scalar mean;
  Scalar stddev;
};

/// Mean and population standard deviation (divide by mB) over every null score.
/// Throws Errc::degenerate when the ensemble is constant.
template <typename Derived>
NullMoments<typename Derived::Scalar> null_moments(const Eigen::DenseBase<Derived>& ensemble) {
  using Scalar = typename Derived::Scalar;
  if (ensemble.size() < 2) throw invalid_input("null ensemble needs at least two scores");
  const auto& a = ensemble.derived().array();
  const Scalar n = Scalar(a.size());
  const Scalar mean = a.sum() / n;
  const Scalar stddev = std::sqrt((a - mean).square().sum() / n);
  if (!(stddev > Scalar(0))) {
    throw degenerate("bootstrap null ensemble is constant (sigma = 0); z-statistics are undefined");
  }
  return {mean, stddev};
}

/// z = (a - mean) / stddev, elementwise.
template <typename Derived>
typename Derived::PlainObject z_stats(const Eigen::DenseBase<Derived>& scores,
                                      const NullMoments<typename Derived::Scalar>& moments) {
  if (!(moments.stddev > 0)) throw invalid_input("z-statistics need a positive standard deviation");
  return (scores.derived().array() - moments.mean) / moments.stddev;
}

/// Right-tail empirical p-values: p_i = #{null > z_i} / |null|, strict.
template <typename DerivedObs, typename DerivedNull>
typename DerivedObs::PlainObject p_values(const Eigen::DenseBase<DerivedObs>& z_obs,
                                          const Eigen::DenseBase<DerivedNull>& z_null) {
  using Scalar = typename DerivedObs::Scalar;
  if (z_null.size() == 0) throw invalid_input("p-values need a nonempty null set");
  std::vector<Scalar> sorted(z_null.size());
  Eigen::Map<Series<Scalar>>(sorted.data(), z_null.size()) = z_null.derived().reshaped().template cast<Scalar>();
  std::sort(sorted.begin(), sorted.end());

  const double n = double(sorted.size());
  typename DerivedObs::PlainObject p(z_obs.rows(), z_obs.cols());
  for (Index r = 0; r < z_obs.rows(); ++r) {
    for (Index c = 0; c < z_obs.cols(); ++c) {
      const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), z_obs(r, c));
      p(r, c) = Scalar(double(above) / n);
    }
  }
  return p;
}

inline constexpr Index kDefaultLfdrBins = 101;

/// Local false discovery rate with pi0 = 1: ratio of the null density to the
/// observed density, both estimated on one shared equal-width histogram over
/// the range of the union. Empty null bins take the density floor
/// 1 / (10 * |null| * binwidth). Ratios are clipped to 1.
template <typename DerivedObs, typename DerivedNull>
typename DerivedObs::PlainObject lfdr(const Eigen::DenseBase<DerivedObs>& z_obs,
                                      const Eigen::DenseBase<DerivedNull>& z_null,
                                      Index bins = kDefaultLfdrBins) {
  using Scalar = typename DerivedObs::Scalar;
  if (z_obs.size() == 0 || z_null.size() == 0) throw invalid_input("lfdr needs nonempty inputs");
  if (bins < 1) throw invalid_input("lfdr needs at least one bin");

  Binning binning{std::min(double(z_obs.minCoeff()), double(z_null.minCoeff())),
                  std::max(double(z_obs.maxCoeff()), double(z_null.maxCoeff())), bins};
  typename DerivedObs::PlainObject l(z_obs.rows(), z_obs.cols());
  if (!(binning.hi > binning.lo)) {
    l.setOnes();
    return l;
  }
  const auto null_counts = histogram(z_null, binning);
  const auto obs_counts = histogram(z_obs, binning);
  const double width = binning.width();
  const double n0 = double(z_null.size());
  const double n1 = double(z_obs.size());
  const double floor_density = 1.0 / (10.0 * n0 * width);

  for (Index r = 0; r < z_obs.rows(); ++r) {
    for (Index c = 0; c < z_obs.cols(); ++c) {
      const Index b = binning.bin_of(double(z_obs(r, c)));
      const double f0 = null_counts[b] > 0 ? double(null_counts[b]) / (n0 * width) : floor_density;
      const double f = double(obs_counts[b]) / (n1 * width);
      l(r, c) = Scalar(std::min(1.0, f0 / f));
    }
  }
  return l;
}

/// Default tuning grid {0.05, 0.10, ..., 0.95}.
inline Eigen::ArrayXd default_lambda_grid() {
  Eigen::ArrayXd grid(19);
  for (Index k = 0; k < grid.size(); ++k) grid[k] = 0.05 * double(k + 1);
  return grid;
}

/// Proportion of null p-values: median over lambda of
/// #{p > lambda} / (m (1 - lambda)), clipped to [0, 1].
template <typename Derived>
double estimate_pi0(const Eigen::DenseBase<Derived>& p,
                    const Eigen::ArrayXd& lambda_grid = default_lambda_grid()) {
  if (p.size() == 0) throw invalid_input("pi0 estimation needs p-values");
  if (lambda_grid.size() == 0 || (lambda_grid < 0.0).any() || (lambda_grid >= 1.0).any()) {
    throw invalid_input("lambda grid must be a nonempty subset of [0, 1)");
  }
  const auto pv = p.derived().reshaped().template cast<double>().eval();
  const double m = double(pv.size());
  Eigen::ArrayXd estimates(lambda_grid.size());
  for (Index k = 0; k < lambda_grid.size(); ++k) {
    const double lambda = lambda_grid[k];
    estimates[k] = double((pv > lambda).count()) / (m * (1.0 - lambda));
  }
  return std::clamp(median(estimates), 0.0, 1.0);
}

/// Per-pixel statistics of one analyzed image.
template <typename Scalar>
struct UncertaintyReport {
  PixelMap<Scalar> observed;  // post-processed attention map A
  PixelMap<Scalar> z;
  PixelMap<Scalar> p;
  PixelMap<Scalar> lfdr;
  /// B x m, one row per replicate, pixels row-major.
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z_null;
  double pi0 = 1.0;
  Scalar mu_hat = 0;
  Scalar sigma_hat = 0;

  Index height() const noexcept { return observed.rows(); }
  Index width() const noexcept { return observed.cols(); }
  Index replicates() const noexcept { return z_null.rows(); }
};

struct InferenceOptions {
  Index lfdr_bins = kDefaultLfdrBins;
  Eigen::ArrayXd lambda_grid = default_lambda_grid();
};

/// Statistics for an observed map given its B null maps.
template <typename Scalar>
UncertaintyReport<Scalar> analyze_maps(PixelMap<Scalar> observed,
                                       const std::vector<PixelMap<Scalar>>& null_maps,
                                       const InferenceOptions& options = {}) {
  if (null_maps.empty()) throw invalid_input("analysis needs at least one null map");
  const Index m = observed.size();
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ensemble(Index(null_maps.size()), m);
  for (std::size_t b = 0; b < null_maps.size(); ++b) {
    require_same_shape(observed, null_maps[b], "null attention map");
    ensemble.row(Index(b)) = flat(null_maps[b]).transpose();
  }

  UncertaintyReport<Scalar> report;
  const auto moments = null_moments(ensemble);
  report.mu_hat = moments.mean;
  report.sigma_hat = moments.stddev;
  report.z = z_stats(observed, moments);
  report.z_null = z_stats(ensemble, moments);
  report.p = p_values(report.z, report.z_null);
  report.lfdr = lfdr(report.z, report.z_null, options.lfdr_bins);
  report.pi0 = estimate_pi0(report.p, options.lambda_grid);
  report.observed = std::move(observed);
  return report;
}

/// Full pipeline for one image: observed map, bootstrap ensemble, null maps,
/// moments, z, p, lfdr and pi0.
template <typename Scalar>
UncertaintyReport<Scalar> analyze(const Image<Scalar>& image, const AttentionSource& source,
                                  const BootstrapConfig& config, const InferenceOptions& options = {},
                                  unsigned threads = 0) {
  config.validate();
  PixelMap<Scalar> observed = attention_for(image, source);
  std::vector<PixelMap<Scalar>> null_maps(static_cast<std::size_t>(config.replicates));

  if (source.kind == AttentionKind::external) {
    if (source.null_dumps.size() != null_maps.size()) {
      throw invalid_input("external source provides " + std::to_string(source.null_dumps.size()) +
                          " null dumps for B = " + std::to_string(config.replicates));
    }
    for (std::size_t b = 0; b < null_maps.size(); ++b) null_maps[b] = attention_for(image, source, b);
  } else {
    const auto stats = channel_stats(image);
    parallel_for(
        null_maps.size(),
        [&](std::size_t b) {
          const auto null_image = null_replicate(image, stats, config, mix_seed(config.seed, b + 1));
          null_maps[b] = attention_for(null_image, source);
        },
        threads);
  }
  return analyze_maps(std::move(observed), null_maps, options);
}

}  // namespace attnboot
