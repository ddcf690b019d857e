// Shrinkage of attention maps. Every rule is a pointwise zero-mask: a score
// either survives unchanged or becomes 0.

#pragma once

#include "attnboot/core.hpp"
#include "attnboot/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>
#include <vector>

namespace attnboot {

/// Zero scores whose z-statistic is <= 0 (z = 0 included).
template <typename DA, typename DZ>
typename DA::PlainObject z_zeroing(const Eigen::DenseBase<DA>& scores, const Eigen::DenseBase<DZ>& z) {
  require_same_shape(scores, z, "z_zeroing");
  return (z.derived().array() <= 0).select(typename DA::Scalar(0), scores.derived().array());
}

/// Zero scores whose statistic exceeds the threshold (survive at equality).
/// Used for both p-value and LFDR thresholding.
template <typename DA, typename DS>
typename DA::PlainObject threshold_statistic(const Eigen::DenseBase<DA>& scores,
                                             const Eigen::DenseBase<DS>& statistic, double threshold) {
  require_same_shape(scores, statistic, "threshold");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw invalid_input("threshold must lie in [0, 1]");
  return (statistic.derived().array().template cast<double>() > threshold)
      .select(typename DA::Scalar(0), scores.derived().array());
}

template <typename DA, typename DP>
typename DA::PlainObject threshold_p(const Eigen::DenseBase<DA>& scores, const Eigen::DenseBase<DP>& p,
                                     double p_th) {
  return threshold_statistic(scores, p, p_th);
}

template <typename DA, typename DL>
typename DA::PlainObject threshold_l(const Eigen::DenseBase<DA>& scores, const Eigen::DenseBase<DL>& l,
                                     double l_th) {
  return threshold_statistic(scores, l, l_th);
}

/// Number of scores the pi0 rule removes from m: ceil(pi0 * m).
inline Index pi0_removal_count(double pi0, Index m) {
  if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw invalid_input("pi0 must lie in [0, 1]");
  return std::min<Index>(m, static_cast<Index>(std::ceil(pi0 * double(m))));
}

/// Zero the ceil(pi0 * m) scores with the largest statistic. Ties in the
/// statistic are removed smaller-score first, then lower row-major index first.
template <typename DA, typename DS>
typename DA::PlainObject threshold_pi0(const Eigen::DenseBase<DA>& scores,
                                       const Eigen::DenseBase<DS>& statistic, double pi0) {
  require_same_shape(scores, statistic, "threshold_pi0");
  const Index m = scores.size();
  const Index removed = pi0_removal_count(pi0, m);
  typename DA::PlainObject out = scores.derived();
  if (removed == 0) return out;

  // Row-major flat access for both inputs.
  const auto a = [&](Index i) { return scores.derived()(i / scores.cols(), i % scores.cols()); };
  const auto s = [&](Index i) { return statistic.derived()(i / scores.cols(), i % scores.cols()); };
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
    if (s(i) != s(j)) return s(i) > s(j);
    if (a(i) != a(j)) return a(i) < a(j);
    return i < j;
  });
  for (Index k = 0; k < removed; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    out(i / scores.cols(), i % scores.cols()) = 0;
  }
  return out;
}

enum class ShrinkageMethod { p_threshold, l_threshold, pi0_threshold };

inline std::string_view to_string(ShrinkageMethod m) {
  switch (m) {
    case ShrinkageMethod::p_threshold: return "p";
    case ShrinkageMethod::l_threshold: return "l";
    case ShrinkageMethod::pi0_threshold: return "pi0";
  }
  return "?";
}

inline ShrinkageMethod parse_shrinkage_method(std::string_view s) {
  if (s == "p" || s == "p_threshold") return ShrinkageMethod::p_threshold;
  if (s == "l" || s == "l_threshold" || s == "lfdr") return ShrinkageMethod::l_threshold;
  if (s == "pi0" || s == "pi0_threshold") return ShrinkageMethod::pi0_threshold;
  throw invalid_input("unknown shrinkage method '" + std::string(s) + "'");
}

struct ShrinkageSpec {
  ShrinkageMethod method = ShrinkageMethod::p_threshold;
  double threshold = 0.3;  // ignored by pi0_threshold
  bool apply_z_zeroing = true;

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw invalid_input("threshold must lie in [0, 1]");
  }
};

/// Applies a spec to the report's observed map: optional z-zeroing, then the
/// rule. The pi0 rule ranks by p-values.
template <typename Scalar>
PixelMap<Scalar> regularize(const UncertaintyReport<Scalar>& report, const ShrinkageSpec& spec) {
  spec.validate();
  PixelMap<Scalar> a = spec.apply_z_zeroing ? z_zeroing(report.observed, report.z) : report.observed;
  switch (spec.method) {
    case ShrinkageMethod::p_threshold: return threshold_p(a, report.p, spec.threshold);
    case ShrinkageMethod::l_threshold: return threshold_l(a, report.lfdr, spec.threshold);
    case ShrinkageMethod::pi0_threshold: return threshold_pi0(a, report.p, report.pi0);
  }
  return a;
}

}  // namespace attnboot
