// Evaluation of shrinkage against a known noise ROI.

#pragma once

#include "attnboot/core.hpp"
#include "attnboot/inference.hpp"
#include "attnboot/regularize.hpp"
#include "attnboot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace attnboot {

/// 100 * #{rest < a} / |rest|.
template <typename Derived>
double percentile_vs_rest(double a, const Eigen::DenseBase<Derived>& rest) {
  if (rest.size() == 0) throw invalid_input("percentile against an empty reference set");
  const auto v = rest.derived().reshaped();
  Index below = 0;
  for (Index i = 0; i < v.size(); ++i) below += double(v[i]) < a;
  return 100.0 * double(below) / double(rest.size());
}

namespace detail {

template <typename Derived>
void split_by_mask(const Eigen::DenseBase<Derived>& map, const RoiMask& mask, std::vector<double>& roi,
                   std::vector<double>& rest) {
  if (map.rows() != mask.height() || map.cols() != mask.width()) throw invalid_input("map and mask differ in shape");
  roi.clear();
  rest.clear();
  for (Index r = 0; r < map.rows(); ++r) {
    for (Index c = 0; c < map.cols(); ++c) (mask(r, c) ? roi : rest).push_back(double(map(r, c)));
  }
}

}  // namespace detail

/// Mean over ROI pixels of their percentile against the non-ROI pixels.
template <typename Derived>
double mean_percentile(const Eigen::DenseBase<Derived>& map, const RoiMask& mask) {
  std::vector<double> roi, rest;
  detail::split_by_mask(map, mask, roi, rest);
  if (roi.empty() || rest.empty()) throw invalid_input("mean percentile needs a nonempty, non-full ROI");
  std::sort(rest.begin(), rest.end());
  double total = 0.0;
  for (double a : roi) total += double(std::lower_bound(rest.begin(), rest.end(), a) - rest.begin());
  return 100.0 * total / (double(roi.size()) * double(rest.size()));
}

/// Fraction of ROI pixels with a nonzero score.
template <typename Derived>
double nonzero_fraction(const Eigen::DenseBase<Derived>& map, const RoiMask& mask) {
  std::vector<double> roi, rest;
  detail::split_by_mask(map, mask, roi, rest);
  if (roi.empty()) throw invalid_input("nonzero fraction of an empty ROI");
  return double(std::count_if(roi.begin(), roi.end(), [](double v) { return v != 0.0; })) / double(roi.size());
}

/// D = sum(after) / sum(before) over a set of images.
template <typename DB, typename DA>
double suppression_factor(const Eigen::DenseBase<DB>& before, const Eigen::DenseBase<DA>& after) {
  if (before.size() == 0 || before.size() != after.size()) {
    throw invalid_input("suppression factor needs equal-length nonempty lists");
  }
  const double denom = before.template cast<double>().sum();
  if (!(denom > 0.0)) throw invalid_input("suppression factor: mean percentiles before sum to zero");
  return after.template cast<double>().sum() / denom;
}

inline double suppression_factor(const std::vector<double>& before, const std::vector<double>& after) {
  return suppression_factor(Eigen::Map<const Eigen::ArrayXd>(before.data(), Index(before.size())),
                            Eigen::Map<const Eigen::ArrayXd>(after.data(), Index(after.size())));
}

/// Leave-one-image-out jackknife standard error of D.
inline double suppression_factor_jackknife_se(const std::vector<double>& before, const std::vector<double>& after) {
  const std::size_t n = before.size();
  if (n != after.size()) throw invalid_input("jackknife needs equal-length lists");
  if (n < 2) return 0.0;
  double sb = 0.0, sa = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sb += before[k];
    sa += after[k];
  }
  std::vector<double> loo(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double denom = sb - before[k];
    if (!(denom > 0.0)) return std::nan("");
    loo[k] = (sa - after[k]) / denom;
  }
  double mean = 0.0;
  for (double d : loo) mean += d;
  mean /= double(n);
  double ss = 0.0;
  for (double d : loo) ss += (d - mean) * (d - mean);
  return std::sqrt(double(n - 1) / double(n) * ss);
}

namespace detail {

template <typename DA, typename DR>
void roi_sums(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DR>& reg, const RoiMask& mask, bool in_roi,
              double& sum_a, double& sum_reg) {
  require_same_shape(a, reg, "sensitivity/specificity");
  if (a.rows() != mask.height() || a.cols() != mask.width()) throw invalid_input("map and mask differ in shape");
  sum_a = 0.0;
  sum_reg = 0.0;
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index c = 0; c < a.cols(); ++c) {
      if (mask(r, c) != in_roi) continue;
      sum_a += double(a(r, c));
      sum_reg += double(reg(r, c));
    }
  }
}

}  // namespace detail

/// Se = 1 - sum(reg) / sum(a) over the ROI.
template <typename DA, typename DR>
double sensitivity(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DR>& reg, const RoiMask& mask) {
  double sa, sr;
  detail::roi_sums(a, reg, mask, true, sa, sr);
  if (!(sa > 0.0)) throw invalid_input("sensitivity: ROI carries no attention before regularization");
  return 1.0 - sr / sa;
}

/// Sp = sum(reg) / sum(a) outside the ROI.
template <typename DA, typename DR>
double specificity(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DR>& reg, const RoiMask& mask) {
  double sa, sr;
  detail::roi_sums(a, reg, mask, false, sa, sr);
  if (!(sa > 0.0)) throw invalid_input("specificity: no attention outside the ROI before regularization");
  return sr / sa;
}

struct CurvePoint {
  double threshold;
  double se;
  double sp;
};

struct SeSpCurve {
  std::vector<CurvePoint> points;
  /// The pi0 rule applied to the same statistic (threshold field holds pi0).
  CurvePoint pi0_point;
};

/// 0 followed by 49 log-spaced values from 1e-3 to 1.
inline std::vector<double> default_sweep_thresholds() {
  std::vector<double> t{0.0};
  for (int k = 0; k < 49; ++k) t.push_back(std::pow(10.0, -3.0 + 3.0 * double(k) / 48.0));
  t.back() = 1.0;
  return t;
}

/// Se/Sp of p- or l-thresholding across `thresholds`, plus the pi0 rule on
/// the same statistic. Se and Sp are measured against the unregularized map.
template <typename Scalar>
SeSpCurve se_sp_curve(const UncertaintyReport<Scalar>& report, const RoiMask& mask, ShrinkageMethod method,
                      const std::vector<double>& thresholds, bool apply_z_zeroing = true) {
  if (method == ShrinkageMethod::pi0_threshold) {
    throw invalid_input("Se/Sp sweeps are defined for p- and l-thresholding");
  }
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw invalid_input("thresholds must be ascending");
  const PixelMap<Scalar>& a = report.observed;
  const PixelMap<Scalar>& statistic = method == ShrinkageMethod::p_threshold ? report.p : report.lfdr;
  const PixelMap<Scalar> base = apply_z_zeroing ? z_zeroing(a, report.z) : a;

  SeSpCurve curve;
  curve.points.reserve(thresholds.size());
  for (double t : thresholds) {
    const PixelMap<Scalar> reg = threshold_statistic(base, statistic, t);
    curve.points.push_back({t, sensitivity(a, reg, mask), specificity(a, reg, mask)});
  }
  const PixelMap<Scalar> reg = threshold_pi0(base, statistic, report.pi0);
  curve.pi0_point = {report.pi0, sensitivity(a, reg, mask), specificity(a, reg, mask)};
  return curve;
}

/// Signed RMS deviation of sorted p-values from the uniform plotting
/// positions (i - 0.5) / n; positive when the set leans towards 0.
template <typename Derived>
double srmsd(const Eigen::DenseBase<Derived>& p) {
  if (p.size() == 0) throw invalid_input("sRMSD of an empty set");
  std::vector<double> v(p.size());
  Eigen::Map<Eigen::ArrayXd>(v.data(), p.size()) = p.derived().reshaped().template cast<double>();
  std::sort(v.begin(), v.end());
  const double n = double(v.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - (double(i) + 0.5) / n;
    ss += d * d;
  }
  const double med = median(Eigen::Map<const Eigen::ArrayXd>(v.data(), Index(v.size())));
  const double sign = med < 0.5 ? 1.0 : (med > 0.5 ? -1.0 : 0.0);
  return sign * std::sqrt(ss / n);
}

}  // namespace attnboot
