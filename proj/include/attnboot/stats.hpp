#pragma once

#include "attnboot/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace attnboot {

/// Median; midpoint of the two central order statistics for even sizes.
template <typename Derived>
typename Derived::Scalar median(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw invalid_input("median of an empty set");
  std::vector<Scalar> v(values.size());
  Eigen::Map<Series<Scalar>>(v.data(), values.size()) = values.derived().reshaped();
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const Scalar upper = *mid;
  const Scalar lower = *std::max_element(v.begin(), mid);
  return lower + (upper - lower) / Scalar(2);
}

/// Quantile at level q in [0, 1] with linear interpolation between order
/// statistics (position q * (n - 1)).
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& values, double q) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) throw invalid_input("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw invalid_input("quantile level must lie in [0, 1]");
  std::vector<Scalar> v(values.size());
  Eigen::Map<Series<Scalar>>(v.data(), values.size()) = values.derived().reshaped();
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - double(lo);
  return Scalar(double(v[lo]) + frac * (double(v[hi]) - double(v[lo])));
}

/// Equal-width bins over [lo, hi]; the top edge belongs to the last bin.
struct Binning {
  double lo = 0.0;
  double hi = 1.0;
  Index bins = 1;

  double width() const { return (hi - lo) / double(bins); }

  Index bin_of(double x) const {
    if (!(hi > lo)) return 0;
    const auto b = static_cast<Index>(std::floor((x - lo) / width()));
    return std::clamp<Index>(b, 0, bins - 1);
  }

  double edge(Index k) const { return k == bins ? hi : lo + double(k) * width(); }
};

template <typename Derived>
Eigen::Array<Index, Eigen::Dynamic, 1> histogram(const Eigen::DenseBase<Derived>& values,
                                                 const Binning& binning) {
  Eigen::Array<Index, Eigen::Dynamic, 1> counts = Eigen::Array<Index, Eigen::Dynamic, 1>::Zero(binning.bins);
  const auto v = values.derived().reshaped();
  for (Index i = 0; i < v.size(); ++i) ++counts[binning.bin_of(double(v[i]))];
  return counts;
}

}  // namespace attnboot
