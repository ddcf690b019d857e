// Simulation-protocol evaluation: inject noise, analyze, regularize with
// each method, and score the result against the ROI.

#pragma once

#include "attnboot/inference.hpp"
#include "attnboot/metrics.hpp"
#include "attnboot/regularize.hpp"
#include "attnboot/simulate.hpp"
#include "attnboot/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace attnboot {

/// How a method's threshold is obtained from its configured value.
enum class ThresholdConvention {
  absolute,        // the value itself
  roi_percentile,  // the value-quantile of the statistic inside the ROI
  median,          // the median of the statistic over the whole map
};

inline std::string_view to_string(ThresholdConvention c) {
  switch (c) {
    case ThresholdConvention::absolute: return "absolute";
    case ThresholdConvention::roi_percentile: return "roi-percentile";
    case ThresholdConvention::median: return "median";
  }
  return "absolute";
}

inline ThresholdConvention parse_threshold_convention(std::string_view s) {
  if (s == "absolute") return ThresholdConvention::absolute;
  if (s == "roi-percentile") return ThresholdConvention::roi_percentile;
  if (s == "median") return ThresholdConvention::median;
  throw invalid_input("unknown threshold convention '" + std::string(s) + "'");
}

struct MethodSpec {
  ShrinkageMethod method = ShrinkageMethod::p_threshold;
  double value = 0.3;
  ThresholdConvention convention = ThresholdConvention::absolute;

  std::string label() const {
    if (method == ShrinkageMethod::pi0_threshold) return "pi0";
    if (convention == ThresholdConvention::median) return std::string(to_string(method)) + "@median";
    return std::string(to_string(method)) + "@" + std::string(to_string(convention)) + ":" + format_value();
  }

 private:
  std::string format_value() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", value);
    return buf;
  }
};

/// p- and l-thresholding at 0.3 plus the pi0 rule.
inline std::vector<MethodSpec> default_methods() {
  return {{ShrinkageMethod::p_threshold, 0.3, ThresholdConvention::absolute},
          {ShrinkageMethod::l_threshold, 0.3, ThresholdConvention::absolute},
          {ShrinkageMethod::pi0_threshold, 0.0, ThresholdConvention::absolute}};
}

/// Concrete threshold for a p- or l-method; `mask` is required by the
/// ROI-percentile convention.
template <typename Scalar>
double resolve_threshold(const UncertaintyReport<Scalar>& report, const MethodSpec& spec, const RoiMask* mask) {
  if (spec.method == ShrinkageMethod::pi0_threshold) return report.pi0;
  const PixelMap<Scalar>& statistic = spec.method == ShrinkageMethod::p_threshold ? report.p : report.lfdr;
  switch (spec.convention) {
    case ThresholdConvention::absolute: return spec.value;
    case ThresholdConvention::median: return median(flat(statistic).template cast<double>());
    case ThresholdConvention::roi_percentile: {
      if (mask == nullptr) throw invalid_input("the roi-percentile threshold needs a mask");
      if (!(spec.value >= 0.0 && spec.value <= 1.0)) throw invalid_input("ROI quantile must lie in [0, 1]");
      require_same_shape(statistic, mask->members(), "mask");
      std::vector<double> inside;
      for (Index i = 0; i < statistic.size(); ++i) {
        if (mask->at_flat(i)) inside.push_back(double(statistic.data()[i]));
      }
      return quantile(Eigen::Map<const Eigen::ArrayXd>(inside.data(), Index(inside.size())), spec.value);
    }
  }
  return spec.value;
}

template <typename Scalar>
ShrinkageSpec resolve_spec(const UncertaintyReport<Scalar>& report, const MethodSpec& spec, const RoiMask* mask,
                           bool apply_z_zeroing) {
  return {spec.method, spec.method == ShrinkageMethod::pi0_threshold ? 0.0 : resolve_threshold(report, spec, mask),
          apply_z_zeroing};
}

/// One row of the evaluation table: an (image, method) pair.
struct EvalRecord {
  std::string image_id;
  std::string method;
  double threshold = 0;
  double mean_roi_z = 0;
  bool passes_z_filter = true;
  double q_before = 0;
  double q_after = 0;
  double nonzero_before = 0;
  double nonzero_after = 0;
  std::optional<double> se;  // undefined when the ROI carries no attention
  std::optional<double> sp;  // undefined when the rest carries no attention
};

/// Scores every method on an analyzed, injected image.
template <typename Scalar>
std::vector<EvalRecord> evaluate_report(const std::string& image_id, const UncertaintyReport<Scalar>& report,
                                        const RoiMask& mask, const std::vector<MethodSpec>& methods,
                                        bool apply_z_zeroing = true) {
  const double mz = mean_roi_z(report.z, mask);
  const double q_before = mean_percentile(report.observed, mask);
  const double nz_before = nonzero_fraction(report.observed, mask);
  std::vector<EvalRecord> out;
  out.reserve(methods.size());
  for (const auto& m : methods) {
    const ShrinkageSpec spec = resolve_spec(report, m, &mask, apply_z_zeroing);
    const PixelMap<Scalar> reg = regularize(report, spec);
    EvalRecord rec;
    rec.image_id = image_id;
    rec.method = m.label();
    rec.threshold = m.method == ShrinkageMethod::pi0_threshold ? report.pi0 : spec.threshold;
    rec.mean_roi_z = mz;
    rec.passes_z_filter = passes_z_filter(mz);
    rec.q_before = q_before;
    rec.q_after = mean_percentile(reg, mask);
    rec.nonzero_before = nz_before;
    rec.nonzero_after = nonzero_fraction(reg, mask);
    try {
      rec.se = sensitivity(report.observed, reg, mask);
    } catch (const Error&) {
    }
    try {
      rec.sp = specificity(report.observed, reg, mask);
    } catch (const Error&) {
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Per-image seeds derived from the run seed and the image's position in the
/// sorted corpus.
inline std::uint64_t noise_seed_for(std::uint64_t run_seed, std::size_t image_index) {
  return mix_seed(run_seed, 2 * std::uint64_t(image_index) + 1);
}
inline std::uint64_t bootstrap_seed_for(std::uint64_t run_seed, std::size_t image_index) {
  return mix_seed(run_seed, 2 * std::uint64_t(image_index) + 2);
}

struct SimulationConfig {
  NoiseSpec noise;
  AttentionSource source;
  BootstrapConfig bootstrap;
  std::vector<MethodSpec> methods = default_methods();
  bool apply_z_zeroing = true;
  std::uint64_t seed = 0;
  InferenceOptions inference;
};

/// Inject, analyze and evaluate one corpus image.
template <typename Scalar>
std::vector<EvalRecord> simulate_image(const std::string& image_id, std::size_t image_index,
                                       const Image<Scalar>& image, const SimulationConfig& config) {
  NoiseSpec noise = config.noise;
  noise.seed = noise_seed_for(config.seed, image_index);
  BootstrapConfig boot = config.bootstrap;
  boot.seed = bootstrap_seed_for(config.seed, image_index);
  const auto injected = inject(image, noise);
  const auto report = analyze(injected.image, config.source, boot, config.inference, 1);
  return evaluate_report(image_id, report, injected.mask, config.methods, config.apply_z_zeroing);
}

struct SuppressionSummary {
  std::string method;
  std::size_t images = 0;
  double d = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

/// D per method over the records (optionally only those passing the z
/// filter), with a leave-one-image-out jackknife standard error.
inline std::vector<SuppressionSummary> summarize(const std::vector<EvalRecord>& records, bool z_filter) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_method;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (!by_method.contains(r.method)) order.push_back(r.method);
    auto& [before, after] = by_method[r.method];
    if (z_filter && !r.passes_z_filter) continue;
    before.push_back(r.q_before);
    after.push_back(r.q_after);
  }
  std::vector<SuppressionSummary> out;
  for (const auto& name : order) {
    const auto& [before, after] = by_method[name];
    SuppressionSummary s;
    s.method = name;
    s.images = before.size();
    const double total = std::accumulate(before.begin(), before.end(), 0.0);
    if (!before.empty() && total > 0.0) s.d = suppression_factor(before, after);
    if (before.size() >= 2 && total > 0.0) {
      try {
        s.se = suppression_factor_jackknife_se(before, after);
      } catch (const Error&) {
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace attnboot
