#include "attnboot/metrics.hpp"
#include "attnboot/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace attnboot;

namespace {

Eigen::ArrayXd vec(std::initializer_list<double> v) {
  Eigen::ArrayXd a(Index(v.size()));
  Index i = 0;
  for (double x : v) a[i++] = x;
  return a;
}

RoiMask left_half_mask(Index h, Index w) {
  RoiMask mask(h, w);
  mask.members().leftCols(w / 2).setConstant(true);
  return mask;
}

}  // namespace

TEST_CASE("percentile_vs_rest") {
  const auto rest = vec({0.1, 0.2, 0.3, 0.4});
  CHECK(percentile_vs_rest(0.0, rest) == 0.0);
  CHECK(percentile_vs_rest(0.5, rest) == 100.0);
  CHECK(percentile_vs_rest(0.25, rest) == 50.0);
  CHECK(percentile_vs_rest(0.2, rest) == 25.0);  // strict
  CHECK_THROWS_AS(percentile_vs_rest(0.2, Eigen::ArrayXd()), Error);
}

TEST_CASE("mean_percentile: perfectly suppressed ROI scores 0; errors on degenerate masks") {
  PixelMapd a(2, 4);
  a << 0, 0, 0.5, 0.7,  //
      0, 0, 0.2, 0.9;
  const auto mask = left_half_mask(2, 4);
  CHECK(mean_percentile(a, mask) == 0.0);

  a << 0.3, 0.95, 0.5, 0.7,  //
      0.1, 0.6, 0.2, 0.9;
  // ROI {0.3, 0.95, 0.1, 0.6} vs rest {0.5, 0.7, 0.2, 0.9}: 1, 4, 0, 2 below -> 25, 100, 0, 50.
  CHECK(mean_percentile(a, mask) == doctest::Approx(43.75));
  CHECK_THROWS_AS(mean_percentile(a, RoiMask(2, 4)), Error);
  RoiMask full(2, 4);
  full.members().setConstant(true);
  CHECK_THROWS_AS(mean_percentile(a, full), Error);
}

TEST_CASE("mean_percentile: exchangeable ROI and rest average 50") {
  RandomStream rng(31);
  double total = 0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    PixelMapd a(40, 40);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
    total += mean_percentile(a, left_half_mask(40, 40));
  }
  CHECK(std::abs(total / seeds - 50.0) < 2.0);
}

TEST_CASE("suppression_factor") {
  CHECK(suppression_factor(std::vector<double>{10, 20}, std::vector<double>{10, 20}) == 1.0);
  CHECK(suppression_factor(std::vector<double>{10, 20}, std::vector<double>{0, 0}) == 0.0);
  CHECK(suppression_factor(std::vector<double>{10, 20}, std::vector<double>{1, 2}) == doctest::Approx(0.1));
  CHECK_THROWS_AS(suppression_factor(std::vector<double>{0, 0}, std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(suppression_factor(std::vector<double>{1}, std::vector<double>{1, 2}), Error);

  RandomStream rng(2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> b(5), a(5), bs(5), as(5);
    const double k = 0.1 + 10 * rng.uniform();
    for (int i = 0; i < 5; ++i) {
      b[i] = 100 * rng.uniform();
      a[i] = b[i] * rng.uniform();
      bs[i] = k * b[i];
      as[i] = k * a[i];
    }
    CHECK(suppression_factor(b, a) == doctest::Approx(suppression_factor(bs, as)).epsilon(1e-12));
  }
}

TEST_CASE("jackknife standard error of D") {
  // Leave-one-out D values: {2/4, 1/3, 3/5}... constructed so that every ratio is equal.
  const std::vector<double> before{10, 20, 30}, after{1, 2, 3};
  CHECK(suppression_factor_jackknife_se(before, after) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> after2{0, 2, 3};
  // LOO: (5/50, 3/40, 2/30) -> jackknife SE by hand.
  const double d1 = 5.0 / 50, d2 = 3.0 / 40, d3 = 2.0 / 30;
  const double m = (d1 + d2 + d3) / 3;
  const double se = std::sqrt(2.0 / 3.0 * ((d1 - m) * (d1 - m) + (d2 - m) * (d2 - m) + (d3 - m) * (d3 - m)));
  CHECK(suppression_factor_jackknife_se(before, after2) == doctest::Approx(se).epsilon(1e-14));
}

TEST_CASE("sensitivity and specificity") {
  PixelMapd a(1, 4), reg(1, 4);
  RoiMask mask(1, 4);
  mask(0, 0) = mask(0, 1) = true;
  a << 1, 1, 2, 2;

  reg = a;
  CHECK(sensitivity(a, reg, mask) == 0.0);
  CHECK(specificity(a, reg, mask) == 1.0);

  reg << 0, 0, 0, 0;
  CHECK(sensitivity(a, reg, mask) == 1.0);
  CHECK(specificity(a, reg, mask) == 0.0);

  reg << 0, 1, 2, 0;
  CHECK(sensitivity(a, reg, mask) == 0.5);
  CHECK(specificity(a, reg, mask) == 0.5);

  a << 0, 0, 1, 1;
  CHECK_THROWS_AS(sensitivity(a, reg, mask), Error);
  a << 1, 1, 0, 0;
  CHECK_THROWS_AS(specificity(a, reg, mask), Error);
}

TEST_CASE("default sweep: 0 plus 49 log-spaced values ending at 1") {
  const auto t = default_sweep_thresholds();
  REQUIRE(t.size() == 50);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == doctest::Approx(1e-3));
  CHECK(t[49] == 1.0);
  for (std::size_t k = 2; k < t.size(); ++k) {
    CHECK(t[k] / t[k - 1] == doctest::Approx(std::pow(1000.0, 1.0 / 48.0)));
  }
}

TEST_CASE("srmsd: hand values and bound") {
  CHECK(srmsd(vec({0.25, 0.75})) == 0.0);
  CHECK(srmsd(vec({0.0, 0.0})) == doctest::Approx(std::sqrt(0.3125)).epsilon(1e-15));
  CHECK(srmsd(vec({1.0, 1.0})) == doctest::Approx(-std::sqrt(0.3125)).epsilon(1e-15));

  const Index n = 1001;
  Eigen::ArrayXd grid(n);
  for (Index i = 0; i < n; ++i) grid[i] = (double(i) + 0.5) / double(n);
  CHECK(std::abs(srmsd(grid)) < 1e-15);

  RandomStream rng(5);
  for (int t = 0; t < 200; ++t) {
    Eigen::ArrayXd p(1 + Index(rng.below(50)));
    for (Index i = 0; i < p.size(); ++i) p[i] = rng.below(3) == 0 ? double(rng.below(2)) : rng.uniform();
    CHECK(std::abs(srmsd(p)) <= std::sqrt(1.0 / 3.0));
  }
}

TEST_CASE("srmsd of uniform samples concentrates near 0") {
  RandomStream rng(77);
  double total = 0;
  for (int s = 0; s < 100; ++s) {
    Eigen::ArrayXd p(10000);
    for (Index i = 0; i < p.size(); ++i) p[i] = rng.uniform();
    total += std::abs(srmsd(p));
  }
  CHECK(total / 100 < 0.05);
}

TEST_CASE("se_sp_curve: endpoints, monotonicity and the pi0 point") {
  RandomStream rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    UncertaintyReport<double> rep;
    const Index h = 8, w = 8;
    rep.observed = PixelMapd(h, w);
    rep.z = PixelMapd(h, w);
    for (Index i = 0; i < rep.observed.size(); ++i) {
      rep.observed.data()[i] = 0.05 + rng.uniform();
      rep.z.data()[i] = rng.normal();
    }
    Eigen::ArrayXd null(256);
    for (Index i = 0; i < null.size(); ++i) null[i] = rng.normal();
    rep.p = p_values(rep.z, null);
    rep.lfdr = lfdr(rep.z, null);
    rep.pi0 = estimate_pi0(rep.p);
    const auto mask = left_half_mask(h, w);

    for (auto method : {ShrinkageMethod::p_threshold, ShrinkageMethod::l_threshold}) {
      const auto curve = se_sp_curve(rep, mask, method, default_sweep_thresholds(), false);
      REQUIRE(curve.points.size() == 50);
      CHECK(curve.points.back().se == 0.0);
      CHECK(curve.points.back().sp == 1.0);
      for (std::size_t k = 1; k < curve.points.size(); ++k) {
        CHECK(curve.points[k].se <= curve.points[k - 1].se);
        CHECK(curve.points[k].sp >= curve.points[k - 1].sp);
      }
      CHECK(curve.pi0_point.threshold == rep.pi0);
    }
  }
  UncertaintyReport<double> rep;
  CHECK_THROWS_AS(se_sp_curve(rep, RoiMask(1, 1), ShrinkageMethod::pi0_threshold, {0.5}), Error);
  CHECK_THROWS_AS(se_sp_curve(rep, RoiMask(1, 1), ShrinkageMethod::p_threshold, {0.5, 0.1}), Error);
}

TEST_CASE("nonzero_fraction") {
  PixelMapd a(1, 4);
  a << 0, 1, 0, 0;
  RoiMask mask(1, 4);
  mask(0, 0) = mask(0, 1) = true;
  CHECK(nonzero_fraction(a, mask) == 0.5);
}

TEST_CASE("median and quantile helpers") {
  CHECK(median(vec({3, 1, 2})) == 2.0);
  CHECK(median(vec({4, 1, 3, 2})) == 2.5);
  CHECK(quantile(vec({1, 2, 3, 4, 5}), 0.1) == doctest::Approx(1.4));
  CHECK(quantile(vec({1, 2, 3, 4, 5}), 1.0) == 5.0);
  CHECK_THROWS_AS(median(Eigen::ArrayXd()), Error);
}
