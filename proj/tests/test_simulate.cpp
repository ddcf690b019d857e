#include "attnboot/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>

using namespace attnboot;

namespace {

// Every channel alternates 0.4 / 0.6: mean 0.5, sd 0.1, far from the clamp.
Imaged two_level_image(Index h, Index w) {
  Imaged::Pixels px(h * w, 3);
  for (Index i = 0; i < px.rows(); ++i) px.row(i).setConstant(i % 2 == 0 ? 0.4 : 0.6);
  return Imaged(h, w, px);
}

// 4-connected components of a mask, by breadth-first flood fill.
int connected_components(const RoiMask& mask) {
  const Index h = mask.height(), w = mask.width();
  std::vector<char> seen(std::size_t(h * w), 0);
  int components = 0;
  for (Index start = 0; start < h * w; ++start) {
    if (!mask.at_flat(start) || seen[std::size_t(start)]) continue;
    ++components;
    std::queue<Index> q;
    q.push(start);
    seen[std::size_t(start)] = 1;
    while (!q.empty()) {
      const Index i = q.front();
      q.pop();
      const Index r = i / w, c = i % w;
      const Index nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const Index j = n[0] * w + n[1];
        if (mask.at_flat(j) && !seen[std::size_t(j)]) {
          seen[std::size_t(j)] = 1;
          q.push(j);
        }
      }
    }
  }
  return components;
}

}  // namespace

TEST_CASE("inject_square: default square covers 100 x 100 pixels inside the image") {
  const auto img = two_level_image(480, 480);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    NoiseSpec spec;
    spec.seed = seed;
    const auto inj = inject_square(img, spec);
    CHECK(inj.mask.count() == 10000);
    CHECK(inj.top >= 0);
    CHECK(inj.top <= 380);
    CHECK(inj.left >= 0);
    CHECK(inj.left <= 380);
    CHECK(inj.mask(inj.top, inj.left));
    CHECK(inj.mask(inj.top + 99, inj.left + 99));
  }
}

TEST_CASE("inject_square: rejects images smaller than the square") {
  NoiseSpec spec;
  CHECK_THROWS_AS(inject_square(two_level_image(99, 200), spec), Error);
  spec.square_size = 0;
  CHECK_THROWS_AS(inject_square(two_level_image(200, 200), spec), Error);
}

TEST_CASE("inject_square: pixels outside the ROI are untouched; ROI matches channel stats") {
  const auto img = two_level_image(200, 240);
  NoiseSpec spec;
  spec.seed = 5;
  const auto inj = inject_square(img, spec);
  const auto& before = img.pixels();
  const auto& after = inj.image.pixels();
  Eigen::Array<double, 1, 3> sum = Eigen::Array<double, 1, 3>::Zero(), sq = sum;
  for (Index i = 0; i < before.rows(); ++i) {
    if (!inj.mask.at_flat(i)) {
      CHECK((after.row(i) == before.row(i)).all());
    } else {
      sum += after.row(i);
      sq += after.row(i).square();
    }
  }
  const double n = 10000;
  const auto mean = sum / n;
  const auto sd = (sq / n - mean.square()).sqrt();
  for (Index c = 0; c < 3; ++c) {
    CHECK(std::abs(mean[c] - 0.5) < 3 * 0.1 / std::sqrt(n));
    CHECK(std::abs(sd[c] - 0.1) < 3 * 0.1 / std::sqrt(2 * n));
  }
  CHECK(inject_square(img, spec).image == inj.image);
}

TEST_CASE("inject_square: corner location is uniform (chi-square over 1000 seeds)") {
  // 104 x 104 image with a 100-pixel square: 5 x 5 possible corners.
  const auto img = two_level_image(104, 104);
  std::array<int, 25> counts{};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    NoiseSpec spec;
    spec.seed = seed * 7919 + 1;
    const auto inj = inject_square(img, spec);
    ++counts[std::size_t(inj.top * 5 + inj.left)];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 40.0) * (c - 40.0) / 40.0;
  // 99th percentile of chi-square with 24 degrees of freedom.
  CHECK(chi2 < 42.98);
}

TEST_CASE("smooth_field: lambda 0 is the identity filter") {
  RandomStream rng(3);
  PixelMapd field(30, 45);
  for (Index i = 0; i < field.size(); ++i) field.data()[i] = rng.normal();
  CHECK(((smooth_field(field, 0.0) - field).abs() < 1e-12).all());
  // A smoothing filter shrinks the variance of white noise.
  const auto smooth = smooth_field(field, 20.0);
  CHECK((smooth - smooth.mean()).square().mean() < 0.5 * (field - field.mean()).square().mean());
}

TEST_CASE("diffuse_roi: N_p pixels, multiple clusters, untouched background") {
  const auto img = two_level_image(480, 480);
  double total_clusters = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NoiseSpec spec;
    spec.kind = NoiseKind::diffuse;
    spec.seed = seed;
    const auto mask = diffuse_mask(480, 480, spec);
    CHECK(mask.count() == 10000);
    total_clusters += connected_components(mask);
  }
  CHECK(total_clusters / 20.0 > 1.0);

  NoiseSpec spec;
  spec.kind = NoiseKind::diffuse;
  spec.seed = 4;
  const auto inj = inject(img, spec);
  CHECK(inj.mask.count() == 10000);
  for (Index i = 0; i < img.pixel_count(); ++i) {
    if (!inj.mask.at_flat(i)) CHECK((inj.image.pixels().row(i) == img.pixels().row(i)).all());
  }
}

TEST_CASE("diffuse mask: errors and invariance under affine rescaling of the field") {
  NoiseSpec spec;
  spec.kind = NoiseKind::diffuse;
  spec.pixel_count = 101;
  CHECK_THROWS_AS(diffuse_mask(10, 10, spec), Error);
  spec.pixel_count = 100;
  CHECK(diffuse_mask(10, 10, spec).count() == 100);

  RandomStream rng(8);
  PixelMapd field(20, 20);
  for (Index i = 0; i < field.size(); ++i) field.data()[i] = rng.normal();
  const PixelMapd scaled = 3.5 * field + 2.0;
  CHECK(top_k_indices(field, 37) == top_k_indices(scaled, 37));
}

TEST_CASE("mean_roi_z and the |z| <= 1 filter") {
  RoiMask mask(1, 4);
  mask(0, 0) = mask(0, 1) = mask(0, 2) = true;
  PixelMapd z(1, 4);
  z << 0.7, 0.7, 0.7, 50;
  CHECK(mean_roi_z(z, mask) == doctest::Approx(0.7));
  z << -1, 1, 0, 50;
  CHECK(mean_roi_z(z, mask) == 0.0);
  z << 0.2, 0.4, 0.9, -50;
  CHECK(mean_roi_z(z, mask) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(mean_roi_z(z, RoiMask(1, 4)), Error);

  CHECK(passes_z_filter(1.0));
  CHECK(passes_z_filter(-1.0));
  CHECK_FALSE(passes_z_filter(-1.2));
  CHECK(passes_z_filter(0.54));
}
