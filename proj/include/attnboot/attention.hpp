// Attention maps: the built-in toy model, external extractor dumps, and the
// post-processing that turns per-head patch weights into a pixel map
// (head mean -> nearest-neighbour upsampling -> min-max normalization).

#pragma once

#include "attnboot/core.hpp"
#include "attnboot/io.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace attnboot {

/// Lower bound on the toy model's softmax temperature.
inline constexpr double kToyTemperatureFloor = 1e-12;

/// Affine rescale to [0, 1]. A constant map becomes all zeros.
template <typename Derived>
PixelMap<typename Derived::Scalar> min_max_normalize(const Eigen::ArrayBase<Derived>& map) {
  using Scalar = typename Derived::Scalar;
  const Scalar lo = map.minCoeff();
  const Scalar hi = map.maxCoeff();
  if (!(hi > lo)) return PixelMap<Scalar>::Zero(map.rows(), map.cols());
  PixelMap<Scalar> out = (map - lo) / (hi - lo);
  // Pin the extremes: (hi - lo) / (hi - lo) can round below 1.
  for (Index i = 0; i < out.size(); ++i) {
    if (map.derived().data()[i] == hi) out.data()[i] = Scalar(1);
  }
  return out;
}

/// Single-head stand-in for a ViT: patch score is the population variance of
/// the patch's gray values (r+g+b)/3, weights are softmax(v / tau) with
/// tau = max(mean patch variance, 1e-12).
template <typename Scalar>
PatchAttention<Scalar> toy_attention(const Image<Scalar>& image, Index patch_size) {
  if (patch_size < 1 || image.height() % patch_size != 0 || image.width() % patch_size != 0) {
    throw invalid_input("patch size " + std::to_string(patch_size) + " does not tile a " +
                        std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                        " image");
  }
  PatchAttention<Scalar> pa;
  pa.patch_size = patch_size;
  pa.grid_h = image.height() / patch_size;
  pa.grid_w = image.width() / patch_size;

  const PixelMap<Scalar> gray = image.gray();
  Eigen::Array<double, 1, Eigen::Dynamic> variance(pa.patch_count());
  for (Index gy = 0; gy < pa.grid_h; ++gy) {
    for (Index gx = 0; gx < pa.grid_w; ++gx) {
      const auto block = gray.block(gy * patch_size, gx * patch_size, patch_size, patch_size)
                             .template cast<double>();
      const double mean = block.mean();
      variance[gy * pa.grid_w + gx] = (block - mean).square().mean();
    }
  }
  const double tau = std::max(variance.mean(), kToyTemperatureFloor);
  const auto logits = variance / tau;
  const Eigen::Array<double, 1, Eigen::Dynamic> e = (logits - logits.maxCoeff()).exp();
  pa.weights = (e / e.sum()).template cast<Scalar>();
  return pa;
}

/// Head mean, nearest-neighbour upsampling to target size, min-max normalization.
template <typename Scalar>
PixelMap<Scalar> postprocess(const PatchAttention<Scalar>& pa, Index target_h, Index target_w) {
  pa.validate();
  if (pa.grid_h * pa.patch_size != target_h || pa.grid_w * pa.patch_size != target_w) {
    throw invalid_input("patch grid " + std::to_string(pa.grid_h) + "x" + std::to_string(pa.grid_w) +
                        " with patch size " + std::to_string(pa.patch_size) + " does not cover " +
                        std::to_string(target_h) + "x" + std::to_string(target_w));
  }
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> mean = pa.weights.colwise().mean();
  PixelMap<Scalar> up(target_h, target_w);
  for (Index r = 0; r < target_h; ++r) {
    const Index gy = r / pa.patch_size;
    for (Index c = 0; c < target_w; ++c) up(r, c) = mean[gy * pa.grid_w + c / pa.patch_size];
  }
  return min_max_normalize(up);
}

enum class AttentionKind { toy, external };

struct AttentionSource {
  AttentionKind kind = AttentionKind::toy;
  Index patch_size = 8;
  /// External kind: patch_attention dump of the observed image.
  fs::path observed_dump;
  /// External kind: one patch_attention dump per bootstrap replicate, in order.
  std::vector<fs::path> null_dumps;
};

/// Pixel attention for `image`. With `replicate` set, the external source
/// reads the dump of that (0-based) null replicate instead of the observed one.
template <typename Scalar>
PixelMap<Scalar> attention_for(const Image<Scalar>& image, const AttentionSource& source,
                               std::optional<std::size_t> replicate = std::nullopt) {
  if (source.kind == AttentionKind::toy) {
    return postprocess(toy_attention(image, source.patch_size), image.height(), image.width());
  }
  fs::path path = source.observed_dump;
  if (replicate) {
    if (*replicate >= source.null_dumps.size()) {
      throw invalid_input("no null attention dump for replicate " + std::to_string(*replicate + 1));
    }
    path = source.null_dumps[*replicate];
  }
  if (path.empty()) throw invalid_input("external attention source has no dump path");
  const auto pa = patch_attention_from_dump(read_dump(path, DumpRole::patch_attention));
  if (source.patch_size > 0 && pa.patch_size != source.patch_size) {
    throw invalid_input("dump " + path.string() + " has patch size " + std::to_string(pa.patch_size) +
                        ", expected " + std::to_string(source.patch_size));
  }
  if constexpr (std::is_same_v<Scalar, double>) {
    return postprocess(pa, image.height(), image.width());
  } else {
    PatchAttention<Scalar> cast{pa.grid_h, pa.grid_w, pa.patch_size, pa.weights.template cast<Scalar>()};
    return postprocess(cast, image.height(), image.width());
  }
}

}  // namespace attnboot
