// Core dense types shared by every stage of the attention-uncertainty pipeline.
//
// All containers are thin wrappers over Eigen arrays in row-major storage, so a
// flat view of any map walks pixels in row-major order. Everything is
// templated on the scalar type; `double` is the working precision of the
// pipeline and `float` is what goes over the wire in tensor dumps.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace attnboot {

using Index = Eigen::Index;

/// Failure classes. The CLI maps these one-to-one onto exit codes.
enum class Errc {
  invalid_input = 2,
  io = 3,
  degenerate = 4,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline Error invalid_input(const std::string& what) { return {Errc::invalid_input, what}; }
inline Error io_error(const std::string& what) { return {Errc::io, what}; }
inline Error degenerate(const std::string& what) { return {Errc::degenerate, what}; }

template <typename Scalar>
using PixelMap = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PixelMapd = PixelMap<double>;
using PixelMapf = PixelMap<float>;

template <typename Scalar>
using Series = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Row-major flat view over any contiguous row-major array.
template <typename Derived>
auto flat(const Eigen::DenseBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::IsRowMajor || Derived::ColsAtCompileTime == 1,
                "flat() requires row-major storage");
  return Eigen::Map<const Series<Scalar>>(a.derived().data(), a.size());
}

template <typename Derived>
auto flat(Eigen::DenseBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::IsRowMajor || Derived::ColsAtCompileTime == 1,
                "flat() requires row-major storage");
  return Eigen::Map<Series<Scalar>>(a.derived().data(), a.size());
}

/// H x W x 3 image with unit-interval samples.
///
/// Pixels are stored as an (H*W) x 3 row-major array: one row per pixel in
/// row-major pixel order, channels interleaved. Grayscale sources are
/// replicated into all three channels by the loader.
template <typename Scalar = double>
class Image {
 public:
  using Pixels = Eigen::Array<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

  Image(Index height, Index width) : height_(height), width_(width) {
    check_dims();
    pixels_ = Pixels::Zero(height * width, 3);
  }

  Image(Index height, Index width, Pixels pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    check_dims();
    if (pixels_.rows() != height_ * width_) {
      throw invalid_input("image pixel count does not match dimensions");
    }
    if (!((pixels_ >= Scalar(0)) && (pixels_ <= Scalar(1))).all()) {
      throw invalid_input("image samples must lie in [0, 1]");
    }
  }

  static Image constant(Index height, Index width, Scalar value) {
    return Image(height, width, Pixels::Constant(height * width, 3, value));
  }

  Index height() const noexcept { return height_; }
  Index width() const noexcept { return width_; }
  Index pixel_count() const noexcept { return height_ * width_; }

  const Pixels& pixels() const noexcept { return pixels_; }

  Scalar at(Index row, Index col, Index channel) const {
    return pixels_(row * width_ + col, channel);
  }

  /// Channel c as an H x W map.
  PixelMap<Scalar> channel(Index c) const {
    PixelMap<Scalar> out(height_, width_);
    flat(out) = pixels_.col(c);
    return out;
  }

  /// Unweighted channel mean (r + g + b) / 3 as an H x W map.
  PixelMap<Scalar> gray() const {
    PixelMap<Scalar> out(height_, width_);
    flat(out) = pixels_.rowwise().sum() / Scalar(3);
    return out;
  }

  template <typename NewScalar>
  Image<NewScalar> cast() const {
    typename Image<NewScalar>::Pixels px = pixels_.template cast<NewScalar>();
    return Image<NewScalar>(height_, width_, std::move(px));
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           (a.pixels_ == b.pixels_).all();
  }

 private:
  void check_dims() const {
    if (height_ < 1 || width_ < 1) throw invalid_input("image dimensions must be positive");
  }

  Index height_;
  Index width_;
  Pixels pixels_;
};

using Imaged = Image<double>;
using Imagef = Image<float>;

/// Per-head CLS attention over a patch grid.
///
/// `weights` holds one row per head; each row is the grid flattened row-major.
template <typename Scalar = double>
struct PatchAttention {
  using Weights = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Index grid_h = 0;
  Index grid_w = 0;
  Index patch_size = 0;
  Weights weights;

  Index heads() const noexcept { return weights.rows(); }
  Index patch_count() const noexcept { return grid_h * grid_w; }

  void validate() const {
    if (grid_h < 1 || grid_w < 1 || patch_size < 1) {
      throw invalid_input("patch attention grid and patch size must be positive");
    }
    if (weights.rows() < 1 || weights.cols() != patch_count()) {
      throw invalid_input("patch attention weights do not match the grid");
    }
    if (!(weights >= Scalar(0)).all()) {
      throw invalid_input("patch attention weights must be nonnegative");
    }
  }
};

/// Boolean H x W membership mask of injected-noise pixels.
class RoiMask {
 public:
  using Members = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  RoiMask(Index height, Index width) : members_(Members::Constant(height, width, false)) {}
  explicit RoiMask(Members members) : members_(std::move(members)) {}

  Index height() const noexcept { return members_.rows(); }
  Index width() const noexcept { return members_.cols(); }
  Index pixel_count() const noexcept { return members_.size(); }
  Index count() const { return members_.count(); }

  bool operator()(Index row, Index col) const { return members_(row, col); }
  bool& operator()(Index row, Index col) { return members_(row, col); }
  bool at_flat(Index i) const { return members_.data()[i]; }

  const Members& members() const noexcept { return members_; }
  Members& members() noexcept { return members_; }

  friend bool operator==(const RoiMask& a, const RoiMask& b) {
    return a.members_.rows() == b.members_.rows() && a.members_.cols() == b.members_.cols() &&
           (a.members_ == b.members_).all();
  }

 private:
  Members members_;
};

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw invalid_input(std::string(what) + ": shape mismatch");
  }
}

}  // namespace attnboot
