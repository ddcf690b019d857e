// Image files and tensor dumps.
//
// A tensor dump is a pair of files next to each other:
//   <name>.json  manifest: {"shape": [...], "dtype": "f32", "order": "row-major",
//                           "role": "...", "model": {...}, "seed": <int>?, ...}
//   <name>.f32   payload: prod(shape) IEEE-754 binary32 values, little-endian,
//                row-major, no header.
// Roles: image [H, W, 3], patch_attention [heads, grid_h, grid_w],
// pixel_attention [H, W], mask [H, W] (0/1), scalar_series [n] or [rows, n].
// Manifest keys beyond the standard ones are preserved in `extra`.

#pragma once

#include "attnboot/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attnboot {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// PNG

/// Decodes an 8- or 16-bit grayscale or RGB PNG (palette images are expanded
/// to RGB). Samples are divided by 255 or 65535.
Imaged load_image(const fs::path& path);

/// Writes an image as 8-bit RGB, rounding 255 * value.
void save_image_png(const fs::path& path, const Imaged& image);

/// Writes a [0, 1] map as 8-bit grayscale, rounding 255 * value.
void save_gray_png(const fs::path& path, const PixelMapd& values);

/// Raw 8-bit RGB writer: `rgb` holds height*width rows of 3 bytes.
void save_rgb8_png(const fs::path& path, Index height, Index width,
                   const Eigen::Array<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>& rgb);

// ---------------------------------------------------------------------------
// Tensor dumps

enum class DumpRole { image, patch_attention, pixel_attention, mask, scalar_series };

std::string_view to_string(DumpRole role);
DumpRole parse_dump_role(std::string_view name);

struct TensorDump {
  std::vector<Index> shape;
  DumpRole role = DumpRole::scalar_series;
  json model = json::object();
  std::optional<std::uint64_t> seed;
  json extra = json::object();
  Eigen::ArrayXf values;

  Index element_count() const;
};

/// Path of the payload belonging to a manifest (`x.json` -> `x.f32`).
fs::path payload_path(const fs::path& manifest);

/// Writes `<stem>.json` and `<stem>.f32`. `manifest` must end in ".json".
void write_dump(const fs::path& manifest, const TensorDump& dump);

/// Reads a dump; throws if the payload is missing, its size disagrees with the
/// manifest shape, or (when given) the role differs from `expected`.
TensorDump read_dump(const fs::path& manifest, std::optional<DumpRole> expected = std::nullopt);

/// Little-endian binary32 encoding of `values`, as written to payloads.
std::vector<std::uint8_t> encode_f32le(const Eigen::ArrayXf& values);
Eigen::ArrayXf decode_f32le(const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Typed conversions

template <typename Scalar>
TensorDump to_dump(const Image<Scalar>& image) {
  TensorDump d;
  d.shape = {image.height(), image.width(), 3};
  d.role = DumpRole::image;
  d.values = Eigen::Map<const Series<Scalar>>(image.pixels().data(), image.pixels().size())
                 .template cast<float>();
  return d;
}

template <typename Scalar>
TensorDump to_dump(const PixelMap<Scalar>& map, DumpRole role = DumpRole::pixel_attention) {
  TensorDump d;
  d.shape = {map.rows(), map.cols()};
  d.role = role;
  d.values = flat(map).template cast<float>();
  return d;
}

inline TensorDump to_dump(const RoiMask& mask) {
  TensorDump d;
  d.shape = {mask.height(), mask.width()};
  d.role = DumpRole::mask;
  d.values = flat(mask.members()).cast<float>();
  return d;
}

template <typename Scalar>
TensorDump to_dump(const PatchAttention<Scalar>& pa) {
  TensorDump d;
  d.shape = {pa.heads(), pa.grid_h, pa.grid_w};
  d.role = DumpRole::patch_attention;
  d.values = flat(pa.weights).template cast<float>();
  d.extra = {{"heads", pa.heads()},
             {"grid_h", pa.grid_h},
             {"grid_w", pa.grid_w},
             {"patch_size", pa.patch_size}};
  return d;
}

Imaged image_from_dump(const TensorDump& dump);
PixelMapd map_from_dump(const TensorDump& dump);
RoiMask mask_from_dump(const TensorDump& dump);
/// Requires manifest keys heads, grid_h, grid_w, patch_size consistent with the shape.
PatchAttention<double> patch_attention_from_dump(const TensorDump& dump);

}  // namespace attnboot
