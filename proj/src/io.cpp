#include "attnboot/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace attnboot {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw io_error("cannot open " + path.string());
  return f;
}

// Decoded PNG before conversion. Filled through a pointer so nothing on the
// stack frame that calls setjmp is modified between setjmp and longjmp.
struct RawPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<png_byte> bytes;
  std::string error;
};

void png_error_to_string(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<RawPng*>(png_get_error_ptr(png));
  raw->error = msg;
  png_longjmp(png, 1);
}

void png_warning_ignored(png_structp, png_const_charp) {}

// Returns false on a libpng error (message in raw->error).
bool decode_png(std::FILE* file, RawPng* raw) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, raw, png_error_to_string, png_warning_ignored);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_RGB ||
      color_type == PNG_COLOR_TYPE_PALETTE) {
    // tRNS would add an alpha channel under palette expansion; drop it.
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  raw->width = png_get_image_width(png, info);
  raw->height = png_get_image_height(png, info);
  raw->bit_depth = png_get_bit_depth(png, info);
  raw->channels = png_get_channels(png, info);
  const int final_type = png_get_color_type(png, info);
  if ((final_type != PNG_COLOR_TYPE_GRAY && final_type != PNG_COLOR_TYPE_RGB) ||
      (raw->bit_depth != 8 && raw->bit_depth != 16)) {
    raw->error = "unsupported PNG format (need 8/16-bit gray or RGB, got color type " +
                 std::to_string(final_type) + ", bit depth " + std::to_string(raw->bit_depth) +
                 ")";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw->bytes.resize(rowbytes * raw->height);
  std::vector<png_bytep> rows(raw->height);
  for (png_uint_32 r = 0; r < raw->height; ++r) rows[r] = raw->bytes.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct EncodeJob {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int color_type = PNG_COLOR_TYPE_RGB;
  int channels = 3;
  const std::uint8_t* bytes = nullptr;
  std::string error;
};

void png_write_error(png_structp png, png_const_charp msg) {
  auto* job = static_cast<EncodeJob*>(png_get_error_ptr(png));
  job->error = msg;
  png_longjmp(png, 1);
}

bool encode_png(std::FILE* file, EncodeJob* job) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, job, png_write_error, png_warning_ignored);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, job->width, job->height, 8, job->color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(job->width) * job->channels;
  for (png_uint_32 r = 0; r < job->height; ++r) {
    png_write_row(png, const_cast<png_bytep>(job->bytes + r * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const fs::path& path, Index height, Index width, int color_type, int channels,
               const std::uint8_t* bytes) {
  auto file = open_file(path, "wb");
  EncodeJob job;
  job.width = static_cast<png_uint_32>(width);
  job.height = static_cast<png_uint_32>(height);
  job.color_type = color_type;
  job.channels = channels;
  job.bytes = bytes;
  if (!encode_png(file.get(), &job)) throw io_error("cannot encode " + path.string() + ": " + job.error);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Imaged load_image(const fs::path& path) {
  if (!fs::exists(path)) throw invalid_input("no such image: " + path.string());
  auto file = open_file(path, "rb");
  png_byte signature[8] = {};
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw invalid_input("not a PNG file: " + path.string());
  }
  std::rewind(file.get());

  auto raw = std::make_unique<RawPng>();
  if (!decode_png(file.get(), raw.get())) {
    throw invalid_input("cannot decode " + path.string() + ": " + raw->error);
  }

  const Index h = raw->height;
  const Index w = raw->width;
  const int ch = raw->channels;
  const bool wide = raw->bit_depth == 16;
  const double scale = wide ? 65535.0 : 255.0;
  Imaged::Pixels px(h * w, 3);
  const png_byte* src = raw->bytes.data();
  for (Index i = 0; i < h * w; ++i) {
    for (int c = 0; c < 3; ++c) {
      const Index sample = i * ch + (ch == 1 ? 0 : c);
      // PNG stores 16-bit samples big-endian.
      const unsigned v = wide ? (unsigned(src[2 * sample]) << 8) | src[2 * sample + 1]
                              : unsigned(src[sample]);
      px(i, c) = v / scale;
    }
  }
  return Imaged(h, w, std::move(px));
}

void save_image_png(const fs::path& path, const Imaged& image) {
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor> rgb =
      image.pixels().unaryExpr([](double v) { return to_byte(v); });
  save_rgb8_png(path, image.height(), image.width(), rgb);
}

void save_gray_png(const fs::path& path, const PixelMapd& values) {
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bytes =
      values.unaryExpr([](double v) { return to_byte(v); });
  write_png(path, values.rows(), values.cols(), PNG_COLOR_TYPE_GRAY, 1, bytes.data());
}

void save_rgb8_png(const fs::path& path, Index height, Index width,
                   const Eigen::Array<std::uint8_t, Eigen::Dynamic, 3, Eigen::RowMajor>& rgb) {
  if (rgb.rows() != height * width) throw invalid_input("rgb buffer does not match dimensions");
  write_png(path, height, width, PNG_COLOR_TYPE_RGB, 3, rgb.data());
}

// ---------------------------------------------------------------------------

std::string_view to_string(DumpRole role) {
  switch (role) {
    case DumpRole::image: return "image";
    case DumpRole::patch_attention: return "patch_attention";
    case DumpRole::pixel_attention: return "pixel_attention";
    case DumpRole::mask: return "mask";
    case DumpRole::scalar_series: return "scalar_series";
  }
  return "unknown";
}

DumpRole parse_dump_role(std::string_view name) {
  for (auto role : {DumpRole::image, DumpRole::patch_attention, DumpRole::pixel_attention,
                    DumpRole::mask, DumpRole::scalar_series}) {
    if (to_string(role) == name) return role;
  }
  throw invalid_input("unknown dump role '" + std::string(name) + "'");
}

Index TensorDump::element_count() const {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

fs::path payload_path(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".f32");
  return p;
}

std::vector<std::uint8_t> encode_f32le(const Eigen::ArrayXf& values) {
  std::vector<std::uint8_t> bytes(4 * static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) bytes[4 * i + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
  return bytes;
}

Eigen::ArrayXf decode_f32le(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw invalid_input("payload size is not a multiple of 4 bytes");
  Eigen::ArrayXf values(static_cast<Index>(bytes.size() / 4));
  for (Index i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= std::uint32_t(bytes[4 * i + k]) << (8 * k);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

void write_dump(const fs::path& manifest, const TensorDump& dump) {
  if (manifest.extension() != ".json") throw invalid_input("manifest path must end in .json");
  for (Index d : dump.shape) {
    if (d < 0) throw invalid_input("negative dimension in dump shape");
  }
  if (dump.element_count() != dump.values.size()) {
    throw invalid_input("dump shape does not match element count (" +
                        std::to_string(dump.element_count()) + " vs " +
                        std::to_string(dump.values.size()) + ")");
  }

  json doc = dump.extra.is_object() ? dump.extra : json::object();
  doc["shape"] = dump.shape;
  doc["dtype"] = "f32";
  doc["order"] = "row-major";
  doc["role"] = to_string(dump.role);
  doc["model"] = dump.model;
  if (dump.seed) doc["seed"] = *dump.seed;

  const auto bytes = encode_f32le(dump.values);
  {
    std::ofstream out(payload_path(manifest), std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + payload_path(manifest).string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write to " + payload_path(manifest).string());
  }
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw io_error("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
  if (!out) throw io_error("short write to " + manifest.string());
}

TensorDump read_dump(const fs::path& manifest, std::optional<DumpRole> expected) {
  std::ifstream in(manifest);
  if (!in) throw invalid_input("missing dump manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw invalid_input("malformed manifest " + manifest.string() + ": " + e.what());
  }

  TensorDump dump;
  try {
    dump.shape = doc.at("shape").get<std::vector<Index>>();
    if (doc.at("dtype").get<std::string>() != "f32") throw invalid_input("dtype must be f32");
    if (doc.contains("order") && doc["order"].get<std::string>() != "row-major") {
      throw invalid_input("element order must be row-major");
    }
    dump.role = parse_dump_role(doc.at("role").get<std::string>());
    if (doc.contains("model")) dump.model = doc["model"];
    if (doc.contains("seed") && !doc["seed"].is_null()) dump.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw invalid_input("invalid manifest " + manifest.string() + ": " + e.what());
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    static const char* standard[] = {"shape", "dtype", "order", "role", "model", "seed"};
    if (std::find(std::begin(standard), std::end(standard), it.key()) == std::end(standard)) {
      dump.extra[it.key()] = it.value();
    }
  }
  for (Index d : dump.shape) {
    if (d < 0) throw invalid_input("negative dimension in " + manifest.string());
  }
  if (expected && dump.role != *expected) {
    throw invalid_input("dump " + manifest.string() + " has role '" +
                        std::string(to_string(dump.role)) + "', expected '" +
                        std::string(to_string(*expected)) + "'");
  }

  const auto payload = payload_path(manifest);
  std::ifstream data(payload, std::ios::binary);
  if (!data) throw invalid_input("missing dump payload " + payload.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(data)),
                                  std::istreambuf_iterator<char>());
  dump.values = decode_f32le(bytes);
  if (dump.values.size() != dump.element_count()) {
    throw invalid_input("payload " + payload.string() + " holds " +
                        std::to_string(dump.values.size()) + " elements, manifest shape needs " +
                        std::to_string(dump.element_count()));
  }
  return dump;
}

Imaged image_from_dump(const TensorDump& dump) {
  if (dump.role != DumpRole::image || dump.shape.size() != 3 || dump.shape[2] != 3) {
    throw invalid_input("dump is not an [H, W, 3] image");
  }
  using FloatPixels = Eigen::Array<float, Eigen::Dynamic, 3, Eigen::RowMajor>;
  Imaged::Pixels px =
      Eigen::Map<const FloatPixels>(dump.values.data(), dump.shape[0] * dump.shape[1], 3).cast<double>();
  return Imaged(dump.shape[0], dump.shape[1], std::move(px));
}

PixelMapd map_from_dump(const TensorDump& dump) {
  if (dump.shape.size() != 2) throw invalid_input("dump is not a 2-D map");
  PixelMapd map(dump.shape[0], dump.shape[1]);
  flat(map) = dump.values.cast<double>();
  return map;
}

RoiMask mask_from_dump(const TensorDump& dump) {
  if (dump.role != DumpRole::mask || dump.shape.size() != 2) throw invalid_input("dump is not a 2-D mask");
  RoiMask::Members members(dump.shape[0], dump.shape[1]);
  for (Index i = 0; i < dump.values.size(); ++i) {
    const float v = dump.values[i];
    if (v != 0.0f && v != 1.0f) throw invalid_input("mask values must be 0 or 1");
    members.data()[i] = v == 1.0f;
  }
  return RoiMask(std::move(members));
}

PatchAttention<double> patch_attention_from_dump(const TensorDump& dump) {
  if (dump.role != DumpRole::patch_attention || dump.shape.size() != 3) {
    throw invalid_input("dump is not a [heads, grid_h, grid_w] patch attention tensor");
  }
  PatchAttention<double> pa;
  try {
    const auto heads = dump.extra.at("heads").get<Index>();
    pa.grid_h = dump.extra.at("grid_h").get<Index>();
    pa.grid_w = dump.extra.at("grid_w").get<Index>();
    pa.patch_size = dump.extra.at("patch_size").get<Index>();
    if (heads != dump.shape[0] || pa.grid_h != dump.shape[1] || pa.grid_w != dump.shape[2]) {
      throw invalid_input("patch attention manifest keys disagree with its shape");
    }
  } catch (const json::exception& e) {
    throw invalid_input(std::string("patch attention manifest incomplete: ") + e.what());
  }
  pa.weights = Eigen::Map<const PatchAttention<float>::Weights>(dump.values.data(), dump.shape[0],
                                                                 dump.shape[1] * dump.shape[2])
                   .cast<double>();
  pa.validate();
  return pa;
}

}  // namespace attnboot
