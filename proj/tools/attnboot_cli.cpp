// attnboot command-line front end.
//
//   attnboot nullgen    --image img.png [-B 1] [--mode parametric]
//   attnboot analyze    --image img.png [--source toy|external ...] [--mask roi.json]
//   attnboot regularize --report <analyze out dir> [--method p:0.3 ...]
//   attnboot inject     --image img.png [--noise square|diffuse]
//   attnboot simulate   --corpus <dir of PNGs> [--method ...] [--no-z-filter]
//   attnboot synth      --count 20 [--size 480]
//
// Every command writes run.json into its output directory (--out, default
// $ATTNBOOT_OUT, else ./attnboot_out). Errors are printed to stderr as a JSON
// record; exit codes are 0 ok, 2 usage/input, 3 I/O, 4 degenerate statistics.

#include "attnboot/attnboot.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

using namespace attnboot;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
  std::string out;
  unsigned threads = 0;
};

struct BootstrapOpts {
  std::string mode = "parametric";
  Index replicates = 1;
  double omega = 1.0;
  std::uint64_t seed = 0;

  BootstrapConfig resolve() const {
    BootstrapConfig c;
    c.mode = parse_bootstrap_mode(mode);
    c.replicates = replicates;
    c.omega = omega;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct SourceOpts {
  std::string kind = "toy";
  Index patch_size = 8;
  std::string attention;
  std::vector<std::string> null_attention;

  AttentionSource resolve() const {
    AttentionSource s;
    if (kind == "toy") {
      s.kind = AttentionKind::toy;
    } else if (kind == "external") {
      s.kind = AttentionKind::external;
      if (attention.empty()) throw invalid_input("--source external needs --attention");
    } else {
      throw invalid_input("unknown attention source '" + kind + "'");
    }
    s.patch_size = patch_size;
    s.observed_dump = attention;
    for (const auto& p : null_attention) s.null_dumps.emplace_back(p);
    return s;
  }
};

struct NoiseOpts {
  std::string kind = "square";
  Index square_size = 100;
  double lambda = 20.0;
  Index pixel_count = 10000;

  NoiseSpec resolve(std::uint64_t seed) const {
    NoiseSpec n;
    n.kind = parse_noise_kind(kind);
    n.square_size = square_size;
    n.lambda = lambda;
    n.pixel_count = pixel_count;
    n.seed = seed;
    n.validate();
    return n;
  }
};

struct MethodOpts {
  std::vector<std::string> methods{"p:0.3", "l:0.3", "pi0"};
  std::string convention = "absolute";

  std::vector<MethodSpec> resolve() const {
    const auto conv = parse_threshold_convention(convention);
    std::vector<MethodSpec> out;
    for (const auto& m : methods) {
      MethodSpec spec;
      const auto colon = m.find(':');
      spec.method = parse_shrinkage_method(m.substr(0, colon));
      spec.convention = conv;
      if (spec.method != ShrinkageMethod::pi0_threshold) {
        if (colon == std::string::npos) {
          if (conv == ThresholdConvention::absolute) throw invalid_input("method '" + m + "' needs a threshold");
          spec.value = conv == ThresholdConvention::roi_percentile ? 0.1 : 0.5;
        } else {
          try {
            spec.value = std::stod(m.substr(colon + 1));
          } catch (const std::exception&) {
            throw invalid_input("bad threshold in '" + m + "'");
          }
        }
        if (!(spec.value >= 0.0 && spec.value <= 1.0)) throw invalid_input("threshold in '" + m + "' outside [0, 1]");
      }
      out.push_back(spec);
    }
    if (out.empty()) throw invalid_input("no methods given");
    return out;
  }
};

json to_json(const BootstrapConfig& c) {
  return {{"mode", to_string(c.mode)}, {"replicates", c.replicates}, {"omega", c.omega}, {"seed", c.seed}};
}

json to_json(const AttentionSource& s) {
  json nulls = json::array();
  for (const auto& p : s.null_dumps) nulls.push_back(p.string());
  return {{"kind", s.kind == AttentionKind::toy ? "toy" : "external"},
          {"patch_size", s.patch_size},
          {"attention", s.observed_dump.string()},
          {"null_attention", nulls}};
}

json to_json(const NoiseSpec& n) {
  return {{"kind", to_string(n.kind)},
          {"square_size", n.square_size},
          {"lambda", n.lambda},
          {"pixel_count", n.pixel_count},
          {"seed", n.seed}};
}

json to_json(const std::vector<MethodSpec>& methods) {
  json out = json::array();
  for (const auto& m : methods) {
    out.push_back({{"label", m.label()},
                   {"method", to_string(m.method)},
                   {"value", m.value},
                   {"convention", to_string(m.convention)}});
  }
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

fs::path output_dir(const Common& common) {
  fs::path dir = common.out;
  if (dir.empty()) {
    const char* env = std::getenv("ATTNBOOT_OUT");
    dir = env && *env ? fs::path(env) : fs::path("attnboot_out");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw io_error("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_run(const fs::path& dir, const std::string& command, json config) {
  config["command"] = command;
  config["version"] = kVersion;
  write_json(dir / "run.json", config);
}

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// bin, lo, hi, count, density rows for `values` on `binning`.
void write_histogram(const fs::path& path, const Eigen::ArrayXd& values, const Binning& binning) {
  const auto counts = histogram(values, binning);
  std::string out = "bin,lo,hi,count,density\n";
  const double n = double(values.size());
  const double w = binning.width();
  for (Index k = 0; k < binning.bins; ++k) {
    const double density = n > 0 && w > 0 ? double(counts[k]) / (n * w) : 0.0;
    out += std::to_string(k) + "," + fmt_double(binning.edge(k)) + "," + fmt_double(binning.edge(k + 1)) + "," +
           std::to_string(counts[k]) + "," + fmt_double(density) + "\n";
  }
  write_text(path, out);
}

Eigen::ArrayXd masked_values(const PixelMapd& map, const RoiMask& mask) {
  std::vector<double> v;
  for (Index i = 0; i < map.size(); ++i) {
    if (mask.at_flat(i)) v.push_back(map.data()[i]);
  }
  return Eigen::Map<Eigen::ArrayXd>(v.data(), Index(v.size()));
}

RoiMask load_mask(const std::string& path, Index h, Index w) {
  RoiMask mask = mask_from_dump(read_dump(path, DumpRole::mask));
  if (mask.height() != h || mask.width() != w) throw invalid_input("mask " + path + " does not match the image");
  return mask;
}

TensorDump quantity_dump(const PixelMapd& map, const std::string& quantity) {
  TensorDump d = to_dump(map);
  d.extra["quantity"] = quantity;
  return d;
}

// ---------------------------------------------------------------------------

void cmd_nullgen(const Common& common, const std::string& image_path, const BootstrapOpts& opts) {
  const auto config = opts.resolve();
  const Imaged image = load_image(image_path);
  const fs::path dir = output_dir(common);
  const auto ensemble = generate_ensemble(image, config, common.threads);
  json files = json::array();
  for (std::size_t b = 0; b < ensemble.size(); ++b) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "null_%04zu", b + 1);
    save_image_png(dir / (std::string(stem) + ".png"), ensemble[b]);
    TensorDump d = to_dump(ensemble[b]);
    d.seed = mix_seed(config.seed, b + 1);
    d.extra["replicate"] = b + 1;
    write_dump(dir / (std::string(stem) + ".json"), d);
    files.push_back(stem);
  }
  write_run(dir, "nullgen", {{"image", image_path}, {"bootstrap", to_json(config)}, {"outputs", files}});
}

void cmd_analyze(const Common& common, const std::string& image_path, const SourceOpts& src_opts,
                 const BootstrapOpts& boot_opts, const std::string& mask_path, Index bins) {
  const auto config = boot_opts.resolve();
  const auto source = src_opts.resolve();
  if (bins < 2) throw invalid_input("histogram bin count must be >= 2");
  const Imaged image = load_image(image_path);
  std::optional<RoiMask> mask;
  if (!mask_path.empty()) mask = load_mask(mask_path, image.height(), image.width());
  const fs::path dir = output_dir(common);

  InferenceOptions inference;
  inference.lfdr_bins = bins;
  const auto rep = analyze(image, source, config, inference, common.threads);

  write_dump(dir / "observed.json", quantity_dump(rep.observed, "attention"));
  write_dump(dir / "z.json", quantity_dump(rep.z, "z"));
  write_dump(dir / "p.json", quantity_dump(rep.p, "p"));
  write_dump(dir / "lfdr.json", quantity_dump(rep.lfdr, "lfdr"));
  TensorDump zn;
  zn.shape = {rep.replicates(), rep.height(), rep.width()};
  zn.role = DumpRole::scalar_series;
  zn.values = rep.z_null.reshaped<Eigen::RowMajor>().transpose().cast<float>();
  zn.extra["quantity"] = "z_null";
  write_dump(dir / "z_null.json", zn);
  save_gray_png(dir / "observed.png", rep.observed);

  const Eigen::ArrayXd z_obs = flat(rep.z);
  const Eigen::ArrayXd z_null = rep.z_null.reshaped<Eigen::RowMajor>().transpose();
  const Binning zbins{std::min(z_obs.minCoeff(), z_null.minCoeff()), std::max(z_obs.maxCoeff(), z_null.maxCoeff()),
                      bins};
  const Binning unit{0.0, 1.0, bins};
  write_histogram(dir / "hist_z_observed.csv", z_obs, zbins);
  write_histogram(dir / "hist_z_null.csv", z_null, zbins);
  json report = {{"mu_hat", rep.mu_hat}, {"sigma_hat", rep.sigma_hat}, {"pi0", rep.pi0},
                 {"height", rep.height()}, {"width", rep.width()},   {"replicates", rep.replicates()},
                 {"srmsd_p", srmsd(flat(rep.p))}};
  if (mask) {
    write_dump(dir / "mask.json", to_dump(*mask));
    write_histogram(dir / "hist_z_roi.csv", masked_values(rep.z, *mask), zbins);
    write_histogram(dir / "hist_p_roi.csv", masked_values(rep.p, *mask), unit);
    write_histogram(dir / "hist_lfdr_roi.csv", masked_values(rep.lfdr, *mask), unit);
    report["mean_roi_z"] = mean_roi_z(rep.z, *mask);
    report["passes_z_filter"] = passes_z_filter(report["mean_roi_z"].get<double>());
    report["srmsd_p_roi"] = srmsd(masked_values(rep.p, *mask));
    report["mean_percentile_roi"] = mean_percentile(rep.observed, *mask);
  } else {
    write_histogram(dir / "hist_p.csv", flat(rep.p), unit);
    write_histogram(dir / "hist_lfdr.csv", flat(rep.lfdr), unit);
  }
  write_json(dir / "report.json", report);
  write_run(dir, "analyze",
            {{"image", image_path},
             {"mask", mask_path},
             {"source", to_json(source)},
             {"bootstrap", to_json(config)},
             {"bins", bins}});
}

UncertaintyReport<double> load_report(const fs::path& dir) {
  UncertaintyReport<double> rep;
  rep.observed = map_from_dump(read_dump(dir / "observed.json", DumpRole::pixel_attention));
  rep.z = map_from_dump(read_dump(dir / "z.json", DumpRole::pixel_attention));
  rep.p = map_from_dump(read_dump(dir / "p.json", DumpRole::pixel_attention));
  rep.lfdr = map_from_dump(read_dump(dir / "lfdr.json", DumpRole::pixel_attention));
  require_same_shape(rep.observed, rep.z, "z map");
  require_same_shape(rep.observed, rep.p, "p map");
  require_same_shape(rep.observed, rep.lfdr, "lfdr map");
  std::ifstream f(dir / "report.json");
  if (!f) throw io_error("cannot read " + (dir / "report.json").string());
  json j;
  try {
    f >> j;
    rep.pi0 = j.at("pi0").get<double>();
    rep.mu_hat = j.at("mu_hat").get<double>();
    rep.sigma_hat = j.at("sigma_hat").get<double>();
  } catch (const json::exception& e) {
    throw invalid_input("malformed report.json: " + std::string(e.what()));
  }
  return rep;
}

std::string file_label(const MethodSpec& m) {
  std::string s = m.label();
  for (char& c : s) {
    if (c == '@' || c == ':') c = '_';
  }
  return s;
}

void cmd_regularize(const Common& common, const std::string& report_dir, const MethodOpts& method_opts,
                    const std::string& mask_path, bool no_z_zeroing, bool color, bool frame) {
  const auto methods = method_opts.resolve();
  const auto rep = load_report(report_dir);
  std::optional<RoiMask> mask;
  if (!mask_path.empty()) mask = load_mask(mask_path, rep.height(), rep.width());
  if (frame && !mask) throw invalid_input("--frame needs --mask");
  const fs::path dir = output_dir(common);

  json outputs = json::array();
  for (const auto& m : methods) {
    const ShrinkageSpec spec = resolve_spec(rep, m, mask ? &*mask : nullptr, !no_z_zeroing);
    const PixelMapd reg = regularize(rep, spec);
    const std::string stem = "reg_" + file_label(m);
    TensorDump d = quantity_dump(reg, "regularized");
    d.extra["method"] = m.label();
    d.extra["threshold"] = m.method == ShrinkageMethod::pi0_threshold ? rep.pi0 : spec.threshold;
    write_dump(dir / (stem + ".json"), d);
    save_gray_png(dir / (stem + ".png"), reg);
    if (color) {
      Rgb8 rgb = colorize(reg);
      if (frame) draw_frame(rgb, *mask);
      save_rgb8_png(dir / (stem + "_color.png"), rep.height(), rep.width(), rgb);
    }
    json entry = {{"label", m.label()}, {"file", stem}, {"threshold", d.extra["threshold"]}};
    if (mask) {
      entry["mean_percentile_before"] = mean_percentile(rep.observed, *mask);
      entry["mean_percentile_after"] = mean_percentile(reg, *mask);
      entry["nonzero_fraction_before"] = nonzero_fraction(rep.observed, *mask);
      entry["nonzero_fraction_after"] = nonzero_fraction(reg, *mask);
    }
    outputs.push_back(entry);
  }
  if (color) {
    Rgb8 rgb = colorize(rep.observed);
    if (frame) draw_frame(rgb, *mask);
    save_rgb8_png(dir / "observed_color.png", rep.height(), rep.width(), rgb);
  }
  write_json(dir / "regularized.json", outputs);
  write_run(dir, "regularize",
            {{"report", report_dir},
             {"mask", mask_path},
             {"methods", to_json(methods)},
             {"z_zeroing", !no_z_zeroing},
             {"color", color},
             {"frame", frame}});
}

void cmd_inject(const Common& common, const std::string& image_path, const NoiseOpts& noise_opts,
                std::uint64_t seed, bool frame) {
  const auto noise = noise_opts.resolve(seed);
  const Imaged image = load_image(image_path);
  const fs::path dir = output_dir(common);
  const auto inj = inject(image, noise);
  save_image_png(dir / "injected.png", inj.image);
  TensorDump d = to_dump(inj.image);
  d.seed = seed;
  write_dump(dir / "injected.json", d);
  write_dump(dir / "mask.json", to_dump(inj.mask));
  if (frame) {
    Rgb8 rgb = to_rgb8(inj.image);
    draw_frame(rgb, inj.mask);
    save_rgb8_png(dir / "injected_frame.png", image.height(), image.width(), rgb);
  }
  json cfg = {{"image", image_path}, {"noise", to_json(noise)}, {"roi_pixels", inj.mask.count()}};
  if (noise.kind == NoiseKind::square) cfg["square"] = {{"top", inj.top}, {"left", inj.left}};
  write_run(dir, "inject", cfg);
}

std::vector<fs::path> list_corpus(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw invalid_input("corpus " + root.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".png") files.push_back(fs::relative(e.path(), root));
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw invalid_input("corpus " + root.string() + " contains no PNG images");
  return files;
}

void cmd_simulate(const Common& common, const std::string& corpus, const NoiseOpts& noise_opts,
                  const SourceOpts& src_opts, const BootstrapOpts& boot_opts, const MethodOpts& method_opts,
                  bool no_z_filter, bool no_z_zeroing) {
  SimulationConfig cfg;
  cfg.noise = noise_opts.resolve(0);
  cfg.source = src_opts.resolve();
  if (cfg.source.kind != AttentionKind::toy) {
    throw invalid_input("simulate runs the toy attention model; analyze external dumps with 'analyze'");
  }
  cfg.bootstrap = boot_opts.resolve();
  cfg.methods = method_opts.resolve();
  cfg.apply_z_zeroing = !no_z_zeroing;
  cfg.seed = boot_opts.seed;
  const auto files = list_corpus(corpus);
  const fs::path dir = output_dir(common);

  std::vector<std::vector<EvalRecord>> per_image(files.size());
  parallel_for(
      files.size(),
      [&](std::size_t k) {
        const Imaged image = load_image(fs::path(corpus) / files[k]);
        per_image[k] = simulate_image(files[k].generic_string(), k, image, cfg);
      },
      common.threads);

  std::vector<EvalRecord> records;
  for (auto& r : per_image) records.insert(records.end(), r.begin(), r.end());

  std::string csv =
      "image_id,category,method,threshold,mean_roi_z,passes_z_filter,mean_percentile_before,"
      "mean_percentile_after,nonzero_fraction_before,nonzero_fraction_after,sensitivity,specificity\n";
  for (const auto& r : records) {
    const auto parent = fs::path(r.image_id).parent_path().generic_string();
    csv += r.image_id + "," + parent + "," + r.method + "," + fmt_double(r.threshold) + "," +
           fmt_double(r.mean_roi_z) + "," + (r.passes_z_filter ? "1" : "0") + "," + fmt_double(r.q_before) + "," +
           fmt_double(r.q_after) + "," + fmt_double(r.nonzero_before) + "," + fmt_double(r.nonzero_after) + "," +
           (r.se ? fmt_double(*r.se) : "") + "," + (r.sp ? fmt_double(*r.sp) : "") + "\n";
  }
  write_text(dir / "eval.csv", csv);

  const bool z_filter = !no_z_filter;
  const auto summary_of = [&](const std::vector<EvalRecord>& subset) {
    json out = json::object();
    for (const auto& s : summarize(subset, z_filter)) {
      out[s.method] = {{"D", finite_or_null(s.d)}, {"jackknife_se", finite_or_null(s.se)}, {"images", s.images}};
    }
    return out;
  };
  std::map<std::string, std::vector<EvalRecord>> by_category;
  for (const auto& r : records) by_category[fs::path(r.image_id).parent_path().generic_string()].push_back(r);
  json categories = json::object();
  for (const auto& [name, subset] : by_category) categories[name.empty() ? "." : name] = summary_of(subset);
  write_json(dir / "summary.json",
             {{"z_filter", z_filter}, {"images", files.size()}, {"all", summary_of(records)}, {"categories", categories}});

  write_run(dir, "simulate",
            {{"corpus", corpus},
             {"noise", to_json(cfg.noise)},
             {"source", to_json(cfg.source)},
             {"bootstrap", to_json(cfg.bootstrap)},
             {"methods", to_json(cfg.methods)},
             {"z_filter", z_filter},
             {"z_zeroing", cfg.apply_z_zeroing},
             {"seed", cfg.seed}});
}

void cmd_synth(const Common& common, int count, Index size, std::uint64_t seed, double structure_sd,
               double noise_sd) {
  if (count < 1) throw invalid_input("--count must be >= 1");
  const fs::path dir = output_dir(common);
  json files = json::array();
  for (int k = 0; k < count; ++k) {
    TextureSpec tex;
    tex.height = tex.width = size;
    tex.structure_sd = structure_sd;
    tex.noise_sd = noise_sd;
    tex.seed = mix_seed(seed, std::uint64_t(k));
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d.png", k);
    save_image_png(dir / name, synthetic_texture(tex));
    files.push_back(name);
  }
  write_run(dir, "synth",
            {{"count", count}, {"size", size}, {"seed", seed}, {"structure_sd", structure_sd},
             {"noise_sd", noise_sd}, {"outputs", files}});
}

int exit_code(Errc code) { return static_cast<int>(code); }

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "invalid_input";
    case Errc::io: return "io";
    case Errc::degenerate: return "degenerate";
  }
  return "unknown";
}

int fail(Errc code, const std::string& message) {
  const json record = {{"error", {{"code", errc_name(code)}, {"exit", exit_code(code)}, {"message", message}}}};
  std::cerr << record.dump() << "\n";
  return exit_code(code);
}

void add_bootstrap(CLI::App* cmd, BootstrapOpts& o) {
  cmd->add_option("--mode", o.mode, "Bootstrap mode")->check(CLI::IsMember({"parametric", "nonparametric"}));
  cmd->add_option("-B,--replicates", o.replicates, "Number of bootstrap replicates");
  cmd->add_option("--omega", o.omega, "Scale of the parametric noise standard deviation");
  cmd->add_option("--seed", o.seed, "Run seed");
}

void add_source(CLI::App* cmd, SourceOpts& o) {
  cmd->add_option("--source", o.kind, "Attention source")->check(CLI::IsMember({"toy", "external"}));
  cmd->add_option("--patch-size", o.patch_size, "Patch size in pixels (external dumps: 0 skips the check)");
  cmd->add_option("--attention", o.attention, "Observed PatchAttention dump (external source)");
  cmd->add_option("--null-attention", o.null_attention, "Null PatchAttention dumps, one per replicate");
}

void add_noise(CLI::App* cmd, NoiseOpts& o) {
  cmd->add_option("--noise", o.kind, "ROI shape")->check(CLI::IsMember({"square", "diffuse"}));
  cmd->add_option("--square-size", o.square_size, "Side of the noise square");
  cmd->add_option("--lambda", o.lambda, "Clustering parameter of the diffuse ROI");
  cmd->add_option("--roi-pixels", o.pixel_count, "Pixel count of the diffuse ROI");
}

void add_methods(CLI::App* cmd, MethodOpts& o) {
  cmd->add_option("--method", o.methods, "Shrinkage methods: p:<t>, l:<t>, pi0")->delimiter(',');
  cmd->add_option("--threshold-mode", o.convention, "Threshold convention")
      ->check(CLI::IsMember({"absolute", "roi-percentile", "median"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bootstrap uncertainty quantification and regularization of attention maps"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "Output directory (default: $ATTNBOOT_OUT or ./attnboot_out)");
  app.add_option("--threads", common.threads, "Worker threads (0 = all cores)");

  std::string image, mask, report_dir, corpus;
  BootstrapOpts boot;
  SourceOpts source;
  NoiseOpts noise;
  MethodOpts methods;
  Index bins = kDefaultLfdrBins;
  bool no_z_zeroing = false, no_z_filter = false, color = false, frame = false;
  std::uint64_t seed = 0;
  int count = 20;
  Index size = 480;
  double structure_sd = 0.03, noise_sd = 0.1;

  auto* nullgen = app.add_subcommand("nullgen", "Write B bootstrap null images");
  nullgen->add_option("--image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  add_bootstrap(nullgen, boot);

  auto* analyze_cmd = app.add_subcommand("analyze", "Compute z, p, LFDR and pi0 for an image");
  analyze_cmd->add_option("--image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--mask", mask, "ROI mask dump for ROI histograms")->check(CLI::ExistingFile);
  analyze_cmd->add_option("--bins", bins, "Histogram bin count (LFDR and CSVs)");
  add_source(analyze_cmd, source);
  add_bootstrap(analyze_cmd, boot);

  auto* regularize_cmd = app.add_subcommand("regularize", "Apply shrinkage rules to an analyze report");
  regularize_cmd->add_option("--report", report_dir, "Output directory of 'analyze'")
      ->required()
      ->check(CLI::ExistingDirectory);
  regularize_cmd->add_option("--mask", mask, "ROI mask dump")->check(CLI::ExistingFile);
  regularize_cmd->add_flag("--no-z-zeroing", no_z_zeroing, "Skip zeroing of scores with z <= 0");
  regularize_cmd->add_flag("--color", color, "Also write colour-mapped heatmaps");
  regularize_cmd->add_flag("--frame", frame, "Outline the ROI in red on colour heatmaps");
  add_methods(regularize_cmd, methods);

  auto* inject_cmd = app.add_subcommand("inject", "Inject an i.i.d. noise ROI into an image");
  inject_cmd->add_option("--image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  inject_cmd->add_option("--seed", seed, "Noise seed");
  inject_cmd->add_flag("--frame", frame, "Also write a copy with the ROI outlined in red");
  add_noise(inject_cmd, noise);

  auto* simulate_cmd = app.add_subcommand("simulate", "Run the noise-injection study over a corpus");
  simulate_cmd->add_option("--corpus", corpus, "Directory of PNG images")->required()->check(CLI::ExistingDirectory);
  simulate_cmd->add_flag("--no-z-filter", no_z_filter, "Keep images whose mean ROI z exceeds 1 in magnitude");
  simulate_cmd->add_flag("--no-z-zeroing", no_z_zeroing, "Skip zeroing of scores with z <= 0");
  add_noise(simulate_cmd, noise);
  add_source(simulate_cmd, source);
  add_bootstrap(simulate_cmd, boot);
  add_methods(simulate_cmd, methods);

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic texture corpus");
  synth_cmd->add_option("--count", count, "Number of images");
  synth_cmd->add_option("--size", size, "Image side in pixels");
  synth_cmd->add_option("--seed", seed, "Corpus seed");
  synth_cmd->add_option("--structure-sd", structure_sd, "Amplitude of the smooth component");
  synth_cmd->add_option("--noise-sd", noise_sd, "Amplitude of the i.i.d. component");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(Errc::invalid_input, e.what());
  }

  try {
    if (*nullgen) cmd_nullgen(common, image, boot);
    if (*analyze_cmd) cmd_analyze(common, image, source, boot, mask, bins);
    if (*regularize_cmd) cmd_regularize(common, report_dir, methods, mask, no_z_zeroing, color, frame);
    if (*inject_cmd) cmd_inject(common, image, noise, seed, frame);
    if (*simulate_cmd) {
      cmd_simulate(common, corpus, noise, source, boot, methods, no_z_filter, no_z_zeroing);
    }
    if (*synth_cmd) cmd_synth(common, count, size, seed, structure_sd, noise_sd);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(Errc::io, e.what());
  } catch (const std::exception& e) {
    return fail(Errc::invalid_input, e.what());
  }
  return 0;
}
