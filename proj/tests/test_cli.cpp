#include "attnboot/attnboot.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

using namespace attnboot;

namespace {

const fs::path kCli = ATTNBOOT_CLI;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("attnboot_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
  const auto err_file = dir / "stderr.txt";
  const std::string cmd = kCli.string() + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  std::ifstream f(err_file);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

fs::path textured_png(const fs::path& dir, std::uint64_t seed, Index size = 96) {
  TextureSpec tex;
  tex.height = tex.width = size;
  tex.seed = seed;
  const auto path = dir / ("tex_" + std::to_string(seed) + ".png");
  save_image_png(path, synthetic_texture(tex));
  return path;
}

}  // namespace

TEST_CASE("cli nullgen: one replicate by default, deterministic, run.json") {
  const auto dir = scratch("nullgen");
  const auto img = textured_png(dir, 1);
  REQUIRE(run(dir, "--out " + (dir / "a").string() + " nullgen --image " + img.string() + " --seed 5").code == 0);
  REQUIRE(run(dir, "--out " + (dir / "b").string() + " nullgen --image " + img.string() + " --seed 5").code == 0);
  int dumps = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) dumps += e.path().extension() == ".f32";
  CHECK(dumps == 1);
  CHECK(fs::exists(dir / "a" / "null_0001.png"));
  CHECK(slurp(dir / "a" / "null_0001.f32") == slurp(dir / "b" / "null_0001.f32"));
  CHECK(slurp(dir / "a" / "null_0001.json") == slurp(dir / "b" / "null_0001.json"));
  const auto cfg = read_json(dir / "a" / "run.json");
  CHECK(cfg["command"] == "nullgen");
  CHECK(cfg["bootstrap"]["replicates"] == 1);
  CHECK(cfg["bootstrap"]["seed"] == 5);

  REQUIRE(run(dir, "--out " + (dir / "c").string() + " nullgen --image " + img.string() + " -B 3").code == 0);
  CHECK(fs::exists(dir / "c" / "null_0003.json"));
}

TEST_CASE("cli errors: exit codes and JSON error records") {
  const auto dir = scratch("errors");
  auto r = run(dir, "--out " + dir.string() + " nullgen --image " + (dir / "missing.png").string());
  CHECK(r.code == 2);
  const auto err = json::parse(r.err);
  CHECK(err["error"]["exit"] == 2);
  CHECK(err["error"]["code"] == "invalid_input");

  CHECK(run(dir, "--out " + dir.string() + " analyze --image " + textured_png(dir, 2).string() + " --mode bogus").code ==
        2);
  CHECK(run(dir, "frobnicate").code == 2);

  save_image_png(dir / "const.png", Imaged::constant(32, 32, 0.4));
  r = run(dir, "--out " + dir.string() + " analyze --image " + (dir / "const.png").string());
  CHECK(r.code == 4);
  CHECK(json::parse(r.err)["error"]["code"] == "degenerate");

  std::ofstream(dir / "not_a_png.png") << "hello";
  r = run(dir, "--out " + dir.string() + " analyze --image " + (dir / "not_a_png.png").string());
  CHECK(r.code == 2);

  r = run(dir, "--out /proc/attnboot_cannot_create nullgen --image " + textured_png(dir, 3).string());
  CHECK(r.code == 3);
}

TEST_CASE("cli analyze: report invariants, histogram contract, ROI outputs") {
  const auto dir = scratch("analyze");
  const auto img = textured_png(dir, 4);
  const auto inj = dir / "inj";
  REQUIRE(run(dir, "--out " + inj.string() + " inject --image " + img.string() + " --square-size 24 --seed 9 --frame")
              .code == 0);
  CHECK(fs::exists(inj / "injected_frame.png"));
  CHECK(mask_from_dump(read_dump(inj / "mask.json")).count() == 24 * 24);

  const auto out = dir / "out";
  REQUIRE(run(dir, "--out " + out.string() + " analyze --image " + (inj / "injected.png").string() + " --mask " +
                       (inj / "mask.json").string() + " -B 2 --seed 3")
              .code == 0);
  const auto report = read_json(out / "report.json");
  CHECK(report["pi0"].get<double>() >= 0.0);
  CHECK(report["pi0"].get<double>() <= 1.0);
  CHECK(report["sigma_hat"].get<double>() > 0.0);

  const auto p = map_from_dump(read_dump(out / "p.json"));
  const auto l = map_from_dump(read_dump(out / "lfdr.json"));
  CHECK(((p >= 0.0) && (p <= 1.0)).all());
  CHECK(((l >= 0.0) && (l <= 1.0)).all());
  const auto z_null = read_dump(out / "z_null.json", DumpRole::scalar_series);
  CHECK(z_null.shape == std::vector<Index>{2, 96, 96});
  const auto m = null_moments(z_null.values.cast<double>().eval());
  CHECK(std::abs(m.mean) < 1e-5);  // float32 storage
  CHECK(std::abs(m.stddev - 1.0) < 1e-5);

  for (const char* name : {"hist_z_observed.csv", "hist_z_null.csv", "hist_z_roi.csv", "hist_p_roi.csv",
                           "hist_lfdr_roi.csv"}) {
    const auto rows = read_csv(out / name);
    CHECK(rows.size() == 1 + 101);
  }
  long total = 0;
  for (const auto& row : read_csv(out / "hist_z_roi.csv")) {
    if (row[0] != "bin") total += std::stol(row[3]);
  }
  CHECK(total == 24 * 24);

  const auto out51 = dir / "out51";
  REQUIRE(run(dir, "--out " + out51.string() + " analyze --image " + img.string() + " --bins 51").code == 0);
  CHECK(read_csv(out51 / "hist_z_null.csv").size() == 1 + 51);
  CHECK(fs::exists(out51 / "hist_p.csv"));
}

TEST_CASE("cli regularize: identity, zero map and pi0 oracle") {
  const auto dir = scratch("regularize");
  const auto img = textured_png(dir, 6);
  const auto an = dir / "an";
  REQUIRE(run(dir, "--out " + an.string() + " analyze --image " + img.string() + " --seed 2").code == 0);

  UncertaintyReport<double> rep;
  rep.observed = map_from_dump(read_dump(an / "observed.json"));
  rep.z = map_from_dump(read_dump(an / "z.json"));
  rep.p = map_from_dump(read_dump(an / "p.json"));
  rep.lfdr = map_from_dump(read_dump(an / "lfdr.json"));
  rep.pi0 = read_json(an / "report.json")["pi0"].get<double>();

  const auto out = dir / "reg";
  REQUIRE(run(dir, "--out " + out.string() + " regularize --report " + an.string() +
                       " --no-z-zeroing --method p:1,l:0 --color")
              .code == 0);
  const auto identity = map_from_dump(read_dump(out / "reg_p_absolute_1.json"));
  CHECK((identity == rep.observed).all());
  const auto zero = map_from_dump(read_dump(out / "reg_l_absolute_0.json"));
  if ((rep.lfdr > 0.0).all()) CHECK((zero == 0.0).all());
  CHECK(fs::exists(out / "reg_p_absolute_1_color.png"));

  const auto out2 = dir / "reg2";
  REQUIRE(run(dir, "--out " + out2.string() + " regularize --report " + an.string() + " --method pi0").code == 0);
  const auto pi0_map = map_from_dump(read_dump(out2 / "reg_pi0.json"));
  const PixelMapd oracle = threshold_pi0(z_zeroing(rep.observed, rep.z), rep.p, rep.pi0);
  CHECK(((pi0_map - oracle.cast<float>().cast<double>()).abs() == 0.0).all());

  CHECK(run(dir, "--out " + out2.string() + " regularize --report " + an.string() + " --method p:1.5").code == 2);
  CHECK(run(dir, "--out " + out2.string() + " regularize --report " + an.string() + " --frame --color").code == 2);
}

TEST_CASE("cli simulate: cardinality, z-filter and D summary") {
  const auto dir = scratch("simulate");
  const auto corpus = dir / "corpus";
  fs::create_directories(corpus);
  for (std::uint64_t k = 0; k < 5; ++k) textured_png(corpus, 10 + k);

  const auto out = dir / "sim";
  REQUIRE(run(dir, "--out " + out.string() + " --threads 2 simulate --corpus " + corpus.string() +
                       " --square-size 24 --seed 7")
              .code == 0);
  const auto rows = read_csv(out / "eval.csv");
  REQUIRE(rows.size() == 1 + 5 * 3);
  const auto& header = rows[0];
  const auto col = [&](const std::string& name) {
    return std::size_t(std::find(header.begin(), header.end(), name) - header.begin());
  };
  std::map<std::string, int> per_method;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> kept;
  std::vector<std::string> ids;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ++per_method[r[col("method")]];
    ids.push_back(r[col("image_id")]);
    if (r[col("passes_z_filter")] == "1") {
      kept[r[col("method")]].first.push_back(std::stod(r[col("mean_percentile_before")]));
      kept[r[col("method")]].second.push_back(std::stod(r[col("mean_percentile_after")]));
    }
  }
  CHECK(per_method.size() == 3);
  for (const auto& [method, n] : per_method) CHECK(n == 5);
  CHECK(std::is_sorted(ids.begin(), ids.end()));

  const auto summary = read_json(out / "summary.json");
  for (const auto& [method, lists] : kept) {
    const auto& entry = summary["all"][method];
    CHECK(entry["images"] == lists.first.size());
    if (!lists.first.empty()) {
      CHECK(entry["D"].get<double>() == doctest::Approx(suppression_factor(lists.first, lists.second)).epsilon(1e-12));
    }
  }

  // Thread count does not change the output.
  const auto out1 = dir / "sim1";
  REQUIRE(run(dir, "--out " + out1.string() + " --threads 1 simulate --corpus " + corpus.string() +
                       " --square-size 24 --seed 7")
              .code == 0);
  CHECK(slurp(out / "eval.csv") == slurp(out1 / "eval.csv"));

  const auto out_nf = dir / "sim_nf";
  REQUIRE(run(dir, "--out " + out_nf.string() + " simulate --corpus " + corpus.string() +
                       " --square-size 24 --seed 7 --no-z-filter")
              .code == 0);
  for (const auto& [method, n] : per_method) CHECK(read_json(out_nf / "summary.json")["all"][method]["images"] == 5);
  CHECK(read_json(out_nf / "run.json")["z_filter"] == false);
}

TEST_CASE("cli output directory falls back to ATTNBOOT_OUT") {
  const auto dir = scratch("envout");
  const auto img = textured_png(dir, 20, 32);
  const auto target = dir / "from_env";
  const std::string cmd = "ATTNBOOT_OUT=" + target.string() + " " + kCli.string() + " synth --count 2 --size 32";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(target / "synth_001.png"));
  CHECK(read_json(target / "run.json")["command"] == "synth");
  (void)img;
}
