#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "epq/codec.hpp"
#include "epq/quantizer.hpp"

using namespace epq;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "epq_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

const std::string kImage = "data/corpus/camera_0.pgm";

}  // namespace

TEST_CASE("N lists") {
  CHECK(cli::parse_n_list("3") == std::vector<std::size_t>{3});
  CHECK(cli::parse_n_list("1..4") == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(cli::parse_n_list("2,5..6,9") == std::vector<std::size_t>{2, 5, 6, 9});
  for (const char* bad : {"", "0", "4..2", "a", "-1", "3..", "1.5"}) {
    CAPTURE(bad);
    CHECK_THROWS(cli::parse_n_list(bad));
  }
}

TEST_CASE("thread cap from the environment") {
  ::setenv("EPQ_THREADS", "3", 1);
  CHECK(cli::thread_cap() == 3);
  ::setenv("EPQ_THREADS", "zero", 1);
  CHECK(cli::thread_cap() >= 1);
  ::setenv("EPQ_THREADS", "1", 1);
  CHECK(cli::thread_cap() == 1);
}

TEST_CASE("rd-curve matches direct evaluation") {
  const Run r = run({"rd-curve", "--dist", "epd:1,1", "--density", "uniform", "--range", "-10,10", "--N-list", "3"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"N", "rate", "distortion"});
  const RateDistortionPoint pt = eval_rd(SourceDensity(EpdParams(1.0, 1.0)), uniform_quantizer(-10.0, 10.0, 3));
  CHECK(rows[1][0] == "3");
  CHECK(std::stod(rows[1][1]) == doctest::Approx(pt.rate).epsilon(1e-9));
  CHECK(std::stod(rows[1][2]) == doctest::Approx(pt.distortion).epsilon(1e-9));

  // Light tails: node placement from the optimal density beats uniform spacing.
  const auto uni = parse_csv(run({"rd-curve", "--dist", "epd:2,1", "--range", "-8,8", "--N-list", "4..12"}).out);
  const auto opt =
      parse_csv(run({"rd-curve", "--dist", "epd:2,1", "--range", "-8,8", "--density", "optimal", "--N-list", "4..12"}).out);
  REQUIRE(uni.size() == opt.size());
  for (std::size_t i = 1; i < uni.size(); ++i) CHECK(std::stod(opt[i][2]) < std::stod(uni[i][2]));
  CHECK(run({"rd-curve", "--density", "rd:0.5", "--N-list", "2,4"}).code == 0);
  CHECK(run({"rd-curve", "--density", "lloyd"}).code != 0);
  CHECK(run({"rd-curve", "--dist", "gauss:1"}).code != 0);
}

TEST_CASE("encode, decode, re-encode") {
  const fs::path a = scratch("a.epq"), img = scratch("a.pgm"), b = scratch("b.epq"), stats = scratch("stats.csv");
  REQUIRE(run({"encode", kImage, "-o", a.string(), "--quality", "50", "--profile", "sigma-zigzag-residue"}).code == 0);
  REQUIRE(run({"decode", a.string(), "-o", img.string(), "--stats", stats.string()}).code == 0);
  REQUIRE(run({"encode", img.string(), "-o", b.string(), "--quality", "50", "--profile", "sigma-zigzag-residue"}).code == 0);
  CHECK(slurp(a) == slurp(b));

  const auto rows = parse_csv(slurp(stats));
  REQUIRE(rows.size() == 65);
  double bits = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) bits += std::stod(rows[i][4]);
  const DecodeResult d = decode_image(read_file(a));
  CHECK(bits == doctest::Approx(d.stats.channels[0].total_bits()).epsilon(1e-8));
  CHECK(8.0 * static_cast<double>(d.stats.channels[0].payload_bytes) == doctest::Approx(bits).epsilon(0.005));
}

TEST_CASE("config file sits between flags and defaults") {
  const fs::path cfg = scratch("q95.cfg"), a = scratch("cfg.epq"), b = scratch("flag.epq"), c = scratch("both.epq");
  std::ofstream(cfg) << "# quality from the file\nquality = 95\nprofile=VH\n";
  REQUIRE(run({"--config", cfg.string(), "encode", kImage, "-o", a.string()}).code == 0);
  REQUIRE(run({"encode", kImage, "-o", b.string(), "--quality", "95", "--profile", "VH"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(run({"--config", cfg.string(), "encode", kImage, "-o", c.string(), "--quality", "20"}).code == 0);
  const DecodeResult d = decode_image(read_file(c));
  CHECK(d.config.quality == 20);
  CHECK(d.config.profile == Profile::VH);

  std::ofstream(cfg) << "tempo=3\n";
  const Run bad = run({"--config", cfg.string(), "encode", kImage, "-o", a.string()});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("tempo") != std::string::npos);
}

TEST_CASE("errors") {
  const Run unknown = run({"encode", kImage, "-o", scratch("x.epq").string(), "--bogus"});
  CHECK(unknown.code != 0);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);

  const fs::path bad = scratch("bad.pgm");
  {
    std::ofstream f(bad, std::ios::binary);
    f << "P5\n4 4\n255\nabc";
  }
  const Run r = run({"encode", bad.string(), "-o", scratch("bad.epq").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("at byte 14") != std::string::npos);

  CHECK(run({"encode", kImage, "-o", scratch("x.epq").string(), "--profile", "sharp"}).code != 0);
  CHECK(run({"encode", kImage, "-o", scratch("x.epq").string(), "--quality", "0"}).code != 0);
  CHECK(run({"decode", bad.string(), "-o", scratch("x.pgm").string()}).code != 0);
  CHECK(run({"fit-epd"}).code != 0);
  CHECK(run({"predict-eval", "data/corpus", "--profile", "magic"}).code != 0);
  CHECK(run({"diagnose-cdf", "no/such/dir"}).code != 0);
}

TEST_CASE("fit-epd recovers kappa") {
  const Run r = run({"fit-epd", "--synthetic", "0.5,1,100000", "--seed", "7"});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(r.out);
  REQUIRE(rows.size() > 10);
  double best = INFINITY, best_kappa = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (std::stod(rows[i][3]) < best) {
      best = std::stod(rows[i][3]);
      best_kappa = std::stod(rows[i][2]);
    }
  CHECK(best_kappa >= 0.45);
  CHECK(best_kappa <= 0.55);
  CHECK(run({"fit-epd", "--synthetic", "0.5,1,100000", "--seed", "7"}).out == r.out);

  const Run fixed = run({"fit-epd", "data/corpus", "--kappa", "fixed", "--kappa-value", "0.5"});
  REQUIRE(fixed.code == 0);
  CHECK(parse_csv(fixed.out).size() == 65);
}

TEST_CASE("figure commands are deterministic") {
  ::setenv("EPQ_THREADS", "2", 1);
  const Run a = run({"predict-eval", "data/corpus", "--profile", "zigzag,mu-context,width-scan,sigma-boundary"});
  ::setenv("EPQ_THREADS", "1", 1);
  const Run b = run({"predict-eval", "data/corpus", "--profile", "zigzag,mu-context,width-scan,sigma-boundary"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  bool saw_bpp = false;
  for (const auto& row : parse_csv(a.out))
    if (row.size() == 6 && row[0] == "codec:sigma-boundary" && row[4] == "bpp") saw_bpp = std::stod(row[5]) > 0.0;
  CHECK(saw_bpp);

  const Run c = run({"diagnose-cdf", "data/corpus", "--kappa", "0.5", "--points", "9"});
  REQUIRE(c.code == 0);
  CHECK(parse_csv(c.out).size() == 1 + 63 * 9);

  const Run l = run({"build-ladder", "--E", "0.00333", "--sigma-max", "256"});
  REQUIRE(l.code == 0);
  const auto rows = parse_csv(l.out);
  CHECK(rows.size() == 1 + build_ladder(kDefaultSigmaStart, 256.0, 0.00333).size());
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][5]) <= std::stod(rows[i][6]));
}

TEST_CASE("fit-models writes loadable models") {
  const fs::path bin = scratch("m.bin"), src = scratch("m.cpp"), out = scratch("m.epq"), img = scratch("m.pgm");
  REQUIRE(run({"fit-models", "data/corpus", "--color", "data/color", "--out", bin.string(), "--emit-source", src.string()}).code == 0);
  const CodecModels m = deserialize_models(read_file(bin));
  CHECK(serialize_models(m) == serialize_models(builtin_models()));
  CHECK(slurp(src).find("kBuiltinModelsSize") != std::string::npos);
  REQUIRE(run({"encode", kImage, "-o", out.string(), "--models", bin.string()}).code == 0);
  CHECK(run({"decode", out.string(), "-o", img.string(), "--models", bin.string()}).code == 0);
}
