#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "epq/codec.hpp"
#include "epq/epd.hpp"
#include "epq/quantizer.hpp"

namespace epq::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// CSV to a file, or to the command's output stream when no path is given.
class Csv {
 public:
  Csv(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot write " + path);
      os_ = &file_;
    }
  }
  template <typename... T>
  void row(const T&... cells) {
    bool first = true;
    ((*os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    *os_ << '\n';
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(std::string_view s) { return std::string(s); }
  static std::string cell(double v) { return num(v); }
  template <typename I>
    requires std::integral<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  std::ofstream file_;
  std::ostream* os_;
};

template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
  std::vector<T> out(n);
  const std::size_t workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<fs::path> corpus_files(const std::string& dir) {
  if (dir.empty()) throw UsageError("a corpus directory is required");
  auto files = list_images(dir);
  if (files.empty()) throw std::runtime_error("no .pgm or .ppm images in " + dir);
  return files;
}

std::vector<Image> load_images(const std::string& dir) {
  const auto files = corpus_files(dir);
  return parallel_map<Image>(files.size(), [&](std::size_t i) {
    try {
      return read_pnm_file(files[i]);
    } catch (const ImageFormatError& e) {
      throw ImageFormatError(files[i].string() + ": " + e.what(), e.offset());
    }
  });
}

DctPlane dct_plane(const Plane& p) { return make_dct_plane(partition_and_pad(p)); }

// Luma (or the gray channel) of every image.
std::vector<DctPlane> luma_planes(const std::vector<Image>& images) {
  return parallel_map<DctPlane>(images.size(), [&](std::size_t i) { return dct_plane(image_planes(images[i], Colorspace::YCbCr)[0]); });
}

std::vector<DctPlane> chroma_planes(const std::vector<Image>& images) {
  std::vector<DctPlane> out;
  for (const Image& img : images) {
    if (img.channels != 3) continue;
    const auto planes = image_planes(img, Colorspace::YCbCr);
    out.push_back(dct_plane(planes[1]));
    out.push_back(dct_plane(planes[2]));
  }
  return out;
}

std::vector<double> position_samples(const std::vector<DctPlane>& planes, Position pos) {
  std::vector<double> xs;
  for (const DctPlane& p : planes)
    for (const DctBlock& b : p.coeffs) xs.push_back(b[pos]);
  return xs;
}

Position position_at(int p) { return {static_cast<std::uint8_t>(p / kBlockSize), static_cast<std::uint8_t>(p % kBlockSize)}; }

std::vector<double> split_numbers(const std::string& text, std::size_t count, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in " + what);
    }
  }
  if (out.size() != count) throw UsageError(what + " needs " + std::to_string(count) + " comma-separated numbers");
  return out;
}

std::optional<CodecModels> load_models(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return deserialize_models(read_file(path));
}

// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::string input, output, profile = "sigma-zigzag-residue", colorspace = "ycbcr", models;
  int quality = 50;
  double budget = kDefaultPenaltyBudget;
  bool embed = false;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  CodecConfig config;
  const auto profile = parse_profile(a.profile);
  if (!profile) throw UsageError("unknown profile '" + a.profile + "'");
  const auto cs = parse_colorspace(a.colorspace);
  if (!cs) throw UsageError("unknown colorspace '" + a.colorspace + "'");
  if (a.quality < 1 || a.quality > 100) throw UsageError("--quality must be in 1..100");
  config.profile = *profile;
  config.colorspace = *cs;
  config.quality = a.quality;
  config.ladder_budget = a.budget;
  config.embed_models = a.embed;
  const Image img = read_pnm_file(a.input);
  const auto models = load_models(a.models);
  const EncodeResult r = encode_image(img, config, models ? &*models : nullptr);
  write_file(a.output, r.bytes);
  out << a.output << ": " << r.bytes.size() << " bytes, " << num(r.stats.bits_per_pixel()) << " bpp\n";
  return 0;
}

struct DecodeArgs {
  std::string input, output, stats, models;
};

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  const auto models = load_models(a.models);
  const DecodeResult r = decode_image(read_file(a.input), models ? &*models : nullptr);
  write_pnm_file(a.output, r.image);
  if (!a.stats.empty()) {
    Csv csv(a.stats, out);
    csv.row("channel", "j", "k", "blocks", "bits", "bits_per_value");
    for (std::size_t c = 0; c < r.stats.channels.size(); ++c) {
      const ChannelStats& s = r.stats.channels[c];
      for (int p = 0; p < kBlockArea; ++p) {
        const double bits = s.bits[static_cast<std::size_t>(p)];
        csv.row(c, p / kBlockSize, p % kBlockSize, s.blocks, bits, bits / static_cast<double>(s.blocks));
      }
    }
  }
  out << a.output << ": " << r.image.width << "x" << r.image.height << "x" << r.image.channels << ", "
      << num(r.stats.bits_per_pixel()) << " bpp\n";
  return 0;
}

struct FitEpdArgs {
  std::string corpus, out, kappa_mode = "grid", synthetic;
  double kappa_value = 0.5;
  std::uint64_t seed = 0;
};

int cmd_fit_epd(const FitEpdArgs& a, std::ostream& out) {
  if (a.kappa_mode != "grid" && a.kappa_mode != "fixed") throw UsageError("--kappa must be grid or fixed");
  const std::vector<double> kappas = a.kappa_mode == "grid" ? epd_kappa_grid() : std::vector<double>{a.kappa_value};

  struct Series {
    int j, k;
    std::vector<double> xs;
    MuPolicy mu;
  };
  std::vector<Series> series;
  if (!a.synthetic.empty()) {
    const auto v = split_numbers(a.synthetic, 3, "--synthetic");
    if (!(v[2] >= 1.0)) throw UsageError("--synthetic sample count must be positive");
    series.push_back({0, 0, epd_sample(EpdParams(v[0], v[1]), static_cast<std::size_t>(v[2]), a.seed), MuPolicy::Zero});
  } else {
    const auto planes = luma_planes(load_images(a.corpus));
    for (int p = 0; p < kBlockArea; ++p)
      series.push_back({p / kBlockSize, p % kBlockSize, position_samples(planes, position_at(p)), p == 0 ? MuPolicy::Mean : MuPolicy::Zero});
  }
  const auto rows = parallel_map<std::vector<double>>(series.size(), [&](std::size_t i) {
    std::vector<double> bits;
    for (double kappa : kappas) bits.push_back(-epd_mle(series[i].xs, series[i].mu, kappa).mean_log2_likelihood);
    return bits;
  });
  Csv csv(a.out, out);
  csv.row("j", "k", "kappa", "bits");
  for (std::size_t i = 0; i < series.size(); ++i)
    for (std::size_t t = 0; t < kappas.size(); ++t) csv.row(series[i].j, series[i].k, kappas[t], rows[i][t]);
  return 0;
}

struct DiagnoseArgs {
  std::string corpus, out;
  double kappa = 0.5;
  std::size_t points = 99;
};

int cmd_diagnose_cdf(const DiagnoseArgs& a, std::ostream& out) {
  if (!(a.kappa > 0.0)) throw UsageError("--kappa must be positive");
  if (a.points < 2) throw UsageError("--points must be at least 2");
  const auto planes = luma_planes(load_images(a.corpus));
  const auto curves = parallel_map<std::vector<CdfDeviation>>(kBlockArea - 1, [&](std::size_t i) {
    const auto xs = position_samples(planes, position_at(static_cast<int>(i) + 1));
    const EpdFit fit = epd_mle(xs, MuPolicy::Zero, a.kappa);
    const auto full = cdf_diagnostic(xs, fit.params);
    std::vector<CdfDeviation> picked;
    for (std::size_t t = 0; t < a.points; ++t)
      picked.push_back(full[t * (full.size() - 1) / (a.points - 1)]);
    return picked;
  });
  Csv csv(a.out, out);
  csv.row("j", "k", "quantile", "deviation");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const int p = static_cast<int>(i) + 1;
    for (const CdfDeviation& d : curves[i]) csv.row(p / kBlockSize, p % kBlockSize, d.quantile, d.deviation);
  }
  return 0;
}

struct RdArgs {
  std::string dist = "epd:0.5,1", range = "-10,10", n_list = "1..32", density = "uniform", out;
  int p = 2;
};

int cmd_rd_curve(const RdArgs& a, std::ostream& out) {
  if (a.dist.rfind("epd:", 0) != 0) throw UsageError("--dist must be epd:kappa,sigma");
  const auto d = split_numbers(a.dist.substr(4), 2, "--dist");
  const auto r = split_numbers(a.range, 2, "--range");
  if (!(r[0] < r[1])) throw UsageError("--range needs a < b");
  const EpdParams params(d[0], d[1]);
  const SourceDensity source(params);
  const std::vector<std::size_t> ns = parse_n_list(a.n_list);

  std::optional<QuantDensity> density;
  if (a.density == "optimal" || a.density.rfind("rd:", 0) == 0) {
    const SourceDensity window = SourceDensity::tabulate([&](double x) { return epd_pdf(params, x); }, r[0], r[1]);
    if (a.density == "optimal") {
      density = density_distortion_optimal(window, a.p);
    } else {
      const double lambda = split_numbers(a.density.substr(3), 1, "--density rd:lambda")[0];
      density = density_rd(window, lambda, a.p).density;
    }
  } else if (a.density != "uniform") {
    throw UsageError("--density must be uniform, optimal or rd:lambda");
  }
  Csv csv(a.out, out);
  csv.row("N", "rate", "distortion");
  for (std::size_t n : ns) {
    const QuantizerN qz = density ? nodes_from_density(*density, n) : uniform_quantizer(r[0], r[1], n);
    const RateDistortionPoint pt = eval_rd(source, qz);
    csv.row(n, pt.rate, pt.distortion);
  }
  return 0;
}

struct LadderArgs {
  double budget = kDefaultPenaltyBudget, sigma_start = kDefaultSigmaStart, sigma_max = kDefaultSigmaMax;
  std::string out;
};

int cmd_build_ladder(const LadderArgs& a, std::ostream& out) {
  const SigmaLadder ladder = build_ladder(a.sigma_start, a.sigma_max, a.budget);
  const auto& nodes = ladder.nodes();
  Csv csv(a.out, out);
  csv.row("index", "sigma", "cell_width", "cell_lo", "cell_hi", "mean_penalty", "max_penalty", "golomb_m", "golomb_penalty", "flush_bits",
          "flush_penalty");
  constexpr int kCellSamples = 64;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double lo = i == 0 ? nodes[0] : 0.5 * (nodes[i - 1] + nodes[i]);
    const double hi = i + 1 == nodes.size() ? nodes[i] : 0.5 * (nodes[i] + nodes[i + 1]);
    double mean = 0.0, worst = 0.0;
    for (int s = 0; s < kCellSamples; ++s) {
      const double sigma = lo + (hi - lo) * (s + 0.5) / kCellSamples;
      const double pen = mismatch_penalty(sigma, nodes[i]);
      mean += pen / kCellSamples;
      worst = std::max(worst, pen);
    }
    int m = 0;
    const double golomb = golomb_pow2_penalty(nodes[i], &m);
    const int flush = lsb_flush_bits(nodes[i]);
    csv.row(i, nodes[i], cell_width(nodes[i], a.budget), lo, hi, mean, worst, m, golomb, flush, lsb_flush_penalty(nodes[i], flush));
  }
  return 0;
}

struct PredictArgs {
  std::string corpus, profiles = "zigzag,mu-context,sigma-context,reduced,width-scan,none,mu-boundary,sigma-boundary,sigma-zigzag-residue,VH,V+H,H-only";
  std::string out, position = "0,1", models;
  std::size_t window = 2000;
  int quality = 50;
};

class PredictReport {
 public:
  explicit PredictReport(Csv& csv) : csv_(csv) { csv_.row("analysis", "j", "k", "index", "quantity", "value"); }
  void at(const std::string& analysis, Position pos, const std::string& quantity, double v) {
    csv_.row(analysis, static_cast<int>(pos.row), static_cast<int>(pos.col), "", quantity, v);
  }
  void overall(const std::string& analysis, const std::string& quantity, double v) { csv_.row(analysis, "", "", "", quantity, v); }
  void indexed(const std::string& analysis, Position pos, std::size_t index, const std::string& quantity, double v) {
    csv_.row(analysis, static_cast<int>(pos.row), static_cast<int>(pos.col), index, quantity, v);
  }

 private:
  Csv& csv_;
};

void report_zigzag(const std::vector<DctPlane>& planes, PredictReport& rep) {
  std::vector<DctBlock> blocks;
  for (const DctPlane& p : planes) blocks.insert(blocks.end(), p.coeffs.begin(), p.coeffs.end());
  const auto scores = score_sigma_zigzag(blocks, fit_sigma_zigzag(blocks));
  double saving = 0.0;
  for (const ZigzagScore& s : scores) {
    rep.at("zigzag", s.position, "constant_bits", s.constant_bits);
    rep.at("zigzag", s.position, "predicted_bits", s.predicted_bits);
    rep.at("zigzag", s.position, "saving", s.constant_bits - s.predicted_bits);
    saving += (s.constant_bits - s.predicted_bits) / static_cast<double>(scores.size());
  }
  rep.overall("zigzag", "mean_saving", saving);
}

void report_mu_context(const std::vector<DctPlane>& planes, PredictReport& rep) {
  const std::pair<BoundaryFeatures, const char*> sets[] = {{BoundaryFeatures::SameTwo, "mu-context:two"},
                                                           {BoundaryFeatures::SameFour, "mu-context:four"},
                                                           {BoundaryFeatures::RowColumn, "mu-context:rowcol"},
                                                           {BoundaryFeatures::Boundary1D, "mu-context:boundary"},
                                                           {BoundaryFeatures::Full, "mu-context:full"}};
  for (const auto& [features, name] : sets) {
    const BoundaryModelSet set = fit_boundary_models(planes, {.features = features, .interior_only = true, .fit_sigma = false});
    const auto scores = score_boundary_models(planes, set, true);
    double saving = 0.0;
    for (int p = 1; p < kBlockArea; ++p) {
      const BoundaryScore& s = scores[static_cast<std::size_t>(p)];
      const double gain = s.variance > 0.0 && s.mu_mse > 0.0 ? savings_bits(s.variance, s.mu_mse) : 0.0;
      rep.at(name, position_at(p), "variance", s.variance);
      rep.at(name, position_at(p), "mu_mse", s.mu_mse);
      rep.at(name, position_at(p), "saving", gain);
      saving += gain / (kBlockArea - 1);
    }
    rep.overall(name, "mean_saving", saving);
  }
}

void report_sigma_context(const std::vector<DctPlane>& planes, PredictReport& rep) {
  for (const bool zz : {false, true}) {
    const std::string name = zz ? "sigma-context:boundary+zigzag" : "sigma-context:boundary";
    const BoundaryModelSet set = fit_boundary_models(planes, {.zigzag_residues = zz});
    const auto scores = score_boundary_models(planes, set);
    double saving = 0.0;
    for (int p = 1; p < kBlockArea; ++p) {
      const BoundaryScore& s = scores[static_cast<std::size_t>(p)];
      rep.at(name, position_at(p), "constant_bits", s.constant_bits);
      rep.at(name, position_at(p), "predicted_bits", s.predicted_bits);
      saving += (s.constant_bits - s.predicted_bits) / (kBlockArea - 1);
    }
    rep.overall(name, "mean_saving", saving);
  }
}

void report_reduced(const std::vector<DctPlane>& planes, PredictReport& rep) {
  const BoundaryModelSet mu = fit_boundary_models(planes, {.fit_sigma = false});
  const SigmaTrainingSet data = sigma_training_set(planes, mu);
  const Eigen::MatrixXd& f = data.abs_features;
  const CcaResult c = cca(f, data.abs_residues, 1);
  rep.overall("reduced", "first_canonical_correlation", c[0].correlation);
  const BoundaryVector w = sigma_direction(data);
  for (std::size_t i = 0; i < w.size(); ++i) rep.overall("reduced", "direction_" + std::to_string(i), w[i]);

  // Unrestricted nonnegative fit on all 16 magnitudes as the reference.
  const std::pair<SigmaMode, const char*> modes[] = {{SigmaMode::VH, "VH"}, {SigmaMode::VPlusH, "V+H"}, {SigmaMode::HOnly, "H-only"}};
  std::vector<ReducedSigmaModel> models;
  for (const auto& [mode, name] : modes) models.push_back(sigma_feature_model(mode, data, w));
  std::array<double, 4> mean{};
  for (int p = 1; p < kBlockArea; ++p) {
    const Position pos = position_at(p);
    const Eigen::VectorXd y = data.abs_residues.col(p);
    const LinearModel full = fit_least_squares(f, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), WeightSign::Nonnegative);
    auto mse = [&](const LinearModel& m) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < f.rows(); ++r) {
        const Eigen::VectorXd row = f.row(r);
        const double e = m.evaluate(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) - y[r];
        s += e * e;
      }
      return s / static_cast<double>(f.rows());
    };
    const double ref = mse(full);
    rep.at("reduced:full", pos, "mse", ref);
    mean[0] += ref / (kBlockArea - 1);
    for (std::size_t m = 0; m < models.size(); ++m) {
      const double v = mse(models[m].expand(pos));
      rep.at(std::string("reduced:") + modes[m].second, pos, "mse", v);
      mean[m + 1] += v / (kBlockArea - 1);
    }
  }
  rep.overall("reduced:full", "mean_mse", mean[0]);
  for (std::size_t m = 0; m < models.size(); ++m) rep.overall(std::string("reduced:") + modes[m].second, "mean_mse", mean[m + 1]);
}

void report_width_scan(const std::vector<DctPlane>& planes, Position pos, std::size_t window, PredictReport& rep) {
  const BoundaryModelSet mu = fit_boundary_models(planes, {.fit_sigma = false});
  const SigmaTrainingSet data = sigma_training_set(planes, mu);
  const BoundaryVector w = sigma_direction(data);
  std::vector<std::pair<double, double>> pairs;
  for (Eigen::Index r = 0; r < data.abs_features.rows(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * data.abs_features(r, static_cast<Eigen::Index>(i));
    pairs.emplace_back(s, data.abs_residues(r, pos.index()));
  }
  const auto scan = conditional_width_scan(pairs, std::min(window, pairs.size()), true);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    rep.indexed("width-scan", pos, i, "center", scan[i].center);
    rep.indexed("width-scan", pos, i, "mean_abs", scan[i].mean_abs);
    rep.indexed("width-scan", pos, i, "width", scan[i].width);
    if (scan[i].kappa) rep.indexed("width-scan", pos, i, "kappa", *scan[i].kappa);
  }
}

int cmd_predict_eval(const PredictArgs& a, std::ostream& out) {
  const std::vector<Image> images = load_images(a.corpus);
  const std::vector<DctPlane> planes = luma_planes(images);
  const auto pos = split_numbers(a.position, 2, "--position");
  if (pos[0] < 0 || pos[0] > 7 || pos[1] < 0 || pos[1] > 7) throw UsageError("--position must be j,k in 0..7");
  const Position scan_pos{static_cast<std::uint8_t>(pos[0]), static_cast<std::uint8_t>(pos[1])};
  const auto models = load_models(a.models);

  std::vector<std::string> names;
  std::stringstream ss(a.profiles);
  for (std::string item; std::getline(ss, item, ',');) names.push_back(item);
  for (const std::string& n : names)
    if (n != "zigzag" && n != "mu-context" && n != "sigma-context" && n != "reduced" && n != "width-scan" && !parse_profile(n))
      throw UsageError("unknown profile '" + n + "'");

  Csv csv(a.out, out);
  PredictReport rep(csv);
  for (const std::string& n : names) {
    if (n == "zigzag") {
      report_zigzag(planes, rep);
    } else if (n == "mu-context") {
      report_mu_context(planes, rep);
    } else if (n == "sigma-context") {
      report_sigma_context(planes, rep);
    } else if (n == "reduced") {
      report_reduced(planes, rep);
    } else if (n == "width-scan") {
      report_width_scan(planes, scan_pos, a.window, rep);
    } else {
      CodecConfig config;
      config.profile = *parse_profile(n);
      config.quality = a.quality;
      const auto per_image = parallel_map<EncodeResult>(images.size(), [&](std::size_t i) {
        return encode_image(images[i], config, models ? &*models : nullptr);
      });
      const std::string name = "codec:" + n;
      double bpp = 0.0;
      std::array<double, kBlockArea> bits{};
      for (const EncodeResult& r : per_image) {
        bpp += r.stats.bits_per_pixel() / static_cast<double>(images.size());
        for (const ChannelStats& c : r.stats.channels)
          for (std::size_t p = 0; p < kBlockArea; ++p)
            bits[p] += c.bits[p] / static_cast<double>(c.blocks) / static_cast<double>(r.stats.channels.size() * images.size());
      }
      for (int p = 0; p < kBlockArea; ++p) rep.at(name, position_at(p), "bits_per_value", bits[static_cast<std::size_t>(p)]);
      rep.overall(name, "bpp", bpp);
    }
  }
  return 0;
}

struct FitModelsArgs {
  std::string corpus, color, out, source;
};

int cmd_fit_models(const FitModelsArgs& a, std::ostream& out) {
  if (a.out.empty() && a.source.empty()) throw UsageError("fit-models needs --out and/or --emit-source");
  const auto luma = luma_planes(load_images(a.corpus));
  std::vector<DctPlane> chroma;
  if (!a.color.empty()) chroma = chroma_planes(load_images(a.color));
  if (chroma.empty()) chroma = luma;
  const CodecModels models = fit_codec_models(luma, chroma);
  if (!a.out.empty()) write_file(a.out, serialize_models(models));
  if (!a.source.empty()) {
    std::ofstream f(a.source, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + a.source);
    f << builtin_models_source(models);
  }
  out << "fitted on " << luma.size() << " luma and " << chroma.size() << " chroma planes\n";
  return 0;
}

// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (int n = 1; std::getline(f, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Fills options the command line left unset.
void apply_config(CLI::App& sub, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw UsageError("config key '" + key + "' is not an option of " + sub.get_name());
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

std::size_t thread_cap() {
  if (const char* env = std::getenv("EPQ_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  auto parse = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v == 0 || s[0] == '-') throw UsageError("bad N in '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    if (const auto dots = item.find(".."); dots != std::string::npos) {
      const std::size_t a = parse(item.substr(0, dots)), b = parse(item.substr(dots + 2));
      if (a > b) throw UsageError("empty range '" + item + "'");
      for (std::size_t n = a; n <= b; ++n) out.push_back(n);
    } else {
      out.push_back(parse(item));
    }
  }
  if (out.empty()) throw UsageError("empty N list");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exponential-power DCT image codec and modelling tools"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; flags override it");

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Compress a PGM/PPM image");
  encode->add_option("input", enc.input)->required();
  encode->add_option("-o,--output", enc.output)->required();
  encode->add_option("--quality", enc.quality, "1..100");
  encode->add_option("--profile", enc.profile, "none, mu-boundary, sigma-boundary, sigma-zigzag-residue, VH, V+H, H-only");
  encode->add_option("--colorspace", enc.colorspace, "ycbcr or rgb");
  encode->add_option("--budget", enc.budget, "sigma ladder penalty budget, bits per value");
  encode->add_option("--models", enc.models, "model file from fit-models");
  encode->add_flag("--embed-models", enc.embed, "refit on the image and store the models");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Decompress to PGM/PPM");
  decode->add_option("input", dec.input)->required();
  decode->add_option("-o,--output", dec.output)->required();
  decode->add_option("--stats", dec.stats, "per-position bit counts as CSV");
  decode->add_option("--models", dec.models);

  FitEpdArgs epd;
  auto* fit_epd = app.add_subcommand("fit-epd", "Per-position code length against kappa");
  fit_epd->add_option("corpus", epd.corpus);
  fit_epd->add_option("--out", epd.out);
  fit_epd->add_option("--kappa", epd.kappa_mode, "grid or fixed");
  fit_epd->add_option("--kappa-value", epd.kappa_value, "kappa for --kappa fixed");
  fit_epd->add_option("--synthetic", epd.synthetic, "kappa,sigma,n: fit seeded samples instead of a corpus");
  fit_epd->add_option("--seed", epd.seed);

  DiagnoseArgs diag;
  auto* diagnose = app.add_subcommand("diagnose-cdf", "CDF deviation curves at a fixed kappa");
  diagnose->add_option("corpus", diag.corpus)->required();
  diagnose->add_option("--kappa", diag.kappa);
  diagnose->add_option("--points", diag.points, "quantiles per curve");
  diagnose->add_option("--out", diag.out);

  RdArgs rd;
  std::uint64_t unused_seed = 0;
  auto* rd_curve = app.add_subcommand("rd-curve", "Rate and distortion of N-level quantizers");
  rd_curve->add_option("--dist", rd.dist, "epd:kappa,sigma");
  rd_curve->add_option("--range", rd.range, "a,b");
  rd_curve->add_option("--N-list", rd.n_list, "e.g. 1..32");
  rd_curve->add_option("--density", rd.density, "uniform, optimal or rd:lambda");
  rd_curve->add_option("--p", rd.p, "distortion exponent");
  rd_curve->add_option("--out", rd.out);
  rd_curve->add_option("--seed", unused_seed);

  PredictArgs pred;
  auto* predict = app.add_subcommand("predict-eval", "Prediction savings, width scans and codec profiles");
  predict->add_option("corpus", pred.corpus)->required();
  predict->add_option("--profile", pred.profiles, "comma list");
  predict->add_option("--position", pred.position, "j,k for the width scan");
  predict->add_option("--window", pred.window, "width scan window");
  predict->add_option("--quality", pred.quality);
  predict->add_option("--models", pred.models);
  predict->add_option("--out", pred.out);
  predict->add_option("--seed", unused_seed);

  LadderArgs lad;
  auto* ladder = app.add_subcommand("build-ladder", "Sigma ladder nodes and penalties");
  ladder->add_option("--E", lad.budget, "penalty budget, bits per value");
  ladder->add_option("--sigma-start", lad.sigma_start);
  ladder->add_option("--sigma-max", lad.sigma_max);
  ladder->add_option("--out", lad.out);

  FitModelsArgs fm;
  auto* fit_models = app.add_subcommand("fit-models", "Train codec models");
  fit_models->add_option("corpus", fm.corpus)->required();
  fit_models->add_option("--color", fm.color, "color corpus for the chroma bank");
  fit_models->add_option("--out", fm.out);
  fit_models->add_option("--emit-source", fm.source, "write C++ source for the built-in models");

  std::vector<const char*> argv{"epq"};
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) apply_config(*sub, read_config(config_path));
    if (sub == encode) return cmd_encode(enc, out);
    if (sub == decode) return cmd_decode(dec, out);
    if (sub == fit_epd) {
      if (epd.corpus.empty() && epd.synthetic.empty()) throw UsageError("fit-epd needs a corpus directory or --synthetic");
      return cmd_fit_epd(epd, out);
    }
    if (sub == diagnose) return cmd_diagnose_cdf(diag, out);
    if (sub == rd_curve) return cmd_rd_curve(rd, out);
    if (sub == predict) return cmd_predict_eval(pred, out);
    if (sub == ladder) return cmd_build_ladder(lad, out);
    if (sub == fit_models) return cmd_fit_models(fm, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace epq::cli
