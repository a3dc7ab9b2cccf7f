#include "epq/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>


namespace epq {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'P', 'Q', '1'};
// Widths from here up write low bits raw: lsb_flush_bits() first reaches 1 at 8 sqrt(2).
const double kFlushWidth = 8.0 * std::numbers::sqrt2;

constexpr std::array<int, kBlockArea> kLumaBase{
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<std::pair<Profile, std::string_view>, 7> kProfileNames{{
    {Profile::None, "none"},
    {Profile::MuBoundary, "mu-boundary"},
    {Profile::SigmaBoundary, "sigma-boundary"},
    {Profile::SigmaZigzag, "sigma-zigzag-residue"},
    {Profile::VH, "VH"},
    {Profile::VPlusH, "V+H"},
    {Profile::HOnly, "H-only"},
}};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> out;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 | static_cast<std::uint32_t>(b[2]) << 16 |
           static_cast<std::uint32_t>(b[3]) << 24;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_)
      throw ContainerError(ContainerError::Kind::Length, "container truncated: need " + std::to_string(n) + " bytes at offset " +
                                                             std::to_string(pos_) + ", " + std::to_string(in_.size() - pos_) + " left");
    const auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

const ModelBank& bank_for(const CodecModels& models, int channels, Colorspace cs, int c) {
  return channels == 3 && cs == Colorspace::YCbCr && c > 0 ? models.chroma : models.luma;
}

double to_sample(double v) { return std::clamp(std::round(255.0 * v), 0.0, 255.0) / 255.0; }

int block_count(int size) { return (size + kBlockSize - 1) / kBlockSize; }

struct SymbolCode {
  Position position;
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t table = 0;
  int flush_bits = 0;
  long long value = 0;
};

struct BlockCode {
  std::array<SymbolCode, kBlockArea> symbols;  // coding order
  PixelBlock recon;
};

constexpr int kSettlePasses = 16;

// Shared encoder/decoder walk over one channel; the decoder sees exactly the
// context the encoder used because both read only reconstructed blocks.
class ChannelCoder {
 public:
  ChannelCoder(const ModelBank& bank, Profile profile, const std::array<double, kBlockArea>& steps, const SigmaLadder& ladder,
               const std::vector<ValueTable>& tables, int width, int height, ChannelTrace* trace)
      : bank_(bank), profile_(profile), steps_(steps), ladder_(ladder), tables_(tables), trace_(trace) {
    recon_.width = width;
    recon_.height = height;
    recon_.cols = block_count(width);
    recon_.rows = block_count(height);
    recon_.blocks.resize(static_cast<std::size_t>(recon_.cols) * static_cast<std::size_t>(recon_.rows));
  }

  std::vector<std::uint8_t> encode(const Plane& plane, ChannelStats& stats) {
    const BlockGrid grid = partition_and_pad(plane);
    RansEncoder enc;
    BitWriter raw;
    for (int by = 0; by < recon_.rows; ++by)
      for (int bx = 0; bx < recon_.cols; ++bx) {
        const BlockCode code = settle(bx, by, grid.at(bx, by));
        std::array<double, kBlockArea> bits{};
        for (const SymbolCode& s : code.symbols) {
          const long long scale = 1LL << s.flush_bits;
          const long long shifted = s.value + scale / 2;
          const long long hi = shifted >= 0 ? shifted / scale : -((-shifted + scale - 1) / scale);
          const long long lo = shifted - hi * scale;
          double& b = bits[static_cast<std::size_t>(s.position.index())];
          b = encode_value(enc, raw, tables_[s.table], hi);
          raw.put(static_cast<std::uint32_t>(lo), s.flush_bits);
          b += s.flush_bits;
        }
        commit(bx, by, code, bits, stats);
      }
    const std::vector<std::uint8_t> rans = enc.finish();
    const std::vector<std::uint8_t> raw_bytes = raw.finish();
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(rans.size()));
    w.bytes(rans);
    w.bytes(raw_bytes);
    stats.payload_bytes = w.out.size();
    return std::move(w.out);
  }

  void decode(std::span<const std::uint8_t> payload, ChannelStats& stats, std::vector<long long>& residues) {
    ByteReader r(payload);
    const std::uint32_t rans_len = r.u32();
    const auto rans = r.take(rans_len);
    const auto raw_bytes = payload.subspan(r.pos());
    RansDecoder dec(rans);
    BitReader raw(raw_bytes);
    for (int by = 0; by < recon_.rows; ++by)
      for (int bx = 0; bx < recon_.cols; ++bx) {
        std::array<double, kBlockArea> bits{};
        const BlockCode code = walk(bx, by, [&](Position pos, std::size_t table, double, double, int m) {
          const ValueTable& vt = tables_[table];
          const std::size_t before = raw.bits_consumed();
          const long long hi = decode_value(dec, raw, vt);
          const long long mag = hi < 0 ? -hi : hi;
          const std::uint32_t sym = mag <= vt.x_max ? static_cast<std::uint32_t>(hi + vt.x_max)
                                                    : static_cast<std::uint32_t>(hi < 0 ? 2 * vt.x_max + 1 : 2 * vt.x_max + 2);
          const long long lo = m > 0 ? static_cast<long long>(raw.get(m)) : 0;
          bits[static_cast<std::size_t>(pos.index())] = symbol_cost(vt.table, sym) + static_cast<double>(raw.bits_consumed() - before);
          const long long scale = 1LL << m;
          const long long v = hi * scale + lo - scale / 2;
          residues.push_back(v);
          return v;
        });
        commit(bx, by, code, bits, stats);
      }
    stats.payload_bytes = payload.size();
  }

  const BlockGrid& reconstruction() const { return recon_; }

 private:
  Prediction predict(bool context, Position pos, const BoundaryVector& ctx, std::span<const double> zz) const {
    const auto i = static_cast<std::size_t>(pos.index());
    if (!context || profile_ == Profile::None)
      return {bank_.fallback[i].mu.intercept, std::max(kSigmaFloor, bank_.fallback[i].sigma.intercept)};
    BoundaryVector mag{};
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(ctx[k]);
    Prediction pr;
    pr.mu = bank_.mu[i].evaluate(ctx);
    double s = 0.0;
    switch (profile_) {
      case Profile::None:
      case Profile::MuBoundary: s = bank_.sigma_const[i]; break;
      case Profile::SigmaBoundary: s = bank_.sigma_boundary[i].evaluate(mag); break;
      case Profile::SigmaZigzag: {
        std::vector<double> f(mag.begin(), mag.end());
        f.insert(f.end(), zz.begin(), zz.end());
        s = bank_.sigma_zigzag[i].evaluate(f);
        break;
      }
      case Profile::VH: s = bank_.vh_linear[i].evaluate(mag); break;
      case Profile::VPlusH: s = bank_.vplush_linear[i].evaluate(mag); break;
      case Profile::HOnly: s = bank_.honly_linear[i].evaluate(mag); break;
    }
    pr.sigma = std::max(kSigmaFloor, s);
    return pr;
  }

  // Values and reconstruction of one block; `value` supplies each quantized
  // value in coding order.  Reads only blocks already committed.
  template <typename ValueFn>
  BlockCode walk(int bx, int by, ValueFn&& value) const {
    const bool context = bx > 0 && by > 0;
    BoundaryVector ctx{};
    if (context) ctx = boundary_dct(recon_.at(bx - 1, by), recon_.at(bx, by - 1));
    std::vector<double> zz;
    zz.reserve(kBlockArea);
    BlockCode code;
    DctBlock out;
    for (std::size_t n = 0; n < kBlockArea; ++n) {
      const Position pos = zigzag_full()[n];
      const Prediction pr = predict(context, pos, ctx, zz);
      const double q = steps_[static_cast<std::size_t>(pos.index())];
      const double width = pr.sigma / q;
      const int m = width >= kFlushWidth ? lsb_flush_bits(width) : 0;
      const std::size_t table = ladder_.lookup(std::ldexp(width, -m));
      const long long v = value(pos, table, pr.mu, q, m);
      code.symbols[n] = {pos, pr.mu, pr.sigma, table, m, v};
      out[pos] = pr.mu + q * static_cast<double>(v);
      if (n != 0) zz.push_back(std::abs(q * static_cast<double>(v)));
    }
    code.recon = dct2_inverse(out);
    for (double& v : code.recon.values) v = to_sample(v);
    return code;
  }

  BlockCode quantize(int bx, int by, const PixelBlock& input) const {
    const DctBlock c = dct2_forward(input);
    return walk(bx, by, [&](Position pos, std::size_t, double mu, double q, int) { return std::llround((c[pos] - mu) / q); });
  }

  // Requantizes the reconstruction until it reproduces its own values, so
  // that encoding a decoded image gives back the same file.  Clamping to the
  // sample range is what moves a reconstruction off its coefficients.
  BlockCode settle(int bx, int by, const PixelBlock& input) const {
    BlockCode code = quantize(bx, by, input);
    for (int pass = 0; pass < kSettlePasses; ++pass) {
      BlockCode next = quantize(bx, by, code.recon);
      if (same_values(next, code)) break;
      code = std::move(next);
    }
    return code;
  }

  static bool same_values(const BlockCode& a, const BlockCode& b) {
    for (std::size_t n = 0; n < kBlockArea; ++n)
      if (a.symbols[n].value != b.symbols[n].value) return false;
    return true;
  }

  void commit(int bx, int by, const BlockCode& code, const std::array<double, kBlockArea>& bits, ChannelStats& stats) {
    for (std::size_t i = 0; i < kBlockArea; ++i) stats.bits[i] += bits[i];
    if (trace_)
      for (const SymbolCode& s : code.symbols)
        trace_->push_back({s.mu, s.sigma, static_cast<std::uint32_t>(s.table), s.flush_bits, s.value});
    recon_.at(bx, by) = code.recon;
    ++stats.blocks;
  }

  const ModelBank& bank_;
  Profile profile_;
  const std::array<double, kBlockArea>& steps_;
  const SigmaLadder& ladder_;
  const std::vector<ValueTable>& tables_;
  ChannelTrace* trace_;
  BlockGrid recon_;
};

Image planes_to_image(const std::vector<Plane>& planes, Colorspace cs) {
  Image img;
  img.width = planes.at(0).width;
  img.height = planes[0].height;
  img.channels = static_cast<int>(planes.size());
  img.data.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.channels));
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::round(255.0 * v), 0.0, 255.0)); };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 3 && cs == Colorspace::YCbCr) {
        const Rgb p = ycbcr_to_rgb({planes[0].at(x, y), planes[1].at(x, y), planes[2].at(x, y)});
        img.at(x, y, 0) = byte(p.r);
        img.at(x, y, 1) = byte(p.g);
        img.at(x, y, 2) = byte(p.b);
      } else {
        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = byte(planes[static_cast<std::size_t>(c)].at(x, y));
      }
    }
  return img;
}

void validate(const CodecConfig& config) {
  if (config.quality < 1 || config.quality > 100) throw std::invalid_argument("quality must be in 1..100");
  if (!(config.ladder_budget > 0.0) || !std::isfinite(config.ladder_budget)) throw std::invalid_argument("ladder budget must be positive");
  if (static_cast<int>(config.profile) > static_cast<int>(Profile::HOnly)) throw std::invalid_argument("unknown profile");
}

SigmaLadder ladder_for(float budget) { return build_ladder(kDefaultSigmaStart, kDefaultSigmaMax, static_cast<double>(budget)); }

CodecModels refit_on(const std::vector<Plane>& planes, int channels, Colorspace cs) {
  std::vector<DctPlane> luma, chroma;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    DctPlane p = make_dct_plane(partition_and_pad(planes[c]));
    (channels == 3 && cs == Colorspace::YCbCr && c > 0 ? chroma : luma).push_back(std::move(p));
  }
  // A bank nobody reads still has to be present in the file.
  const ModelBank l = fit_model_bank(luma);
  const ModelBank ch = chroma.empty() ? l : fit_model_bank(chroma);
  return deserialize_models(serialize_models(CodecModels{l, ch}));
}

}  // namespace

std::string_view profile_name(Profile p) {
  for (const auto& [k, n] : kProfileNames)
    if (k == p) return n;
  return "unknown";
}

std::optional<Profile> parse_profile(std::string_view name) {
  for (const auto& [k, n] : kProfileNames)
    if (n == name) return k;
  return std::nullopt;
}

std::string_view colorspace_name(Colorspace c) { return c == Colorspace::Rgb ? "rgb" : "ycbcr"; }

std::optional<Colorspace> parse_colorspace(std::string_view name) {
  if (name == "rgb") return Colorspace::Rgb;
  if (name == "ycbcr") return Colorspace::YCbCr;
  return std::nullopt;
}

std::array<int, kBlockArea> quant_table(int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("quality must be in 1..100");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, kBlockArea> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((kLumaBase[i] * scale + 50) / 100, 1, 255);
  return out;
}

std::array<double, kBlockArea> quant_steps(int quality) {
  const auto t = quant_table(quality);
  std::array<double, kBlockArea> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] / 256.0;
  return out;
}

double ChannelStats::total_bits() const {
  double s = 0.0;
  for (double b : bits) s += b;
  return s;
}

double CodecStats::payload_bits() const {
  double s = 0.0;
  for (const auto& c : channels) s += 8.0 * static_cast<double>(c.payload_bytes);
  return s;
}

double CodecStats::bits_per_pixel() const { return pixels ? 8.0 * static_cast<double>(file_bytes) / static_cast<double>(pixels) : 0.0; }

std::vector<Plane> image_planes(const Image& image, Colorspace colorspace) {
  std::vector<Plane> planes;
  if (image.channels == 3 && colorspace == Colorspace::YCbCr) {
    planes.assign(3, Plane(image.width, image.height));
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const YCbCr p = rgb_to_ycbcr({image.at(x, y, 0) / 255.0, image.at(x, y, 1) / 255.0, image.at(x, y, 2) / 255.0});
        planes[0].at(x, y) = p.y;
        planes[1].at(x, y) = p.cb;
        planes[2].at(x, y) = p.cr;
      }
    return planes;
  }
  for (int c = 0; c < image.channels; ++c) planes.push_back(channel_plane(image, c));
  return planes;
}

EncodeResult encode_image(const Image& image, const CodecConfig& config, const CodecModels* models, bool keep_trace) {
  validate(config);
  if (image.width <= 0 || image.height <= 0) throw std::invalid_argument("encode_image: empty image");
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("encode_image: need 1 or 3 channels");
  if (image.data.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.channels))
    throw std::invalid_argument("encode_image: pixel buffer size does not match the dimensions");

  const std::vector<Plane> planes = image_planes(image, config.colorspace);
  std::optional<CodecModels> refit;
  if (config.embed_models) {
    try {
      refit = refit_on(planes, image.channels, config.colorspace);
    } catch (const std::invalid_argument&) {
      // Too few blocks to fit: embed the models in use instead.
      refit = models ? *models : builtin_models();
    }
  }
  const CodecModels& m = refit ? *refit : models ? *models : builtin_models();

  const float budget = static_cast<float>(config.ladder_budget);
  const SigmaLadder ladder = ladder_for(budget);
  const std::vector<ValueTable> tables = make_value_tables(ladder);
  const auto steps = quant_steps(config.quality);

  ByteWriter w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u8(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(image.width));
  w.u32(static_cast<std::uint32_t>(image.height));
  w.u8(static_cast<std::uint8_t>(image.channels));
  w.u8(static_cast<std::uint8_t>(config.colorspace));
  w.u8(static_cast<std::uint8_t>(config.quality));
  w.u8(static_cast<std::uint8_t>(config.profile));
  w.f32(budget);
  const std::vector<std::uint8_t> model_bytes = refit ? serialize_models(*refit) : std::vector<std::uint8_t>{};
  w.u32(static_cast<std::uint32_t>(model_bytes.size()));
  w.bytes(model_bytes);

  EncodeResult result;
  std::vector<Plane> recon;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    ChannelTrace trace;
    ChannelCoder coder(bank_for(m, image.channels, config.colorspace, static_cast<int>(c)), config.profile, steps, ladder, tables,
                       image.width, image.height, keep_trace ? &trace : nullptr);
    ChannelStats stats;
    const std::vector<std::uint8_t> payload = coder.encode(planes[c], stats);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
    result.stats.channels.push_back(stats);
    recon.push_back(unpartition(coder.reconstruction()));
    if (keep_trace) result.trace.push_back(std::move(trace));
  }
  w.u32(crc_of(w.out));
  result.bytes = std::move(w.out);
  result.stats.file_bytes = result.bytes.size();
  result.stats.pixels = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  result.reconstruction = planes_to_image(recon, config.colorspace);
  return result;
}

DecodeResult decode_image(std::span<const std::uint8_t> bytes, const CodecModels* models, bool keep_trace) {
  using Kind = ContainerError::Kind;
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw ContainerError(Kind::Magic, "not an EPQ1 container (bad magic)");
  ByteReader r(bytes);
  r.take(kMagic.size());
  const std::uint8_t version = r.u8();
  if (version != kContainerVersion) throw ContainerError(Kind::Version, "unsupported container version " + std::to_string(version));

  DecodeResult out;
  const std::uint32_t width = r.u32();
  const std::uint32_t height = r.u32();
  const std::uint8_t channels = r.u8();
  const std::uint8_t cs = r.u8();
  const std::uint8_t quality = r.u8();
  const std::uint8_t profile = r.u8();
  const float budget = r.f32();
  const auto model_bytes = r.take(r.u32());
  std::vector<std::span<const std::uint8_t>> payloads;
  if (channels != 1 && channels != 3) throw ContainerError(Kind::Format, "unsupported channel count " + std::to_string(channels));
  for (int c = 0; c < channels; ++c) payloads.push_back(r.take(r.u32()));
  const std::size_t body = r.pos();
  const std::uint32_t stored = r.u32();
  if (r.pos() != bytes.size()) throw ContainerError(Kind::Length, "container has " + std::to_string(bytes.size() - r.pos()) + " trailing bytes");
  if (crc_of(bytes.first(body)) != stored) throw ContainerError(Kind::Checksum, "checksum mismatch");

  if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24)) throw ContainerError(Kind::Format, "invalid image size");
  if (cs > 1) throw ContainerError(Kind::Format, "unknown colorspace " + std::to_string(cs));
  if (quality < 1 || quality > 100) throw ContainerError(Kind::Format, "quality out of range");
  if (profile > static_cast<std::uint8_t>(Profile::HOnly)) throw ContainerError(Kind::Format, "unknown profile " + std::to_string(profile));
  if (!(budget > 0.0f) || !std::isfinite(budget)) throw ContainerError(Kind::Format, "invalid ladder budget");

  out.config.colorspace = static_cast<Colorspace>(cs);
  out.config.quality = quality;
  out.config.profile = static_cast<Profile>(profile);
  out.config.ladder_budget = budget;
  out.config.embed_models = !model_bytes.empty();

  std::optional<CodecModels> embedded;
  if (!model_bytes.empty()) embedded = deserialize_models(model_bytes);
  const CodecModels& m = embedded ? *embedded : models ? *models : builtin_models();

  const SigmaLadder ladder = ladder_for(budget);
  const std::vector<ValueTable> tables = make_value_tables(ladder);
  const auto steps = quant_steps(quality);
  std::vector<Plane> recon;
  for (int c = 0; c < channels; ++c) {
    ChannelTrace trace;
    ChannelCoder coder(bank_for(m, channels, out.config.colorspace, c), out.config.profile, steps, ladder, tables, static_cast<int>(width),
                       static_cast<int>(height), keep_trace ? &trace : nullptr);
    ChannelStats stats;
    out.residues.emplace_back();
    try {
      coder.decode(payloads[static_cast<std::size_t>(c)], stats, out.residues.back());
    } catch (const BitOverrun& e) {
      throw StreamError(std::string("raw bit channel overrun: ") + e.what());
    } catch (const ContainerError& e) {
      throw StreamError(std::string("channel payload malformed: ") + e.what());
    }
    out.stats.channels.push_back(stats);
    recon.push_back(unpartition(coder.reconstruction()));
    if (keep_trace) out.trace.push_back(std::move(trace));
  }
  out.image = planes_to_image(recon, out.config.colorspace);
  out.stats.file_bytes = bytes.size();
  out.stats.pixels = static_cast<std::size_t>(width) * height;
  return out;
}

std::vector<PipelineResult> evaluate_pipeline(std::span<const Image> images, std::span<const CodecConfig> configs,
                                              const CodecModels* models) {
  if (images.empty()) throw std::invalid_argument("evaluate_pipeline: no images");
  std::vector<PipelineResult> out;
  for (const CodecConfig& config : configs) {
    PipelineResult r;
    r.config = config;
    for (const Image& img : images) {
      const EncodeResult e = encode_image(img, config, models);
      r.bits_per_pixel += e.stats.bits_per_pixel() / static_cast<double>(images.size());
      for (const ChannelStats& c : e.stats.channels)
        for (std::size_t p = 0; p < kBlockArea; ++p)
          r.bits_per_value[p] += c.bits[p] / static_cast<double>(c.blocks) / static_cast<double>(e.stats.channels.size()) /
                                 static_cast<double>(images.size());
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace epq
