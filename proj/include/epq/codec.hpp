#pragma once

// Image codec: 8x8 DCT, neighbour-based prediction of each coefficient's
// centre and width, residue quantization with JPEG-style steps, coding-table
// selection from the sigma ladder and rANS entropy coding, in a checksummed
// container.
//
// Container (little-endian): "EPQ1", version u8, width u32, height u32,
// channels u8, colorspace u8, quality u8, profile u8, ladder budget f32,
// model section (u32 length + bytes), one payload per channel (u32 length +
// bytes), CRC-32 of everything before it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epq/coder.hpp"
#include "epq/image.hpp"
#include "epq/predict.hpp"
#include "epq/sigma_ladder.hpp"

namespace epq {

inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::uint32_t kModelSchema = 1;

enum class Colorspace : std::uint8_t { Rgb = 0, YCbCr = 1 };

enum class Profile : std::uint8_t {
  None = 0,           // constant centre and width per position
  MuBoundary = 1,     // centre from the 16 boundary 1-D DCTs
  SigmaBoundary = 2,  // ... and width from their magnitudes
  SigmaZigzag = 3,    // ... plus magnitudes of earlier residues in the block
  VH = 4,             // width from one combined noise feature
  VPlusH = 5,         // width from separate left-column and upper-row features
  HOnly = 6,          // width from the upper-row feature only
};

std::string_view profile_name(Profile p);
std::optional<Profile> parse_profile(std::string_view name);
std::string_view colorspace_name(Colorspace c);
std::optional<Colorspace> parse_colorspace(std::string_view name);

struct CodecConfig {
  Colorspace colorspace = Colorspace::YCbCr;  // ignored for grayscale
  int quality = 50;                           // 1..100
  Profile profile = Profile::SigmaZigzag;
  double ladder_budget = kDefaultPenaltyBudget;
  bool embed_models = false;  // refit on the image and store the models
};

/// Standard JPEG luminance table scaled by the libjpeg quality rule, row-major.
std::array<int, kBlockArea> quant_table(int quality);
/// Quantization steps Q / 256 for [0, 1] samples.
std::array<double, kBlockArea> quant_steps(int quality);

/// Prediction models for one class of channel (luma-like or chroma).
struct ModelBank {
  std::array<PositionModel, kBlockArea> fallback;      // blocks without both neighbours
  std::array<LinearModel, kBlockArea> mu;              // 16 signed boundary features
  std::array<double, kBlockArea> sigma_const{};        // width around mu
  std::array<LinearModel, kBlockArea> sigma_boundary;  // 16 magnitudes
  std::array<LinearModel, kBlockArea> sigma_zigzag;    // 16 magnitudes + earlier residues
  ReducedSigmaModel vh, vplush, honly;

  // Expanded forms of the reduced models, filled by finalize().
  std::array<LinearModel, kBlockArea> vh_linear, vplush_linear, honly_linear;
  void finalize();
};

struct CodecModels {
  ModelBank luma;
  ModelBank chroma;
};

/// Fits a bank on training planes (original samples).
ModelBank fit_model_bank(std::span<const DctPlane> planes);
/// Fits both banks and rounds them through float32 so that they equal their serialized form.
CodecModels fit_codec_models(std::span<const DctPlane> luma, std::span<const DctPlane> chroma);

std::vector<std::uint8_t> serialize_models(const CodecModels& models);
/// Throws ContainerError (Model) on a schema or size mismatch.
CodecModels deserialize_models(std::span<const std::uint8_t> bytes);
/// C++ source defining the compiled-in models.
std::string builtin_models_source(const CodecModels& models);
/// Throws std::runtime_error if the build carries no trained models.
const CodecModels& builtin_models();
bool has_builtin_models();

class ContainerError : public std::runtime_error {
 public:
  enum class Kind { Magic, Version, Length, Checksum, Model, Format };
  ContainerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Per-symbol record of what the predictor and table selection saw.
struct TraceEntry {
  double mu = 0.0;
  double sigma = 0.0;
  std::uint32_t table = 0;
  int flush_bits = 0;
  long long value = 0;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};
using ChannelTrace = std::vector<TraceEntry>;

struct ChannelStats {
  std::array<double, kBlockArea> bits{};  // ideal code length per position, raw bits included
  std::size_t blocks = 0;
  std::size_t payload_bytes = 0;
  double total_bits() const;
};

struct CodecStats {
  std::vector<ChannelStats> channels;
  std::size_t file_bytes = 0;
  std::size_t pixels = 0;
  double payload_bits() const;
  double bits_per_pixel() const;  // file size over pixel count
};

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  CodecStats stats;
  Image reconstruction;  // what the decoder will output
  std::vector<ChannelTrace> trace;
};

struct DecodeResult {
  Image image;
  CodecStats stats;
  CodecConfig config;
  std::vector<std::vector<long long>> residues;  // quantized values per channel, coding order
  std::vector<ChannelTrace> trace;
};

/// `models` overrides the compiled-in ones unless embed_models refits.
/// Throws std::invalid_argument for an invalid config or empty image.
EncodeResult encode_image(const Image& image, const CodecConfig& config, const CodecModels* models = nullptr,
                          bool keep_trace = false);
/// Throws ContainerError for a damaged container and StreamError for a
/// payload that does not decode.
DecodeResult decode_image(std::span<const std::uint8_t> bytes, const CodecModels* models = nullptr, bool keep_trace = false);

struct PipelineResult {
  CodecConfig config;
  double bits_per_pixel = 0.0;  // mean over images
  std::array<double, kBlockArea> bits_per_value{};  // mean over channels and blocks
};
/// Encodes every image with every config.
std::vector<PipelineResult> evaluate_pipeline(std::span<const Image> images, std::span<const CodecConfig> configs,
                                              const CodecModels* models = nullptr);

/// Channel planes as coded: gray, R G B, or Y Cb Cr.
std::vector<Plane> image_planes(const Image& image, Colorspace colorspace);

}  // namespace epq
