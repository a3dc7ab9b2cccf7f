#include <bit>
#include <cstdio>
#include <sstream>

#include "epq/codec.hpp"

namespace epq {

namespace detail {
extern const std::uint8_t kBuiltinModels[];
extern const std::size_t kBuiltinModelsSize;
}  // namespace detail

namespace {

constexpr std::uint32_t kBankCount = 2;

Position position_at(int p) { return {static_cast<std::uint8_t>(p / kBlockSize), static_cast<std::uint8_t>(p % kBlockSize)}; }

int zigzag_predecessors(int p) {
  const auto& zz = zigzag();
  for (std::size_t t = 0; t < zz.size(); ++t)
    if (zz[t].index() == p) return static_cast<int>(t);
  return 0;  // DC
}

void shape_model(LinearModel& m, std::size_t features, ModelTarget target, Position pos) {
  m.weights.resize(features, 0.0);
  m.target = target;
  m.position = pos;
}

// Fixes every vector size to the schema so that visit() touches the same scalars in the same order.
void shape(ModelBank& b) {
  for (int p = 0; p < kBlockArea; ++p) {
    const auto i = static_cast<std::size_t>(p);
    const Position pos = position_at(p);
    shape_model(b.fallback[i].mu, 0, ModelTarget::Mu, pos);
    shape_model(b.fallback[i].sigma, 0, ModelTarget::Sigma, pos);
    shape_model(b.mu[i], kBoundaryCount, ModelTarget::Mu, pos);
    shape_model(b.sigma_boundary[i], kBoundaryCount, ModelTarget::Sigma, pos);
    shape_model(b.sigma_zigzag[i], kBoundaryCount + static_cast<std::size_t>(zigzag_predecessors(p)), ModelTarget::Sigma, pos);
  }
  b.vh.mode = SigmaMode::VH;
  b.vplush.mode = SigmaMode::VPlusH;
  b.honly.mode = SigmaMode::HOnly;
}

template <typename F>
void visit(ModelBank& b, F&& f) {
  auto model = [&](LinearModel& m) {
    f(m.intercept);
    for (double& w : m.weights) f(w);
  };
  for (int p = 0; p < kBlockArea; ++p) {
    const auto i = static_cast<std::size_t>(p);
    f(b.fallback[i].mu.intercept);
    f(b.fallback[i].sigma.intercept);
    model(b.mu[i]);
    f(b.sigma_const[i]);
    model(b.sigma_boundary[i]);
    model(b.sigma_zigzag[i]);
  }
  for (double& w : b.vh.direction) f(w);
  for (ReducedSigmaModel* r : {&b.vh, &b.vplush, &b.honly})
    for (auto& beta : r->beta)
      for (double& v : beta) f(v);
}

std::size_t bank_scalars() {
  ModelBank b;
  shape(b);
  std::size_t n = 0;
  visit(b, [&](double&) { ++n; });
  return n;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ContainerError(ContainerError::Kind::Model, "model section truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in[pos + static_cast<std::size_t>(k)]) << (8 * k);
  pos += 4;
  return v;
}

}  // namespace

void ModelBank::finalize() {
  vplush.direction = vh.direction;
  honly.direction = vh.direction;
  for (int p = 0; p < kBlockArea; ++p) {
    const auto i = static_cast<std::size_t>(p);
    vh_linear[i] = vh.expand(position_at(p));
    vplush_linear[i] = vplush.expand(position_at(p));
    honly_linear[i] = honly.expand(position_at(p));
  }
}

ModelBank fit_model_bank(std::span<const DctPlane> planes) {
  ModelBank b;
  b.fallback = fit_fallback_models(planes);
  const BoundaryModelSet mu = fit_boundary_models(planes, {.fit_sigma = false});
  const BoundaryModelSet boundary = fit_boundary_models(planes, {});
  const BoundaryModelSet zz = fit_boundary_models(planes, {.zigzag_residues = true});
  for (std::size_t i = 0; i < kBlockArea; ++i) {
    b.mu[i] = mu.models[i].mu;
    b.sigma_const[i] = mu.models[i].sigma.intercept;
    b.sigma_boundary[i] = boundary.models[i].sigma;
    b.sigma_zigzag[i] = zz.models[i].sigma;
  }
  const SigmaTrainingSet data = sigma_training_set(planes, mu);
  const BoundaryVector w = sigma_direction(data);
  b.vh = sigma_feature_model(SigmaMode::VH, data, w);
  b.vplush = sigma_feature_model(SigmaMode::VPlusH, data, w);
  b.honly = sigma_feature_model(SigmaMode::HOnly, data, w);
  shape(b);
  b.finalize();
  return b;
}

CodecModels fit_codec_models(std::span<const DctPlane> luma, std::span<const DctPlane> chroma) {
  CodecModels m{fit_model_bank(luma), fit_model_bank(chroma)};
  return deserialize_models(serialize_models(m));
}

std::vector<std::uint8_t> serialize_models(const CodecModels& models) {
  std::vector<std::uint8_t> out;
  const std::size_t n = bank_scalars();
  put_u32(out, kModelSchema);
  put_u32(out, kBankCount);
  put_u32(out, static_cast<std::uint32_t>(n));
  for (const ModelBank* src : {&models.luma, &models.chroma}) {
    ModelBank b = *src;
    shape(b);
    visit(b, [&](double& v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); });
  }
  return out;
}

CodecModels deserialize_models(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::uint32_t schema = get_u32(bytes, pos);
  if (schema != kModelSchema) throw ContainerError(ContainerError::Kind::Model, "unknown model schema " + std::to_string(schema));
  const std::uint32_t banks = get_u32(bytes, pos);
  const std::uint32_t n = get_u32(bytes, pos);
  if (banks != kBankCount || n != bank_scalars()) throw ContainerError(ContainerError::Kind::Model, "model section has the wrong shape");
  if (bytes.size() - pos != static_cast<std::size_t>(banks) * n * 4)
    throw ContainerError(ContainerError::Kind::Model, "model section size mismatch");
  CodecModels out;
  for (ModelBank* b : {&out.luma, &out.chroma}) {
    shape(*b);
    visit(*b, [&](double& v) { v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos))); });
    b->finalize();
  }
  return out;
}

std::string builtin_models_source(const CodecModels& models) {
  const std::vector<std::uint8_t> bytes = serialize_models(models);
  std::ostringstream s;
  s << "// Generated by `epq fit-models`.  Do not edit.\n\n#include <cstddef>\n#include <cstdint>\n\n"
    << "namespace epq::detail {\n\nextern const std::uint8_t kBuiltinModels[];\nextern const std::size_t kBuiltinModelsSize;\n\n"
    << "const std::uint8_t kBuiltinModels[] = {\n";
  char buf[8];
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i % 16 == 0) s << "   ";
    std::snprintf(buf, sizeof buf, " 0x%02x,", bytes[i]);
    s << buf;
    if (i % 16 == 15 || i + 1 == bytes.size()) s << '\n';
  }
  s << "};\nconst std::size_t kBuiltinModelsSize = " << bytes.size() << ";\n\n}  // namespace epq::detail\n";
  return s.str();
}

bool has_builtin_models() { return detail::kBuiltinModelsSize > 0; }

const CodecModels& builtin_models() {
  static const CodecModels models = [] {
    if (!has_builtin_models()) throw std::runtime_error("this build carries no trained models; run fit-models");
    return deserialize_models(std::span<const std::uint8_t>(detail::kBuiltinModels, detail::kBuiltinModelsSize));
  }();
  return models;
}

}  // namespace epq
