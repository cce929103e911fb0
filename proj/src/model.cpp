#include "wtalc/model.hpp"

#include <cmath>
#include <cstring>

#include "wtalc/binary_io.hpp"
#include "wtalc/errors.hpp"
#include "wtalc/kernels.hpp"

namespace wtalc {

namespace {
constexpr char kMagic[8] = {'W', 'T', 'A', 'L', 'C', 'P', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

void xavier_fill(Matrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w.flat()) v = dist(rng);
}
}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.fc_weight = Matrix(dims.hidden_dim, dims.input_dim());
  p.fc_bias.assign(dims.hidden_dim, 0.0);
  p.cls_weight = Matrix(dims.num_classes, dims.hidden_dim);
  p.cls_bias.assign(dims.num_classes, 0.0);
  return p;
}

std::array<std::span<double>, 4> ModelParams::blocks() {
  return {fc_weight.flat(), std::span<double>(fc_bias), cls_weight.flat(), std::span<double>(cls_bias)};
}

std::array<std::span<const double>, 4> ModelParams::blocks() const {
  return {fc_weight.flat(), std::span<const double>(fc_bias), cls_weight.flat(),
          std::span<const double>(cls_bias)};
}

ModelParams init_params(const ModelDims& dims, Rng& rng) {
  if (dims.feature_dim == 0 || dims.hidden_dim == 0 || dims.num_classes == 0) {
    throw DomainError("init_params: dimensions must be positive");
  }
  ModelParams p = ModelParams::zeros(dims);
  xavier_fill(p.fc_weight, rng);
  xavier_fill(p.cls_weight, rng);
  return p;
}

Sequence draw_dropout_mask(std::size_t hidden_dim, std::size_t length, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw DomainError("keep probability must lie in (0, 1]");
  }
  Sequence mask(hidden_dim, length, 1.0);
  if (keep_prob == 1.0) return mask;
  const double kept = 1.0 / keep_prob;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& m : mask.flat()) m = u(rng) < keep_prob ? kept : 0.0;
  return mask;
}

ForwardState forward_with_mask(const ModelParams& params, const Sequence& features, Sequence mask,
                               Mode mode) {
  const ModelDims& d = params.dims;
  if (features.dim() != d.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(features.dim()) + " rows, model expects " +
                     std::to_string(d.input_dim()));
  }
  if (features.length() == 0) throw ShapeError("forward: empty sequence");
  if (mask.dim() != d.hidden_dim || mask.length() != features.length()) {
    throw ShapeError("forward: dropout mask shape mismatch");
  }
  const auto& k = kernels::active();
  const std::size_t length = features.length();

  ForwardState st;
  st.mode = mode;
  st.relu = Sequence(d.hidden_dim, length);
  st.hidden = Sequence(d.hidden_dim, length);
  st.activations = Sequence(d.num_classes, length);
  for (std::size_t t = 0; t < length; ++t) {
    auto pre = st.relu.instant(t);
    k.matvec(params.fc_weight.data(), d.hidden_dim, d.input_dim(), features.instant(t).data(),
             params.fc_bias.data(), pre.data());
    auto hid = st.hidden.instant(t);
    auto m = mask.instant(t);
    for (std::size_t i = 0; i < d.hidden_dim; ++i) {
      pre[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      hid[i] = pre[i] * m[i];
    }
    k.matvec(params.cls_weight.data(), d.num_classes, d.hidden_dim, hid.data(), params.cls_bias.data(),
             st.activations.instant(t).data());
  }
  st.mask = std::move(mask);
  return st;
}

ForwardState forward(const ModelParams& params, const Sequence& features, double keep_prob, Mode mode,
                     Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw DomainError("keep probability must lie in (0, 1]");
  }
  for (double v : features.flat()) {
    if (!std::isfinite(v)) throw DomainError("forward: non-finite input feature");
  }
  const std::size_t length = features.length();
  Sequence mask = mode == Mode::kTrain ? draw_dropout_mask(params.dims.hidden_dim, length, keep_prob, rng)
                                       : Sequence(params.dims.hidden_dim, length, 1.0);
  return forward_with_mask(params, features, std::move(mask), mode);
}

// ---------------------------------------------------------------------------

void save_params(const std::filesystem::path& path, const ModelParams& params,
                 const LabelVocabulary& vocabulary) {
  if (vocabulary.size() != params.dims.num_classes) {
    throw ShapeError("save_params: " + std::to_string(params.dims.num_classes) + " classes but vocabulary has " +
                     std::to_string(vocabulary.size()) + " names");
  }
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof(kMagic)});
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(params.dims.feature_dim));
  w.u32(static_cast<std::uint32_t>(params.dims.hidden_dim));
  w.u32(static_cast<std::uint32_t>(params.dims.num_classes));
  w.u32(static_cast<std::uint32_t>(vocabulary.size()));
  for (const auto& name : vocabulary.names()) w.str(name);
  for (auto block : params.blocks()) {
    for (double v : block) w.f64(v);
  }
  io::write_file(path, w.buffer());
}

LoadedModel load_params(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  const std::string what = "parameter file '" + path.string() + "'";
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(what + ": bad magic");
  }
  io::ByteReader r(std::span<const std::uint8_t>(bytes).subspan(sizeof(kMagic)), what);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  ModelDims dims;
  dims.feature_dim = r.u32();
  dims.hidden_dim = r.u32();
  dims.num_classes = r.u32();
  const std::uint32_t vocab_size = r.u32();
  if (vocab_size != dims.num_classes) {
    throw FormatError(what + ": " + std::to_string(dims.num_classes) + " classes but vocabulary has " +
                      std::to_string(vocab_size) + " names");
  }
  if (dims.feature_dim == 0 || dims.hidden_dim == 0 || dims.num_classes == 0) {
    throw FormatError(what + ": zero dimension");
  }
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < vocab_size; ++i) names.push_back(r.str());

  LoadedModel out{ModelParams::zeros(dims), LabelVocabulary(std::move(names))};
  std::size_t expected = 0;
  for (auto block : out.params.blocks()) expected += block.size();
  if (r.remaining() != 8 * expected) {
    throw FormatError(what + ": expected " + std::to_string(8 * expected) + " bytes of weights, found " +
                      std::to_string(r.remaining()));
  }
  for (auto block : out.params.blocks()) {
    for (double& v : block) {
      v = r.f64();
      if (!std::isfinite(v)) throw FormatError(what + ": non-finite weight");
    }
  }
  return out;
}

}  // namespace wtalc
