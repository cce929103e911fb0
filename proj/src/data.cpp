#include "wtalc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "wtalc/binary_io.hpp"
#include "wtalc/errors.hpp"

namespace wtalc {
namespace fs = std::filesystem;

LabelVocabulary::LabelVocabulary(std::vector<std::string> categories)
    : categories_(std::move(categories)) {
  std::set<std::string> seen;
  for (const auto& name : categories_) {
    if (name.empty()) throw DomainError("empty category name");
    if (!seen.insert(name).second) throw DomainError("duplicate category name '" + name + "'");
  }
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& name) const {
  auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories_.begin());
}

std::size_t LabelVocabulary::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  throw FormatError("unknown category '" + name + "'");
}

DatasetIndex DatasetIndex::filter(Split split) const {
  DatasetIndex out;
  out.vocabulary = vocabulary;
  for (const auto& r : records) {
    if (r.split == split) out.records.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature files

void write_feature_file(const fs::path& path, const Sequence& features) {
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(features.dim()));
  w.u32(static_cast<std::uint32_t>(features.length()));
  for (double v : features.flat()) w.f32(static_cast<float>(v));
  io::write_file(path, w.buffer());
}

FeatureHeader read_feature_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open feature file '" + path.string() + "'");
  std::uint8_t raw[8];
  in.read(reinterpret_cast<char*>(raw), 8);
  if (in.gcount() != 8) throw FormatError("feature file '" + path.string() + "': truncated header");
  io::ByteReader r(raw, path.string());
  FeatureHeader h;
  h.feature_dim = r.u32();
  h.length = r.u32();
  if (h.feature_dim == 0 || h.length == 0) {
    throw FormatError("feature file '" + path.string() + "': zero dimension in header");
  }
  const auto expected = 8 + 4 * static_cast<std::uintmax_t>(h.feature_dim) * h.length;
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    throw ShapeError("feature file '" + path.string() + "': header declares " +
                     std::to_string(h.feature_dim) + "x" + std::to_string(h.length) + " (" +
                     std::to_string(expected) + " bytes) but file has " + std::to_string(actual) +
                     " bytes");
  }
  return h;
}

Sequence read_feature_file(const fs::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, "feature file '" + path.string() + "'");
  const std::size_t dim = r.u32();
  const std::size_t length = r.u32();
  if (dim == 0 || length == 0) {
    throw FormatError("feature file '" + path.string() + "': zero dimension in header");
  }
  if (r.remaining() != 4 * dim * length) {
    throw ShapeError("feature file '" + path.string() + "': header declares " +
                     std::to_string(dim) + "x" + std::to_string(length) + " but payload has " +
                     std::to_string(r.remaining()) + " bytes");
  }
  Sequence out(dim, length);
  for (double& v : out.flat()) {
    v = r.f32();
    if (!std::isfinite(v)) throw FormatError("feature file '" + path.string() + "': non-finite value");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

double parse_number(const std::string& token, const std::string& where) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw FormatError(where + ": expected a number, got '" + token + "'");
  }
  return value;
}

std::vector<std::string> split_labels(const std::string& field) {
  std::vector<std::string> out;
  if (field == "-") return out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct ManifestLine {
  std::string id, rgb, flow;
  std::vector<std::string> labels;
  double stride = 0.0, duration = 0.0;
  Split split = Split::kTrain;
};

}  // namespace

DatasetIndex load_manifest(const fs::path& manifest_path, const fs::path& features_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open manifest '" + manifest_path.string() + "'");

  std::vector<ManifestLine> lines;
  std::set<std::string> names;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);

    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.size() != 6 && tok.size() != 7) {
      throw FormatError(where + ": expected 6 or 7 fields, got " + std::to_string(tok.size()));
    }
    ManifestLine m;
    m.id = tok[0];
    m.rgb = tok[1];
    m.flow = tok[2];
    m.labels = split_labels(tok[3]);
    m.stride = parse_number(tok[4], where);
    m.duration = parse_number(tok[5], where);
    if (tok.size() == 7) {
      if (tok[6] == "train") {
        m.split = Split::kTrain;
      } else if (tok[6] == "test") {
        m.split = Split::kTest;
      } else {
        throw FormatError(where + ": split must be 'train' or 'test', got '" + tok[6] + "'");
      }
    }
    if (m.stride <= 0.0) throw FormatError(where + ": feature stride must be positive");
    if (m.duration <= 0.0) throw FormatError(where + ": duration must be positive");
    if (!ids.insert(m.id).second) throw FormatError(where + ": duplicate video id '" + m.id + "'");
    names.insert(m.labels.begin(), m.labels.end());
    lines.push_back(std::move(m));
  }

  DatasetIndex index;
  index.vocabulary = LabelVocabulary(std::vector<std::string>(names.begin(), names.end()));
  for (auto& m : lines) {
    VideoRecord r;
    r.id = m.id;
    r.rgb_path = features_dir / m.rgb;
    r.flow_path = features_dir / m.flow;
    for (const auto& name : m.labels) r.labels.push_back(index.vocabulary.index_of(name));
    std::sort(r.labels.begin(), r.labels.end());
    r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
    r.feature_stride_seconds = m.stride;
    r.duration_seconds = m.duration;
    r.split = m.split;

    const FeatureHeader rgb = read_feature_header(r.rgb_path);
    const FeatureHeader flow = read_feature_header(r.flow_path);
    if (rgb.feature_dim != flow.feature_dim || rgb.length != flow.length) {
      throw ShapeError("video '" + r.id + "': rgb is " + std::to_string(rgb.feature_dim) + "x" +
                       std::to_string(rgb.length) + " but flow is " +
                       std::to_string(flow.feature_dim) + "x" + std::to_string(flow.length));
    }
    r.feature_dim = rgb.feature_dim;
    r.length = rgb.length;
    index.records.push_back(std::move(r));
  }
  return index;
}

VideoFeatures load_features(const VideoRecord& record) {
  VideoFeatures f{read_feature_file(record.rgb_path), read_feature_file(record.flow_path)};
  if (f.rgb.dim() != f.flow.dim() || f.rgb.length() != f.flow.length()) {
    throw ShapeError("video '" + record.id + "': rgb and flow shapes differ");
  }
  return f;
}

Sequence concat_streams(const VideoFeatures& features) {
  const Sequence& rgb = features.rgb;
  const Sequence& flow = features.flow;
  if (rgb.dim() != flow.dim() || rgb.length() != flow.length()) {
    throw ShapeError("concat_streams: rgb and flow shapes differ");
  }
  const std::size_t f = rgb.dim();
  Sequence out(2 * f, rgb.length());
  for (std::size_t t = 0; t < rgb.length(); ++t) {
    auto dst = out.instant(t);
    std::ranges::copy(rgb.instant(t), dst.begin());
    std::ranges::copy(flow.instant(t), dst.begin() + static_cast<std::ptrdiff_t>(f));
  }
  return out;
}

Dataset load_dataset(DatasetIndex index) {
  Dataset ds;
  ds.features.reserve(index.records.size());
  for (const auto& r : index.records) {
    ds.features.push_back(concat_streams(load_features(r)));
    if (ds.features.back().dim() != ds.features.front().dim()) {
      throw ShapeError("video '" + r.id + "' has feature dimension " +
                       std::to_string(ds.features.back().dim() / 2) + ", expected " +
                       std::to_string(ds.features.front().dim() / 2));
    }
  }
  ds.index = std::move(index);
  return ds;
}

// ---------------------------------------------------------------------------
// Sampling

std::size_t clip_instants(double clip_seconds, double stride_seconds) {
  if (!(stride_seconds > 0.0)) throw DomainError("feature stride must be positive");
  if (!(clip_seconds > 0.0)) throw DomainError("clip length must be positive");
  const double n = std::floor(clip_seconds / stride_seconds);
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

Clip sample_clip(const Sequence& features, const LabelSet& labels, std::size_t max_length, Rng& rng) {
  if (max_length == 0) throw DomainError("sample_clip: clip cap must be at least 1 instant");
  if (features.length() <= max_length) return {features, labels, 0};
  std::uniform_int_distribution<std::size_t> start_dist(0, features.length() - max_length);
  const std::size_t start = start_dist(rng);
  return {features.slice(start, max_length), labels, start};
}

std::size_t count_shared_pairs(const std::vector<BatchItem>& items) {
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < items.size(); ++a) {
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      const auto& la = items[a].clip.labels;
      const auto& lb = items[b].clip.labels;
      auto ia = la.begin();
      auto ib = lb.begin();
      bool shared = false;
      while (ia != la.end() && ib != lb.end() && !shared) {
        if (*ia == *ib) {
          shared = true;
        } else if (*ia < *ib) {
          ++ia;
        } else {
          ++ib;
        }
      }
      pairs += shared ? 1 : 0;
    }
  }
  return pairs;
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

}  // namespace

Batch build_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng) {
  if (spec.batch_size == 0) throw DomainError("build_batch: batch size must be positive");
  if (spec.batch_size < 2 * spec.min_pairs) {
    throw DomainError("build_batch: batch size " + std::to_string(spec.batch_size) +
                      " cannot hold " + std::to_string(spec.min_pairs) + " disjoint pairs");
  }
  const auto& records = dataset.index.records;
  if (records.empty()) throw DegenerateDatasetError("build_batch: empty dataset");
  const std::size_t n_classes = dataset.index.vocabulary.size();

  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t v = 0; v < records.size(); ++v) {
    for (std::size_t c : records[v].labels) members[c].push_back(v);
  }
  std::vector<std::size_t> pairable;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (members[c].size() >= 2) pairable.push_back(c);
  }
  if (spec.min_pairs > 0 && pairable.empty()) {
    throw DegenerateDatasetError("no category has two or more videos; same-class pairs are impossible");
  }

  std::vector<bool> used(records.size(), false);
  std::vector<std::size_t> chosen;
  chosen.reserve(spec.batch_size);

  for (std::size_t p = 0; p < spec.min_pairs; ++p) {
    std::vector<std::size_t> open;
    for (std::size_t c : pairable) {
      const auto free = std::ranges::count_if(members[c], [&](std::size_t v) { return !used[v]; });
      if (free >= 2) open.push_back(c);
    }
    const bool allow_reuse = open.empty();
    const std::size_t category = pick(allow_reuse ? pairable : open, rng);
    std::vector<std::size_t> candidates;
    for (std::size_t v : members[category]) {
      if (allow_reuse || !used[v]) candidates.push_back(v);
    }
    std::uniform_int_distribution<std::size_t> first_dist(0, candidates.size() - 1);
    const std::size_t first = first_dist(rng);
    std::uniform_int_distribution<std::size_t> second_dist(0, candidates.size() - 2);
    std::size_t second = second_dist(rng);
    if (second >= first) ++second;
    for (std::size_t v : {candidates[first], candidates[second]}) {
      used[v] = true;
      chosen.push_back(v);
    }
  }

  while (chosen.size() < spec.batch_size) {
    std::vector<std::size_t> pool;
    for (std::size_t v = 0; v < records.size(); ++v) {
      if (!used[v]) pool.push_back(v);
    }
    if (pool.empty()) {
      pool.resize(records.size());
      for (std::size_t v = 0; v < records.size(); ++v) pool[v] = v;
    }
    const std::size_t v = pick(pool, rng);
    used[v] = true;
    chosen.push_back(v);
  }

  Batch batch;
  batch.items.reserve(chosen.size());
  for (std::size_t v : chosen) {
    const auto cap = clip_instants(spec.clip_seconds, records[v].feature_stride_seconds);
    batch.items.push_back({v, sample_clip(dataset.features[v], records[v].labels, cap, rng)});
  }
  batch.pair_count = count_shared_pairs(batch.items);
  return batch;
}

}  // namespace wtalc
