#include <fstream>
#include <set>

#include "doctest.h"
#include "test_helpers.hpp"
#include "wtalc/data.hpp"
#include "wtalc/errors.hpp"

using namespace wtalc;
namespace fs = std::filesystem;
using wtalc::testing::random_sequence;
using wtalc::testing::scratch_dir;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

Sequence filled(std::size_t dim, std::size_t length, double value) { return Sequence(dim, length, value); }

// A dataset held in memory with the given label sets and clip lengths.
Dataset make_dataset(const std::vector<LabelSet>& labels, std::size_t num_classes, std::size_t length = 6) {
  Dataset d;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) names.push_back("c" + std::to_string(c));
  d.index.vocabulary = LabelVocabulary(names);
  Rng rng(3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    VideoRecord r;
    r.id = "v" + std::to_string(i);
    r.labels = labels[i];
    r.feature_dim = 2;
    r.length = length;
    r.duration_seconds = static_cast<double>(length);
    d.index.records.push_back(r);
    d.features.push_back(random_sequence(4, length, rng));
  }
  return d;
}

}  // namespace

TEST_CASE("feature files round-trip through float32") {
  const fs::path dir = scratch_dir("data_roundtrip");
  Rng rng(1);
  Sequence s = random_sequence(3, 7, rng);
  write_feature_file(dir / "a.bin", s);
  const Sequence back = read_feature_file(dir / "a.bin");
  REQUIRE(back.dim() == 3);
  REQUIRE(back.length() == 7);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(back.flat()[i] == static_cast<double>(static_cast<float>(s.flat()[i])));
  CHECK(fs::file_size(dir / "a.bin") == 8 + 4 * 21);
  const FeatureHeader h = read_feature_header(dir / "a.bin");
  CHECK(h.feature_dim == 3);
  CHECK(h.length == 7);
}

TEST_CASE("a truncated feature file is rejected") {
  const fs::path dir = scratch_dir("data_truncated");
  write_feature_file(dir / "a.bin", filled(2, 5, 1.0));
  fs::resize_file(dir / "a.bin", 8 + 4 * 9);
  CHECK_THROWS_AS(read_feature_file(dir / "a.bin"), ShapeError);
  CHECK_THROWS_AS(read_feature_header(dir / "a.bin"), ShapeError);
  CHECK_THROWS_AS(read_feature_file(dir / "missing.bin"), FormatError);
}

TEST_CASE("manifest vocabulary is the sorted union of label names") {
  const fs::path dir = scratch_dir("data_manifest");
  for (const char* id : {"a", "b"}) {
    write_feature_file(dir / (std::string(id) + "_rgb.bin"), filled(4, 5, 1.0));
    write_feature_file(dir / (std::string(id) + "_flow.bin"), filled(4, 5, 0.0));
  }
  write_text(dir / "m.txt",
             "# id rgb flow labels stride duration\n"
             "a a_rgb.bin a_flow.bin run 1.0 5.0\n"
             "\n"
             "b b_rgb.bin b_flow.bin run,jump 0.5 2.5 test\n");
  const DatasetIndex idx = load_manifest(dir / "m.txt", dir);
  REQUIRE(idx.size() == 2);
  REQUIRE(idx.vocabulary.size() == 2);
  CHECK(idx.vocabulary.name(0) == "jump");
  CHECK(idx.vocabulary.name(1) == "run");
  CHECK(idx.records[0].labels == LabelSet{1});
  CHECK(idx.records[1].labels == LabelSet{0, 1});
  CHECK(idx.records[0].length == 5);
  CHECK(idx.records[0].feature_dim == 4);
  CHECK(idx.records[1].feature_stride_seconds == 0.5);
  CHECK(idx.records[1].split == Split::kTest);
  CHECK(idx.filter(Split::kTrain).size() == 1);
  CHECK(idx.filter(Split::kTest).records[0].id == "b");

  const Sequence x = concat_streams(load_features(idx.records[0]));
  CHECK(x.dim() == 8);
  CHECK(x.length() == 5);
}

TEST_CASE("manifest errors") {
  const fs::path dir = scratch_dir("data_manifest_errors");
  write_feature_file(dir / "r5.bin", filled(4, 5, 1.0));
  write_feature_file(dir / "f5.bin", filled(4, 5, 1.0));
  write_feature_file(dir / "f4.bin", filled(4, 4, 1.0));
  write_feature_file(dir / "g5.bin", filled(3, 5, 1.0));

  SUBCASE("rgb 5 instants, flow 4 instants") {
    write_text(dir / "m.txt", "a r5.bin f4.bin run 1 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), ShapeError);
  }
  SUBCASE("streams with different feature dimensions") {
    write_text(dir / "m.txt", "a r5.bin g5.bin run 1 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), ShapeError);
  }
  SUBCASE("missing feature file") {
    write_text(dir / "m.txt", "a r5.bin nope.bin run 1 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
  SUBCASE("missing manifest") { CHECK_THROWS_AS(load_manifest(dir / "none.txt", dir), FormatError); }
  SUBCASE("too few fields") {
    write_text(dir / "m.txt", "a r5.bin f5.bin run 1\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
  SUBCASE("non-numeric stride") {
    write_text(dir / "m.txt", "a r5.bin f5.bin run fast 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
  SUBCASE("non-positive stride") {
    write_text(dir / "m.txt", "a r5.bin f5.bin run 0 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
  SUBCASE("duplicate id") {
    write_text(dir / "m.txt", "a r5.bin f5.bin run 1 5\na r5.bin f5.bin run 1 5\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
  SUBCASE("bad split") {
    write_text(dir / "m.txt", "a r5.bin f5.bin run 1 5 val\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.txt", dir), FormatError);
  }
}

TEST_CASE("vocabulary validation") {
  CHECK_THROWS_AS(LabelVocabulary({"a", "a"}), DomainError);
  CHECK_THROWS_AS(LabelVocabulary({""}), DomainError);
  const LabelVocabulary v({"x", "y"});
  CHECK(v.index_of("y") == 1);
  CHECK_FALSE(v.find("z").has_value());
  CHECK_THROWS_AS(v.index_of("z"), FormatError);
}

TEST_CASE("concat_streams stacks rgb above flow") {
  VideoFeatures f{filled(2, 3, 1.0), filled(2, 3, 0.0)};
  const Sequence x = concat_streams(f);
  REQUIRE(x.dim() == 4);
  REQUIRE(x.length() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(x(0, t) == 1.0);
    CHECK(x(1, t) == 1.0);
    CHECK(x(2, t) == 0.0);
    CHECK(x(3, t) == 0.0);
  }

  Rng rng(2);
  VideoFeatures g{random_sequence(3, 1, rng), random_sequence(3, 1, rng)};
  const Sequence y = concat_streams(g);
  CHECK(y.dim() == 6);
  CHECK(y.length() == 1);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(y(r, 0) == g.rgb(r, 0));
    CHECK(y(3 + r, 0) == g.flow(r, 0));
  }
  CHECK_THROWS_AS(concat_streams(VideoFeatures{filled(2, 3, 0.0), filled(2, 4, 0.0)}), ShapeError);
}

TEST_CASE("clip cap in instants") {
  CHECK(clip_instants(320.0, 1.0) == 320);
  CHECK(clip_instants(320.0, 0.3) == 1066);
  CHECK(clip_instants(0.5, 1.0) == 1);
  CHECK_THROWS_AS(clip_instants(320.0, 0.0), DomainError);
}

TEST_CASE("sample_clip") {
  Rng rng(5);
  const LabelSet labels{0, 2};

  SUBCASE("under the cap is the identity") {
    const Sequence x = random_sequence(4, 5, rng);
    const Clip c = sample_clip(x, labels, 10, rng);
    CHECK(c.features == x);
    CHECK(c.labels == labels);
    CHECK(c.start == 0);
  }
  SUBCASE("over the cap is a contiguous slice with the full label set") {
    const Sequence x = random_sequence(4, 100, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const Clip c = sample_clip(x, labels, 40, rng);
      REQUIRE(c.features.length() == 40);
      REQUIRE(c.features.dim() == 4);
      REQUIRE(c.start <= 60);
      CHECK(c.features == x.slice(c.start, 40));
      CHECK(c.labels == labels);
    }
  }
  SUBCASE("l = 41, cap 40: both starts occur and a seed fixes the draw") {
    const Sequence x = random_sequence(2, 41, rng);
    std::set<std::size_t> starts;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
      Rng a(seed), b(seed);
      const Clip ca = sample_clip(x, labels, 40, a);
      const Clip cb = sample_clip(x, labels, 40, b);
      CHECK(ca.start == cb.start);
      CHECK(ca.features == cb.features);
      CHECK(ca.start <= 1);
      starts.insert(ca.start);
    }
    CHECK(starts == std::set<std::size_t>{0, 1});
  }
  SUBCASE("zero cap") { CHECK_THROWS_AS(sample_clip(random_sequence(2, 3, rng), labels, 0, rng), DomainError); }
}

TEST_CASE("build_batch pairing") {
  BatchSpec spec;  // 10 items, 3 pairs

  SUBCASE("mixed dataset meets the minimum pair count") {
    std::vector<LabelSet> labels;
    for (std::size_t i = 0; i < 30; ++i) labels.push_back({i % 6});
    const Dataset d = make_dataset(labels, 6);
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const Batch b = build_batch(d, spec, rng);
      REQUIRE(b.items.size() == 10);
      CHECK(b.pair_count >= 3);
      CHECK(b.pair_count == count_shared_pairs(b.items));
      std::set<std::size_t> videos;
      for (const BatchItem& item : b.items) videos.insert(item.video);
      CHECK(videos.size() == 10);
    }
  }
  SUBCASE("one shared category pairs everything") {
    const Dataset d = make_dataset(std::vector<LabelSet>(12, LabelSet{0}), 1);
    Rng rng(1);
    CHECK(build_batch(d, spec, rng).pair_count == 45);
  }
  SUBCASE("clips respect the length cap") {
    std::vector<LabelSet> labels(12, LabelSet{0});
    const Dataset d = make_dataset(labels, 1, 50);
    Rng rng(1);
    BatchSpec short_clips = spec;
    short_clips.clip_seconds = 20.0;  // stride 1 s in make_dataset records
    for (const BatchItem& item : build_batch(d, short_clips, rng).items) CHECK(item.clip.features.length() == 20);
  }
  SUBCASE("a fixed seed reproduces the batch") {
    std::vector<LabelSet> labels;
    for (std::size_t i = 0; i < 20; ++i) labels.push_back({i % 4, (i + 1) % 4});
    const Dataset d = make_dataset(labels, 4);
    Rng a(77), b(77);
    const Batch ba = build_batch(d, spec, a);
    const Batch bb = build_batch(d, spec, b);
    REQUIRE(ba.items.size() == bb.items.size());
    for (std::size_t i = 0; i < ba.items.size(); ++i) {
      CHECK(ba.items[i].video == bb.items[i].video);
      CHECK(ba.items[i].clip.features == bb.items[i].clip.features);
    }
  }
  SUBCASE("singleton categories cannot be paired") {
    std::vector<LabelSet> labels;
    for (std::size_t i = 0; i < 10; ++i) labels.push_back({i});
    const Dataset d = make_dataset(labels, 10);
    Rng rng(1);
    CHECK_THROWS_AS(build_batch(d, spec, rng), DegenerateDatasetError);
  }
}
