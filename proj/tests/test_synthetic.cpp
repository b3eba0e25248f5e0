#include "doctest.h"
#include "facepipe/pooling.hpp"
#include "facepipe/synthetic.hpp"
#include "test_support.hpp"

using namespace facepipe;
using facepipe::testing::TempDir;

TEST_CASE("synthetic dataset loads through the manifest reader") {
  TempDir tmp;
  synthetic::SyntheticSpec spec;
  spec.classes = 4;
  spec.videos_per_class = 25;
  spec.max_faces = 3;
  spec.faceless_fraction = 0.1;
  spec.empty_frame_prob = 0.3;
  const auto ds = synthetic::generate_dataset(spec, tmp / "ds");
  CHECK(ds.videos == 100);
  CHECK(ds.faceless_videos == 10);

  EmbeddingStore store(ds.manifest.parent_path());
  const auto samples = load_manifest(ds.manifest, store);
  REQUIRE(samples.size() == 100);
  std::size_t faceless = 0;
  for (const auto& s : samples) {
    CHECK(s.frames.size() == spec.frames_per_video);
    CHECK(s.label >= 0);
    CHECK(s.label < 4);
    if (!s.has_faces()) ++faceless;
    for (const auto& f : s.frames) CHECK(f.size() <= 3);
  }
  CHECK(faceless == 10);
  CHECK(store.dim() == spec.dim);
  CHECK(read_label_file(ds.labels).size() == 100);
}

TEST_CASE("synthetic output is byte-identical for a fixed seed") {
  TempDir tmp;
  synthetic::SyntheticSpec spec;
  spec.faceless_fraction = 0.2;
  const auto a = synthetic::generate_dataset(spec, tmp / "a");
  const auto b = synthetic::generate_dataset(spec, tmp / "b");
  CHECK(testing::file_bytes(a.manifest) == testing::file_bytes(b.manifest));
  CHECK(testing::file_bytes(a.embeddings) == testing::file_bytes(b.embeddings));
  spec.seed = 43;
  const auto c = synthetic::generate_dataset(spec, tmp / "c");
  CHECK(testing::file_bytes(a.embeddings) != testing::file_bytes(c.embeddings));
}

TEST_CASE("synthetic spec validation") {
  TempDir tmp;
  synthetic::SyntheticSpec spec;
  spec.dim = 2;
  spec.classes = 3;
  CHECK_THROWS_AS(synthetic::generate_dataset(spec, tmp / "x"), ParamError);
  spec = {};
  spec.faceless_fraction = 1.0;
  CHECK_THROWS_AS(synthetic::generate_dataset(spec, tmp / "x"), ParamError);
  spec = {};
  spec.min_faces = 2;
  spec.max_faces = 1;
  CHECK_THROWS_AS(synthetic::generate_dataset(spec, tmp / "x"), ParamError);
}
