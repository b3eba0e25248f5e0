#include <cmath>
#include <cstring>
#include <random>

#include "blobs.hpp"
#include "doctest.h"
#include "facepipe/classify.hpp"
#include "facepipe/pooling.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace facepipe;
using facepipe::testing::make_blobs;
using facepipe::testing::TempDir;

namespace {

double accuracy(const LinearModel& m, const EmbeddingMatrix& x, const std::vector<std::int64_t>& y) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (static_cast<std::int64_t>(svm_predict(m, x.row(i)).label) == y[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(x.rows());
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

EmbeddingMatrix constant_subject(std::size_t rows, std::vector<float> v) {
  EmbeddingMatrix m(v.size());
  for (std::size_t i = 0; i < rows; ++i) m.append_row(v);
  return m;
}

}  // namespace

TEST_CASE("linear SVM separates 6-sigma blobs") {
  const auto train = make_blobs(3, 100, 8, 6.0, 1);
  const auto test = make_blobs(3, 100, 8, 6.0, 2);
  const auto model = train_linear_svm(train.x, train.y);
  CHECK(model.classes == 3);
  CHECK(model.dim == 8);
  CHECK(accuracy(model, train.x, train.y) >= 99.0);
  CHECK(accuracy(model, test.x, test.y) >= 95.0);
  for (std::size_t c = 0; c < 3; ++c) CHECK(svm_predict(model, train.means.row(c)).label == c);
}

TEST_CASE("per-epoch objective ends no higher than it starts") {
  const auto train = make_blobs(3, 100, 8, 6.0, 3);
  const auto model = train_linear_svm(train.x, train.y, {.epochs = 20});
  for (const auto& h : model.objective_history) {
    REQUIRE(h.size() == 20);
    CHECK(h.back() <= h.front());
  }
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto train = make_blobs(4, 40, 6, 5.0, 4);
  const auto a = train_linear_svm(train.x, train.y, {.seed = 9, .threads = 1});
  const auto b = train_linear_svm(train.x, train.y, {.seed = 9, .threads = 1});
  const auto c = train_linear_svm(train.x, train.y, {.seed = 9, .threads = 4});
  CHECK(same_bits(a.weights, b.weights));
  CHECK(same_bits(a.biases, b.biases));
  CHECK(same_bits(a.weights, c.weights));
  CHECK(same_bits(a.biases, c.biases));
  const auto d = train_linear_svm(train.x, train.y, {.seed = 10});
  CHECK_FALSE(same_bits(a.weights, d.weights));
}

TEST_CASE("scaled descriptors with rescaled lambda stay separable") {
  const auto train = make_blobs(3, 100, 8, 6.0, 5);
  for (float c : {0.1f, 4.0f}) {
    EmbeddingMatrix scaled = train.x;
    for (auto& v : scaled.data()) v *= c;
    const auto m = train_linear_svm(scaled, train.y, {.lambda = 1e-4 * c * c});
    CHECK(accuracy(m, scaled, train.y) >= 99.0);
  }
}

TEST_CASE("train_linear_svm errors") {
  EmbeddingMatrix x(2, 4);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<std::int64_t>{1, 1, 1, 1}), DegenerateLabelsError);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<std::int64_t>{0, 1, 1}), ShapeError);
  CHECK_THROWS_AS(train_linear_svm(EmbeddingMatrix(2, 1), std::vector<std::int64_t>{0}), DegenerateLabelsError);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<std::int64_t>{0, 1, 0, 1}, {.lambda = 0}), ParamError);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<std::int64_t>{0, -1, 0, 1}), ParamError);
}

TEST_CASE("svm_predict decisions") {
  LinearModel m;
  m.classes = 2;
  m.dim = 3;
  m.weights.assign(6, 0.0f);
  m.biases = {0.1f, 0.2f};
  CHECK(svm_predict(m, std::vector<float>{1, 2, 3}).label == 1);
  m.biases = {0, 0};
  const auto p = svm_predict(m, std::vector<float>{1, 2, 3});
  CHECK(p.label == 0);
  CHECK(p.scores == std::vector<double>{0, 0});
  CHECK_THROWS_AS(svm_predict(m, std::vector<float>{1, 2}), ShapeError);
}

TEST_CASE("hinge subgradient matches finite differences away from the kink") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + trial % 10;
    std::vector<double> w(d + 1);
    std::vector<float> x(d);
    for (auto& v : w) v = n(rng);
    for (auto& v : x) v = static_cast<float>(n(rng));
    const int y = trial % 2 == 0 ? 1 : -1;
    const double lambda = 0.01 * (1 + trial % 5);
    double f = w.back();
    for (std::size_t i = 0; i < d; ++i) f += w[i] * x[i];
    if (std::abs(y * f - 1.0) < 1e-2) continue;
    const auto g = svm_sample_subgradient(w, x, y, lambda);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& ww) { return svm_sample_objective(ww, x, y, lambda); }, w, 1e-6);
    double err = 0, norm = 0;
    for (std::size_t i = 0; i <= d; ++i) {
      err += (g[i] - fd[i]) * (g[i] - fd[i]);
      norm += fd[i] * fd[i];
    }
    CHECK(std::sqrt(err) / std::max(std::sqrt(norm), 1e-12) < 1e-4);
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("LSVM serialization") {
  TempDir tmp;
  const auto train = make_blobs(3, 20, 5, 6.0, 6);
  const auto model = train_linear_svm(train.x, train.y);
  write_linear_model(model, tmp / "m.lsvm");
  CHECK(std::filesystem::file_size(tmp / "m.lsvm") == 12 + 4 * (3 * 5 + 3));
  const auto back = read_linear_model(tmp / "m.lsvm");
  CHECK(back.classes == 3);
  CHECK(back.dim == 5);
  CHECK(same_bits(back.weights, model.weights));
  CHECK(same_bits(back.biases, model.biases));

  const auto bytes = testing::file_bytes(tmp / "m.lsvm");
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "LSVM");
  CHECK(bytes[4] == 3);
  CHECK(bytes[8] == 5);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_linear_model(truncated), TruncationError);
  auto wrong = bytes;
  wrong[0] = 'X';
  CHECK_THROWS_AS(decode_linear_model(wrong), FormatError);
}

TEST_CASE("knn_predict") {
  EmbeddingMatrix train(2, std::vector<float>{0, 0, 1, 0, 0, 1, 5, 5, 6, 5});
  const std::vector<std::int64_t> y = {0, 0, 1, 1, 1};
  SUBCASE("exact lookup with k = 1") {
    for (std::size_t i = 0; i < train.rows(); ++i) CHECK(knn_predict(train, y, train.row(i), 1) == y[i]);
  }
  SUBCASE("majority of three") {
    // Nearest three to (0.4, 0.1): rows 0 (0), 1 (0), 2 (1).
    CHECK(knn_predict(train, y, std::vector<float>{0.4f, 0.1f}, 3) == 0);
  }
  SUBCASE("full tie goes to the lowest label") {
    EmbeddingMatrix bal(1, std::vector<float>{0, 1, 2, 3});
    CHECK(knn_predict(bal, std::vector<std::int64_t>{1, 0, 1, 0}, std::vector<float>{1.5f}, 4) == 0);
  }
  SUBCASE("distance ties use the lower training index") {
    EmbeddingMatrix two(1, std::vector<float>{-1, 1});
    CHECK(knn_predict(two, std::vector<std::int64_t>{5, 3}, std::vector<float>{0}, 1) == 5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(knn_predict(train, y, std::vector<float>{0, 0}, 6), ParamError);
    CHECK_THROWS_AS(knn_predict(train, y, std::vector<float>{0, 0}, 0), ParamError);
    CHECK_THROWS_AS(knn_predict(train, y, std::vector<float>{0}, 1), ShapeError);
  }
}

TEST_CASE("rank-1 identification") {
  SUBCASE("perfectly separable subjects") {
    std::vector<EmbeddingMatrix> subjects;
    for (std::size_t s = 0; s < 6; ++s) {
      std::vector<float> v(6, 0.0f);
      v[s] = 1.0f;
      subjects.push_back(constant_subject(2 + s, v));
    }
    const auto r = rank1_identification(subjects, {.repetitions = 10});
    CHECK(r.accuracy == 100.0);
    REQUIRE(r.mean_std);
    CHECK(r.mean_std->std == 0.0);
    CHECK(r.n == (2 + 3 + 4 + 5 + 6 + 7) - 6);
  }
  SUBCASE("probing with the gallery itself is a perfect self-match") {
    std::mt19937_64 rng(3);
    std::vector<EmbeddingMatrix> subjects;
    for (std::size_t s = 0; s < 5; ++s) subjects.push_back(testing::random_matrix(rng, 2 + s, 16));
    const auto r = rank1_identification(subjects, {.repetitions = 3, .probe_with_gallery = true});
    CHECK(r.accuracy == 100.0);
    CHECK(r.n == 5);
  }
  SUBCASE("single repetition has zero std") {
    std::mt19937_64 rng(4);
    std::vector<EmbeddingMatrix> subjects;
    for (int s = 0; s < 4; ++s) subjects.push_back(testing::random_matrix(rng, 5, 8));
    const auto r = rank1_identification(subjects, {.repetitions = 1});
    CHECK(r.mean_std->std == 0.0);
  }
  SUBCASE("random embeddings sit at chance level") {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<EmbeddingMatrix> subjects;
    for (int s = 0; s < 10; ++s) {
      EmbeddingMatrix m(32);
      for (int i = 0; i < 10; ++i) {
        std::vector<float> v(32);
        for (auto& x : v) x = n(rng);
        m.append_row(l2_normalize(v));
      }
      subjects.push_back(std::move(m));
    }
    const auto r = rank1_identification(subjects, {.repetitions = 100, .seed = 7});
    CHECK(std::abs(r.accuracy - 10.0) <= 5.0);
  }
  SUBCASE("deterministic under seed and thread count") {
    std::mt19937_64 rng(6);
    std::vector<EmbeddingMatrix> subjects;
    for (int s = 0; s < 8; ++s) subjects.push_back(testing::random_matrix(rng, 4, 8));
    const auto a = rank1_identification(subjects, {.repetitions = 20, .seed = 1, .threads = 1});
    const auto b = rank1_identification(subjects, {.repetitions = 20, .seed = 1, .threads = 3});
    CHECK(a.mean_std->mean == b.mean_std->mean);
    CHECK(a.mean_std->std == b.mean_std->std);
  }
  SUBCASE("errors") {
    std::vector<EmbeddingMatrix> one = {EmbeddingMatrix(2, 3)};
    CHECK_THROWS_AS(rank1_identification(one), ProtocolError);
    std::vector<EmbeddingMatrix> thin = {EmbeddingMatrix(2, 3), EmbeddingMatrix(2, 1)};
    CHECK_THROWS_AS(rank1_identification(thin), ProtocolError);
    std::vector<EmbeddingMatrix> ok = {EmbeddingMatrix(2, 3), EmbeddingMatrix(2, 2)};
    CHECK_THROWS_AS(rank1_identification(ok, {.repetitions = 0}), ParamError);
  }
}

TEST_CASE("group_by_subject keeps first-appearance order") {
  EmbeddingMatrix e(1, std::vector<float>{1, 2, 3, 4, 5});
  const auto g = group_by_subject(e, std::vector<std::int64_t>{7, 3, 7, 3, 9});
  REQUIRE(g.size() == 3);
  CHECK(g[0].data()[0] == 1);
  CHECK(g[0].data()[1] == 3);
  CHECK(g[1].rows() == 2);
  CHECK(g[2].rows() == 1);
  CHECK_THROWS_AS(group_by_subject(e, std::vector<std::int64_t>{1}), ShapeError);
}
