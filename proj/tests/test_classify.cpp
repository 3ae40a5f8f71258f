#include "cfv/classify.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace cfv;
using namespace cfv::classify;

TEST_CASE("two opposite classes are learned perfectly") {
  Matrix s(20, 2);
  std::vector<int> y(20);
  for (Index i = 0; i < 20; ++i) {
    s.row(i) << (i % 2 ? -1.0 : 1.0), 0.0;
    y[std::size_t(i)] = int(i % 2);
  }
  const LinearTrainResult r = train_linear(s, y);
  const Metrics m = evaluate(r.model, s, y);
  CHECK(m.accuracy == 1.0);
  CHECK(r.objective_trace.back() <= r.objective_trace.front());
  CHECK(r.model.class_ids == std::vector<int>{0, 1});
}

TEST_CASE("zero learning rate keeps the zero initialization") {
  const Matrix s = test::random_matrix(10, 3, 1);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  LinearTrainConfig cfg;
  cfg.lr = 0.0;
  const LinearTrainResult r = train_linear(s, y, cfg);
  CHECK(r.model.weights.isZero(0.0));
  CHECK(r.model.bias.isZero(0.0));
}

TEST_CASE("one-vs-rest gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LinearModel m{test::random_matrix(3, 4, seed), test::random_vector(3, seed + 1), {2, 5, 9}};
    const Matrix s = test::random_matrix(4, 4, seed + 2);
    const std::vector<int> y = {5, 9, 2, 5};
    LinearModel g;
    ovr_objective(m, s, y, 0.03, &g);
    auto fw = [&](const Matrix& w) {
      LinearModel q = m;
      q.weights = w;
      return ovr_objective(q, s, y, 0.03);
    };
    auto fb = [&](const Matrix& b) {
      LinearModel q = m;
      q.bias = b.col(0);
      return ovr_objective(q, s, y, 0.03);
    };
    CHECK(test::rel_error(g.weights, test::finite_difference(fw, m.weights)) < 1e-4);
    CHECK(test::rel_error(g.bias, test::finite_difference(fb, m.bias)) < 1e-4);
  }
}

TEST_CASE("predict") {
  LinearModel sym{Matrix::Zero(2, 2), Vector::Zero(2), {3, 7}};
  sym.weights << 1.0, 0.0, 0.0, 1.0;
  Vector x(2);
  x << 1.0, 1.0;
  CHECK(predict(sym, x).class_id == 3);

  LinearModel bias_only{Matrix::Zero(2, 3), Vector(2), {0, 1}};
  bias_only.bias << 1.0, 0.0;
  CHECK(predict(bias_only, test::random_vector(3, 1)).class_id == 0);
  CHECK_THROWS_AS(predict(bias_only, Vector::Zero(4)), ArgumentError);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearModel m{test::random_matrix(4, 6, seed), test::random_vector(4, seed + 1), {0, 1, 2, 3}};
    const Vector v = test::random_vector(6, seed + 2);
    const Prediction p = predict(m, v);
    int best = 0;
    double best_score = -1e300;
    for (Index c = 0; c < 4; ++c) {
      double sc = m.bias(c);
      for (Index j = 0; j < 6; ++j) sc += m.weights(c, j) * v(j);
      CHECK(std::abs(sc - p.scores(c)) < 1e-12);
      if (sc > best_score) {
        best_score = sc;
        best = int(c);
      }
    }
    CHECK(p.class_id == best);

    // Positive rescaling leaves the argmax alone.
    const LinearModel scaled{m.weights * 3.5, m.bias * 3.5, m.class_ids};
    CHECK(predict(scaled, v).class_id == p.class_id);
  }
}

TEST_CASE("average precision on a hand-ranked list") {
  Vector scores(5);
  scores << 0.9, 0.8, 0.7, 0.6, 0.5;
  // Hits at ranks 1, 3, 5: (1/1 + 2/3 + 3/5) / 3 = 34/45.
  CHECK(average_precision(scores, {true, false, true, false, true}) == doctest::Approx(34.0 / 45.0).epsilon(1e-15));
  CHECK(average_precision(scores, {true, true, false, false, false}) == 1.0);
  // Ties rank the lower index first.
  CHECK(average_precision(Vector::Zero(2), {false, true}) == 0.5);
  CHECK(std::isnan(average_precision(scores, {false, false, false, false, false})));
}

TEST_CASE("evaluate") {
  Matrix s(4, 2);
  s << 1, 0, 0, 1, 1, 0, 0, 1;
  const std::vector<int> y = {0, 1, 0, 1};
  LinearModel perfect{Matrix::Identity(2, 2), Vector::Zero(2), {0, 1}};
  const Metrics m = evaluate(perfect, s, y);
  CHECK(m.accuracy == 1.0);
  CHECK(m.mean_average_precision == 1.0);
  CHECK(m.precision == std::vector<double>{1.0, 1.0});

  LinearModel reversed{-Matrix::Identity(2, 2), Vector::Zero(2), {0, 1}};
  const Metrics r = evaluate(reversed, s, y);
  CHECK(r.accuracy == 0.0);
  CHECK(r.mean_average_precision >= 0.0);
  CHECK(r.mean_average_precision <= 1.0);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearModel rm{test::random_matrix(3, 5, seed), test::random_vector(3, seed), {0, 1, 2}};
    const Matrix rs = test::random_matrix(12, 5, seed + 1);
    std::vector<int> ry(12);
    for (int i = 0; i < 12; ++i) ry[std::size_t(i)] = i % 3;
    const Metrics e = evaluate(rm, rs, ry);
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
    CHECK(e.mean_average_precision >= 0.0);
    CHECK(e.mean_average_precision <= 1.0);
  }
}

TEST_CASE("training errors and determinism") {
  const Matrix s = test::random_matrix(6, 3, 2);
  CHECK_THROWS_AS(train_linear(s, std::vector<int>{1, 1, 1, 1, 1, 1}), ArgumentError);
  CHECK_THROWS_AS(train_linear(s, std::vector<int>{0, 1}), ArgumentError);

  const Matrix big = test::random_matrix(60, 8, 3);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) y[std::size_t(i)] = (big(i, 0) > 0) + 2 * (big(i, 1) > 0);
  LinearTrainConfig cfg;
  cfg.seed = 5;
  set_num_threads(1);
  const LinearTrainResult a = train_linear(big, y, cfg);
  set_num_threads(4);
  const LinearTrainResult b = train_linear(big, y, cfg);
  set_num_threads(0);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.objective_trace == b.objective_trace);
  CHECK(a.objective_trace.back() <= a.objective_trace.front());
}
