// Copyright 2026 The komei Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "komei/error.hpp"
#include "komei/optim.hpp"
#include "komei/prediction.hpp"
#include "test_support.hpp"

using namespace komei;

namespace {

constexpr double kGolden = 1e-9;

ClassifierParams fixed_classifier(const Tensor2& h, const Tensor2& w, double b) {
  ClassifierParams c;
  c.h = std::make_shared<Parameter>("h", h);
  c.w = std::make_shared<Parameter>("w", w);
  c.b = std::make_shared<Parameter>("b", Tensor2(1, 1, b));
  return c;
}

double scalar(Var v) { return v.value()(0, 0); }

}  // namespace

TEST_CASE("classifier golden scores") {
  const auto cls = fixed_classifier(Tensor2::identity(2), Tensor2::row({1, 1}), 0.0);
  const Tensor2 p = predict_scores(Tensor2::row({1, 0}), cls);
  const double e = std::exp(1.0);
  CHECK(std::abs(p(0, 0) - e / (e + 1.0)) < kGolden);
  CHECK(std::abs(p(0, 1) - 1.0 / (e + 1.0)) < kGolden);
  CHECK(std::abs(p(0, 0) - 0.7310585786300049) < kGolden);

  std::mt19937_64 rng(1);
  const auto zero_w = fixed_classifier(komei::testing::random_tensor(5, 3, rng), Tensor2(1, 3), 0.4);
  const Tensor2 u = predict_scores(komei::testing::random_tensor(4, 3, rng), zero_w);
  for (double v : u.data()) CHECK(std::abs(v - 0.2) < kGolden);

  const auto cls2 = ClassifierParams::create(6, 4, rng);
  CHECK(cls2.categories() == 6);
  const Tensor2 q = predict_scores(komei::testing::random_tensor(7, 4, rng, 3.0), cls2);
  for (std::size_t r = 0; r < q.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < q.cols(); ++c) s += q(r, c);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(ClassifierParams::create(0, 4, rng), ConfigError);
  CHECK_THROWS_AS(predict_scores(Tensor2(1, 3), cls2), DimensionError);
}

TEST_CASE("prediction loss golden values") {
  const std::vector<std::size_t> g0{0};
  CHECK(std::abs(prediction_loss(Tensor2::row({0.5, 0.5}), g0) - std::log(2.0)) < kGolden);
  CHECK(std::abs(prediction_loss(Tensor2::row({0.5, 0.5}), g0) - 0.6931471805599453) < kGolden);
  for (std::size_t n : {3u, 7u, 50u}) {
    const std::vector<std::size_t> g{n - 1};
    CHECK(std::abs(prediction_loss(Tensor2(1, n, 1.0 / static_cast<double>(n)), g) -
                   std::log(static_cast<double>(n))) < kGolden);
    Tape t;
    CHECK(std::abs(scalar(prediction_loss_from_logits(t.constant(Tensor2(1, n, 2.5)), g)) -
                   std::log(static_cast<double>(n))) < kGolden);
  }
  CHECK(prediction_loss(Tensor2::row({1.0, 0.0}), g0) == 0.0);
  Tape t;
  CHECK(scalar(prediction_loss_from_logits(t.constant(Tensor2::row({60, -60})), g0)) < 1e-40);
}

TEST_CASE("total loss weights and drops absent terms") {
  Tape t;
  const Var lp = t.constant(Tensor2(1, 1, 0.5));
  const Var lti = t.constant(Tensor2(1, 1, 0.2));
  const Var lts = t.constant(Tensor2(1, 1, 0.3));
  CHECK(scalar(total_loss(lp, lti, lts, {1, 0, 0})) == 0.5);
  CHECK(std::abs(scalar(total_loss(lp, lti, lts, {1, 1, 1})) - 1.0) < kGolden);
  CHECK(std::abs(scalar(total_loss(lp, std::nullopt, lts, {2, 5, 3})) - (1.0 + 0.9)) < kGolden);
  CHECK(std::abs(scalar(total_loss(lp, lti, std::nullopt, {1, 0.1, 0.1})) - 0.52) < kGolden);
  CHECK_THROWS_AS(total_loss(lp, lti, lts, {0, 1, 1}), ConfigError);
  CHECK_THROWS_AS(total_loss(lp, lti, lts, {1, -1, 1}), ConfigError);
}

TEST_CASE("top-k hits follow the lower-index tie rule") {
  const std::vector<double> s{0.5, 0.3, 0.2};
  CHECK(top_k_hit(s, 0, 1));
  CHECK_FALSE(top_k_hit(s, 1, 1));
  CHECK(top_k_hit(s, 1, 2));
  CHECK(top_k_hit(s, 2, 3));
  const std::vector<double> tie{0.4, 0.4, 0.2};
  CHECK(top_k_hit(tie, 0, 1));
  CHECK_FALSE(top_k_hit(tie, 1, 1));
  CHECK(top_k_hit(tie, 1, 2));
  CHECK(ranked_categories(tie) == std::vector<std::size_t>{0, 1, 2});
  CHECK(ranked_categories(std::vector<double>{0.1, 0.7, 0.1, 0.1}) ==
        std::vector<std::size_t>{1, 0, 2, 3});
  CHECK_THROWS_AS(top_k_hit(s, 0, 0), DomainError);
  CHECK_THROWS_AS(top_k_hit(s, 0, 4), DomainError);
  CHECK_THROWS_AS(top_k_hit(s, 3, 1), DomainError);
}

TEST_CASE("top-k agrees with the ranking on random rows with ties") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> row(5);
    for (double& v : row) v = 0.25 * level(rng);
    const auto order = ranked_categories(row);
    for (std::size_t gold = 0; gold < row.size(); ++gold) {
      const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), gold) - order.begin());
      for (std::size_t k = 1; k <= row.size(); ++k) CHECK(top_k_hit(row, gold, k) == (pos < k));
    }
  }
}

TEST_CASE("classifier gradients match central differences") {
  std::mt19937_64 rng(3);
  auto cls = ClassifierParams::create(4, 3, rng);
  cls.w->value = komei::testing::random_tensor(1, 3, rng);
  cls.b->value(0, 0) = 0.3;
  auto fused = std::make_shared<Parameter>("fused", komei::testing::random_tensor(5, 3, rng));
  const std::vector<ParamPtr> params{cls.h, cls.w, cls.b, fused};
  const std::vector<std::size_t> gold{0, 3, 1, 1, 2};
  const auto r = grad_check([&](Tape& t) {
    return prediction_loss_from_logits(class_logits(t.param(*fused), cls), gold);
  }, params, 1e-6);
  CHECK(r.max_rel_error < 1e-4);
}
