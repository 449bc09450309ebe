#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "tinydl/errors.hpp"
#include "tinydl/losses.hpp"
#include "tinydl/optim.hpp"

using namespace tinydl;
using tinydl::test::random_tensor;

namespace {

OptimizerState gd(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::gradient_descent;
  s.learning_rate = lr;
  return s;
}

// Central-difference check of a loss gradient.
double loss_grad_error(LossKind kind, Tensor p, const Tensor& t) {
  const LossValue lv = loss(kind, p, t);
  double worst = 0.0;
  const double eps = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (kind == LossKind::mean_absolute_error && std::fabs(p[i] - t[i]) < 1e-6) continue;
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = loss(kind, p, t).value;
    p[i] = saved - eps;
    const double down = loss(kind, p, t).value;
    p[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::fabs(numeric), std::fabs(lv.grad[i]), 1e-8});
    worst = std::max(worst, std::fabs(numeric - lv.grad[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_SUITE("losses_optim") {

TEST_CASE("mean absolute error") {
  const LossValue lv = loss(LossKind::mean_absolute_error, Tensor::vector({1, 0}), Tensor::vector({0, 0}));
  CHECK(lv.value == 0.5);
  CHECK(lv.grad.identical(Tensor::vector({0.5, 0})));
  const LossValue perfect = loss(LossKind::mean_absolute_error, Tensor::vector({0.3, 1}), Tensor::vector({0.3, 1}));
  CHECK(perfect.value == 0.0);
  CHECK(perfect.grad.identical(Tensor({2})));
  CHECK_THROWS_AS(loss(LossKind::mean_absolute_error, Tensor({2}), Tensor({3})), DimensionError);
}

TEST_CASE("losses are non-negative") {
  Rng rng(1);
  for (LossKind kind : {LossKind::mean_absolute_error, LossKind::mean_squared_error,
                        LossKind::binary_cross_entropy, LossKind::categorical_cross_entropy}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor p = random_tensor({4}, rng, 0.01, 0.99);
      Tensor t({4});
      t[rng.below(4)] = 1.0;
      CHECK(loss(kind, p, t).value >= 0.0);
    }
  }
}

TEST_CASE("cross-entropy clamps saturated predictions") {
  const LossValue lv = loss(LossKind::binary_cross_entropy, Tensor::vector({0.0, 1.0}), Tensor::vector({1.0, 0.0}));
  CHECK(std::isfinite(lv.value));
  CHECK(lv.grad.all_finite());
  CHECK(lv.value == doctest::Approx(-std::log(kProbClamp)));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(2);
  for (LossKind kind : {LossKind::mean_absolute_error, LossKind::mean_squared_error,
                        LossKind::binary_cross_entropy, LossKind::categorical_cross_entropy}) {
    CAPTURE(to_string(kind));
    for (int trial = 0; trial < 50; ++trial) {
      const Shape shape = trial % 2 ? Shape{5} : Shape{3, 2, 2};
      const Tensor p = random_tensor(shape, rng, 0.05, 0.95);
      const Tensor t = random_tensor(shape, rng, 0.0, 1.0);
      CHECK(loss_grad_error(kind, p, t) < 1e-6);
    }
  }
}

TEST_CASE("loss kinds round-trip through their names") {
  for (LossKind kind : {LossKind::mean_absolute_error, LossKind::mean_squared_error,
                        LossKind::binary_cross_entropy, LossKind::categorical_cross_entropy}) {
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), ConfigError);
}

TEST_CASE("L2 penalty") {
  const Tensor w = Tensor::vector({3});
  const Tensor* weights[] = {&w};
  const L2Penalty p = l2_penalty(weights, 0.5);
  CHECK(p.value == 4.5);
  CHECK(p.grads[0].identical(Tensor::vector({3})));
  const L2Penalty off = l2_penalty(weights, 0.0);
  CHECK(off.value == 0.0);
  CHECK(off.grads[0].identical(Tensor({1})));
}

TEST_CASE("gradient descent step") {
  Tensor w = Tensor::vector({1});
  gd_step(gd(0.1), w, Tensor::vector({2}));
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));
  Tensor still = Tensor::vector({1.5, -2});
  gd_step(gd(0.1), still, Tensor({2}));
  CHECK(still.identical(Tensor::vector({1.5, -2})));
  CHECK_THROWS_AS(gd_step(gd(0.1), still, Tensor({3})), DimensionError);
}

TEST_CASE("optimizer_step counts iterations once per step") {
  OptimizerState s = gd(0.1);
  Tensor a = Tensor::vector({1}), b = Tensor::vector({2});
  Tensor* params[] = {&a, &b};
  const Tensor grads[] = {Tensor::vector({1}), Tensor::vector({1})};
  optimizer_step(s, params, grads);
  optimizer_step(s, params, grads);
  CHECK(s.iteration == 2);
}

TEST_CASE("adaptive step") {
  OptimizerState s;
  s.kind = OptimizerKind::adaptive;
  s.learning_rate = 0.1;
  Tensor w = Tensor::vector({1.0, 1.0});
  Tensor* params[] = {&w};
  optimizer_step(s, params, std::vector<Tensor>{Tensor::vector({3.0, -0.5})});
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-8));
  CHECK(w[1] == doctest::Approx(1.1).epsilon(1e-8));

  Tensor z = Tensor::vector({2.0});
  Tensor* zp[] = {&z};
  OptimizerState s2;
  s2.kind = OptimizerKind::adaptive;
  for (int i = 0; i < 5; ++i) optimizer_step(s2, zp, std::vector<Tensor>{Tensor({1})});
  CHECK(z[0] == 2.0);
}

TEST_CASE("adaptive rates diverge across parameters") {
  OptimizerState s;
  s.kind = OptimizerKind::adaptive;
  s.learning_rate = 0.1;
  Tensor w = Tensor::vector({0.0, 0.0});
  Tensor* params[] = {&w};
  for (int i = 0; i < 10; ++i) optimizer_step(s, params, std::vector<Tensor>{Tensor::vector({10.0, 0.1})});
  // Equal steps per unit of sign despite a 100x gradient ratio.
  CHECK(w[0] == doctest::Approx(w[1]).epsilon(1e-5));
  const Tensor& acc = s.accumulators[0];
  CHECK(acc[0] / acc[1] == doctest::Approx(1e4));
}

TEST_CASE("gradient descent on a quadratic") {
  const double c = 3.0;
  for (double lr : {0.1, 0.4, 0.7, 0.95}) {
    Tensor w = Tensor::vector({-1.0});
    double gap = std::fabs(w[0] - c);
    for (int i = 0; i < 200; ++i) {
      gd_step(gd(lr), w, Tensor::vector({2 * (w[0] - c)}));
      const double next = std::fabs(w[0] - c);
      CHECK(next < gap + 1e-15);
      gap = next;
    }
    CHECK(gap < 1e-6);
  }
  Tensor w = Tensor::vector({-1.0});
  for (int i = 0; i < 50; ++i) gd_step(gd(1.2), w, Tensor::vector({2 * (w[0] - c)}));
  CHECK(std::fabs(w[0] - c) > 1e3);
}

TEST_CASE("small steps settle in the nearest well of a double well") {
  // L = (w^2 - 1)^2 + 0.3 w: global minimum near -1, local minimum near +1.
  const auto grad = [](double w) { return 4 * w * (w * w - 1) + 0.3; };
  const auto value = [](double w) { return (w * w - 1) * (w * w - 1) + 0.3 * w; };
  const auto newton = [&](double w) {
    for (int i = 0; i < 50; ++i) w -= grad(w) / (12 * w * w - 4);
    return w;
  };
  const double local = newton(1.0), global = newton(-1.0);
  REQUIRE(value(local) > value(global));
  Tensor w = Tensor::vector({2.0});
  for (int i = 0; i < 5000; ++i) gd_step(gd(0.01), w, Tensor::vector({grad(w[0])}));
  CHECK(w[0] == doctest::Approx(local).epsilon(1e-9));
}

TEST_CASE("batch plans") {
  BatchPlan full{10, false, 0};
  const auto one = make_batches(10, full);
  REQUIRE(one.size() == 1);
  for (std::size_t i = 0; i < 10; ++i) CHECK(one[0][i] == i);

  const auto singles = make_batches(7, BatchPlan{1, true, 4});
  CHECK(singles.size() == 7);

  const auto b = make_batches(10, BatchPlan{3, true, 5});
  REQUIRE(b.size() == 4);
  CHECK(b[0].size() == 3);
  CHECK(b[3].size() == 1);
  CHECK_THROWS_AS(make_batches(10, BatchPlan{11, true, 0}), ConfigError);
  CHECK_THROWS_AS(make_batches(10, BatchPlan{0, true, 0}), ConfigError);
}

TEST_CASE("batches partition the index set") {
  for (std::size_t n = 1; n <= 64; ++n)
    for (std::size_t bs = 1; bs <= n; ++bs) {
      for (bool shuffle : {false, true}) {
        const auto batches = make_batches(n, BatchPlan{bs, shuffle, n * 131 + bs}, bs % 3);
        std::multiset<std::size_t> seen;
        for (const auto& batch : batches) {
          CHECK(batch.size() <= bs);
          seen.insert(batch.begin(), batch.end());
        }
        REQUIRE(seen.size() == n);
        std::size_t expect = 0;
        for (std::size_t v : seen) CHECK(v == expect++);
      }
    }
}

TEST_CASE("batch order is a function of seed and epoch") {
  const BatchPlan plan{4, true, 99};
  CHECK(make_batches(30, plan, 2) == make_batches(30, plan, 2));
  CHECK(make_batches(30, plan, 2) != make_batches(30, plan, 3));
  CHECK(make_batches(30, plan, 2) != make_batches(30, BatchPlan{4, true, 100}, 2));
}

}
