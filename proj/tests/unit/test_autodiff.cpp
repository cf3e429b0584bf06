#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpgan/autodiff.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/primitive_cases.hpp"

using namespace cpgan;
using ad::Tensor;
using TensorD = Tensor<double>;

TEST_CASE("tensor construction enforces its invariants", "[autodiff][tensor]") {
  CHECK_THROWS_AS(TensorD::from({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(TensorD::from({2, 0}, {}), ShapeError);
  CHECK_THROWS_AS(TensorD::from({2}, {1.0, NAN}), NonFiniteError);
  const auto t = TensorD::zeros({2, 3}, true);
  CHECK(t.grad().size() == t.size());
  CHECK_THROWS_AS(TensorD::zeros({2}).grad(), TapeError);
}

TEST_CASE("matmul with the identity returns the other operand", "[autodiff][matmul]") {
  util::Rng rng(3);
  const auto a = testing::random_tensor({3, 5}, rng);
  const auto eye = TensorD::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto out = ad::matmul(eye, a);
  REQUIRE(out.shape() == a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == a[i]);
}

TEST_CASE("tanh and sigmoid at zero", "[autodiff]") {
  const auto z = TensorD::zeros({2, 2});
  const auto t = ad::tanh(z);
  const auto s = ad::sigmoid(z);
  for (double v : t.values()) CHECK(v == 0.0);
  for (double v : s.values()) CHECK(v == 0.5);
}

TEST_CASE("conv2d matches the nested-loop oracle", "[autodiff][conv]") {
  util::Rng rng(11);
  struct Cfg { std::size_t n, c, h, o, k, stride, pad; };
  const std::vector<Cfg> cfgs{{1, 1, 8, 1, 3, 1, 1}, {2, 3, 9, 4, 4, 2, 1}, {1, 2, 7, 3, 2, 3, 0}};
  for (const auto& cfg : cfgs) {
    const auto x = testing::random_tensor({cfg.n, cfg.c, cfg.h, cfg.h}, rng);
    const auto w = testing::random_tensor({cfg.o, cfg.c, cfg.k, cfg.k}, rng);
    std::size_t oh = 0, ow = 0;
    const auto expected = testing::conv2d_loops(
        {x.values().begin(), x.values().end()}, cfg.n, cfg.c, cfg.h, cfg.h,
        {w.values().begin(), w.values().end()}, cfg.o, cfg.k, cfg.k, cfg.stride, cfg.pad, oh, ow);
    const auto out = ad::conv2d(x, w, {cfg.stride, cfg.pad});
    REQUIRE(out.shape() == ad::Shape{cfg.n, cfg.o, oh, ow});
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(out[i] - expected[i]) < 1e-12);
  }
}

TEST_CASE("conv_transpose2d matches the scatter-loop oracle", "[autodiff][conv]") {
  util::Rng rng(12);
  const auto x = testing::random_tensor({2, 3, 5, 5}, rng);
  const auto w = testing::random_tensor({3, 2, 4, 4}, rng);
  std::size_t oh = 0, ow = 0;
  const auto expected = testing::conv_transpose2d_loops(
      {x.values().begin(), x.values().end()}, 2, 3, 5, 5, {w.values().begin(), w.values().end()},
      2, 4, 4, 2, 1, oh, ow);
  const auto out = ad::conv_transpose2d(x, w, {2, 1});
  REQUIRE(out.shape() == ad::Shape{2, 2, 10, 10});
  REQUIRE(oh == 10);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(out[i] - expected[i]) < 1e-12);
}

TEST_CASE("shape errors name the primitive and both shapes", "[autodiff][errors]") {
  const auto a = TensorD::zeros({2, 3});
  const auto b = TensorD::zeros({4, 5});
  try {
    (void)ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, TensorD::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(ad::concat<double>({a, b}, 0), ShapeError);
  CHECK_THROWS_AS(ad::conv2d(TensorD::zeros({1, 2, 4, 4}), TensorD::zeros({1, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(ad::log(TensorD::full({2}, -1.0)), NonFiniteError);
}

TEST_CASE("trailing broadcasting in elementwise ops", "[autodiff][broadcast]") {
  const auto x = TensorD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = TensorD::from({3}, {10, 20, 30});
  const auto y = ad::add(x, b);
  CHECK(std::vector<double>(y.values().begin(), y.values().end()) ==
        std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK_THROWS_AS(ad::add(x, TensorD::zeros({2})), ShapeError);
}

TEST_CASE("backward of simple losses", "[autodiff][backward]") {
  util::Rng rng(5);
  SECTION("sum gives all ones") {
    auto w = testing::random_tensor({3, 4}, rng).clone(true);
    ad::Tape<double> tape;
    ad::TapeScope<double> scope(tape);
    tape.backward(ad::sum(w));
    for (double g : w.grad()) CHECK(g == 1.0);
  }
  SECTION("quadratic at its minimum gives zero") {
    const auto t = testing::random_tensor({5}, rng);
    auto w = t.clone(true);
    ad::Tape<double> tape;
    ad::TapeScope<double> scope(tape);
    tape.backward(ad::mean(ad::square(ad::sub(w, t))));
    for (double g : w.grad()) CHECK(g == 0.0);
  }
}

TEST_CASE("tape errors", "[autodiff][tape]") {
  auto w = TensorD::full({3}, 1.0, true);
  ad::Tape<double> tape;
  ad::TapeScope<double> scope(tape);
  const auto y = ad::square(w);
  CHECK_THROWS_AS(tape.backward(y), TapeError);  // not scalar
  const auto loss = ad::sum(y);
  ad::Tape<double> other;
  CHECK_THROWS_AS(other.backward(loss), TapeError);  // foreign node
  tape.backward(loss);
  for (double g : w.grad()) CHECK(g == 2.0);
  CHECK_THROWS_AS(tape.backward(loss), TapeError);  // replay
  for (double g : w.grad()) CHECK(g == 2.0);        // no silent double accumulation
}

TEST_CASE("tape records in topological order and replays in reverse", "[autodiff][tape]") {
  util::Rng rng(8);
  auto a = testing::random_tensor({2, 2}, rng).clone(true);
  auto b = testing::random_tensor({2, 2}, rng).clone(true);
  ad::Tape<double> tape;
  ad::TapeScope<double> scope(tape);
  const auto loss = ad::sum(ad::tanh(ad::add(ad::matmul(a, b), ad::square(a))));
  for (const auto& rec : tape.records())
    for (std::size_t in : rec.inputs) CHECK(in < rec.output);
  tape.backward(loss);
  const auto order = tape.visit_order();
  REQUIRE(order.size() == tape.records().size());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == order.size() - 1 - i);
}

TEST_CASE("no active tape means nothing is tracked", "[autodiff][tape]") {
  auto w = TensorD::full({2}, 1.0, true);
  const auto y = ad::square(w);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("every primitive passes the finite-difference check over 100 seeds",
          "[autodiff][gradcheck]") {
  for (const auto& pc : testing::primitive_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      util::Rng rng = util::make_rng(seed, 77);
      auto [fn, inputs] = pc.make(rng);
      const auto r = testing::gradcheck(fn, inputs, rng);
      CHECK(r.skipped_kinks == 0);
      worst = std::max(worst, r.max_rel_error);
    }
    INFO(pc.name << " worst relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradients accumulate across consumers", "[autodiff][backward]") {
  util::Rng rng(21);
  const auto w0 = testing::random_tensor({3, 3}, rng);
  auto grad_of = [&](auto build) {
    auto w = w0.clone(true);
    ad::Tape<double> tape;
    ad::TapeScope<double> scope(tape);
    tape.backward(build(w));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  auto f = [](const TensorD& w) { return ad::sum(ad::tanh(w)); };
  auto g = [](const TensorD& w) { return ad::mean(ad::square(ad::matmul(w, w))); };
  const auto gf = grad_of(f);
  const auto gg = grad_of(g);
  const auto gfg = grad_of([&](const TensorD& w) { return ad::add(f(w), g(w)); });
  for (std::size_t i = 0; i < gf.size(); ++i) CHECK(std::abs(gfg[i] - (gf[i] + gg[i])) < 1e-12);
}

TEST_CASE("identical seeds give bit-identical results", "[autodiff][determinism]") {
  auto run = [] {
    util::Rng rng(99);
    auto x = testing::random_tensor({2, 3, 6, 6}, rng).clone(true);
    auto w = testing::random_tensor({4, 3, 3, 3}, rng).clone(true);
    ad::Tape<double> tape;
    ad::TapeScope<double> scope(tape);
    const auto loss = ad::sum(ad::sigmoid(ad::conv2d(x, w, {2, 1})));
    tape.backward(loss);
    std::vector<double> out{loss.item()};
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("adam update", "[autodiff][adam]") {
  SECTION("zero gradients leave parameters unchanged") {
    std::vector<TensorD> params{TensorD::from({3}, {1.0, -2.0, 0.5}, true)};
    auto state = ad::OptimizerState<double>::for_params(params, {0.1, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 10; ++i) ad::adam_update<double>(params, state);
    CHECK(std::vector<double>(params[0].values().begin(), params[0].values().end()) ==
          std::vector<double>{1.0, -2.0, 0.5});
    CHECK(state.step == 10);
  }
  SECTION("single scalar step matches the scalar oracle") {
    std::vector<TensorD> params{TensorD::scalar(0.7, true)};
    auto state = ad::OptimizerState<double>::for_params(params, {0.1, 0.9, 0.999, 1e-8});
    params[0].mutable_grad()[0] = 1.0;
    ad::adam_update<double>(params, state);
    testing::ScalarAdam oracle{0.1, 0.9, 0.999, 1e-8};
    const double expected = oracle.step(0.7, 1.0);
    CHECK(params[0].item() == expected);
    CHECK(std::abs((0.7 - params[0].item()) - 0.1 / (1.0 + 1e-8)) < 1e-15);
  }
  SECTION("several steps with varying gradients track the oracle") {
    std::vector<TensorD> params{TensorD::scalar(0.0, true)};
    auto state = ad::OptimizerState<double>::for_params(params, {0.05, 0.5, 0.999, 1e-8});
    testing::ScalarAdam oracle{0.05, 0.5, 0.999, 1e-8};
    double p = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double g = std::sin(0.3 * i) + 0.1;
      params[0].mutable_grad()[0] = g;
      ad::adam_update<double>(params, state);
      p = oracle.step(p, g);
      CHECK(std::abs(params[0].item() - p) < 1e-14);
    }
  }
  SECTION("converges on a quadratic bowl") {
    util::Rng rng(4);
    const auto c = testing::random_tensor({6}, rng);
    std::vector<TensorD> params{testing::random_tensor({6}, rng, 2.0).clone(true)};
    auto state = ad::OptimizerState<double>::for_params(params, {0.05, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 2000; ++step) {
      ad::zero_grad<double>(params);
      ad::Tape<double> tape;
      ad::TapeScope<double> scope(tape);
      tape.backward(ad::sum(ad::square(ad::sub(params[0], c))));
      ad::adam_update<double>(params, state);
    }
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(params[0][i] - c[i]) < 1e-3);
  }
  SECTION("shape mismatch is rejected") {
    std::vector<TensorD> params{TensorD::zeros({3}, true)};
    auto state = ad::OptimizerState<double>::for_params(params);
    const std::vector<double> bad(2, 1.0);
    const std::vector<std::span<const double>> grads{bad};
    CHECK_THROWS_AS(ad::adam_update<double>(params, grads, state), ShapeError);
  }
}
