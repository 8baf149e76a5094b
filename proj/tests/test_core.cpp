#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "hindsight/checkpoint.hpp"
#include "hindsight/graph.hpp"
#include "hindsight/kernels.hpp"
#include "hindsight/layers.hpp"
#include "hindsight/optim.hpp"

using namespace hindsight;

namespace {

// Textbook triple loop, independent of the kernels under test.
Tensor naive_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = Tensor::zeros(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = b[j];
      for (std::size_t p = 0; p < x.cols(); ++p) acc += x.at(i, p) * w.at(p, j);
      y.at(i, j) = acc;
    }
  return y;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(b[i]), 1.0);
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Tensor affine_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  ParameterSet ps;
  Affine layer;
  layer.in = w.rows();
  layer.out = w.cols();
  layer.weight = ps.add("w", w);
  layer.bias = ps.add("b", b);
  Graph g;
  Binding bind(g, static_cast<const ParameterSet&>(ps));
  return layer.forward(bind, g.constant(x)).value();
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == shape_product(t.shape()));
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}).item(), DimensionError);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = uniform_index(rng, 1, 90), n = uniform_index(rng, 1, 90), k = uniform_index(rng, 1, 90);
    Tensor a = gradcheck::random_tensor(rng, m, k), b = gradcheck::random_tensor(rng, k, n);
    Tensor bt = gradcheck::random_tensor(rng, n, k), at = gradcheck::random_tensor(rng, k, m);
    Tensor c1 = Tensor::zeros(m, n), c2 = Tensor::zeros(m, n);
    kernels::gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    kernels::reference::gemm_nn(m, n, k, a.data(), b.data(), c2.data());
    CHECK(max_rel_diff(c1, c2) < 1e-12);
    c1.fill(0), c2.fill(0);
    kernels::gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
    kernels::reference::gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    CHECK(max_rel_diff(c1, c2) < 1e-12);
    c1.fill(0), c2.fill(0);
    kernels::gemm_tn(m, n, k, at.data(), b.data(), c1.data());
    kernels::reference::gemm_tn(m, n, k, at.data(), b.data(), c2.data());
    CHECK(max_rel_diff(c1, c2) < 1e-12);
    Tensor s1 = Tensor::zeros(1, n), s2 = Tensor::zeros(1, n);
    kernels::column_sums(m, n, c1.data(), s1.data());
    kernels::reference::column_sums(m, n, c1.data(), s2.data());
    CHECK(max_rel_diff(s1, s2) < 1e-12);
  }
}

TEST_CASE("forward_affine") {
  SUBCASE("identity") {
    auto y = affine_forward(Tensor::row({1, 0}), Tensor::identity(2), Tensor::zeros(1, 2));
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
  }
  SUBCASE("scalar") {
    auto y = affine_forward(Tensor::row({2}), Tensor::row({3}), Tensor::row({1}));
    CHECK(y.item() == 7.0);
  }
  SUBCASE("matches naive matmul oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto b = uniform_index(rng, 1, 40), in = uniform_index(rng, 1, 70), out = uniform_index(rng, 1, 70);
      Tensor x = gradcheck::random_tensor(rng, b, in), w = gradcheck::random_tensor(rng, in, out);
      Tensor bias = gradcheck::random_tensor(rng, 1, out);
      CHECK(max_rel_diff(affine_forward(x, w, bias), naive_affine(x, w, bias)) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(affine_forward(Tensor::row({1, 2, 3}), Tensor::identity(2), Tensor::zeros(1, 2)),
                    DimensionError);
  }
}

TEST_CASE("gru_step") {
  Rng rng(3);
  ParameterSet ps;
  auto gru = Gru::create(ps, "g", 3, 4, 2, rng);

  SUBCASE("zero weights: closed form from bias-only gates") {
    for (auto& p : ps) p.value.fill(0.0);
    const double bir = 0.3, bhr = -0.1, biz = -0.7, bhz = 0.2, bin = 0.5, bhn = -0.4;
    for (std::size_t l = 0; l < 2; ++l) {
      auto& bi = ps[gru.b_input[l]].value;
      auto& bh = ps[gru.b_hidden[l]].value;
      for (std::size_t j = 0; j < 4; ++j) {
        bi[j] = bir, bh[j] = bhr;
        bi[4 + j] = biz, bh[4 + j] = bhz;
        bi[8 + j] = bin, bh[8 + j] = bhn;
      }
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double r = sig(bir + bhr), z = sig(biz + bhz), n = std::tanh(bin + r * bhn);
    GruState state = GruState::zeros(gru);
    double h = 0.0;
    for (int step = 0; step < 3; ++step) {
      auto [out, next] = gru_step(gru, ps, Tensor::row({0.9, -2.0, 5.0}), state);
      h = (1 - z) * n + z * h;
      for (double v : next.hidden.values()) CHECK(v == doctest::Approx(h).epsilon(1e-14));
      state = next;
    }
  }

  SUBCASE("zero-length sequence leaves the state unchanged") {
    Graph g;
    Binding bind(g, static_cast<const ParameterSet&>(ps));
    auto h0 = gru.zero_state(g, 2);
    auto h = gru.run(bind, {}, {}, h0);
    for (std::size_t l = 0; l < 2; ++l) CHECK(h[l].value() == h0[l].value());
  }

  SUBCASE("deterministic") {
    auto x = Tensor::row({0.1, 0.2, -0.3});
    auto a = gru_step(gru, ps, x, GruState::zeros(gru));
    auto b = gru_step(gru, ps, x, GruState::zeros(gru));
    CHECK(a.first == b.first);
    CHECK(a.second.hidden == b.second.hidden);
  }

  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(gru_step(gru, ps, Tensor::row({1.0, 2.0}), GruState::zeros(gru)), DimensionError);
    CHECK_THROWS_AS(gru_step(gru, ps, Tensor::row({1.0, 2.0, 3.0}), GruState{Tensor::zeros(1, 4)}), DimensionError);
  }
}

TEST_CASE("softmax_cross_entropy") {
  Graph g;
  SUBCASE("uniform logits give ln V") {
    for (std::size_t v : {2u, 5u, 13u}) {
      std::size_t target[] = {v - 1};
      auto l = op::softmax_cross_entropy(g.constant(Tensor::zeros(1, v)), target);
      CHECK(l.value().item() == doctest::Approx(std::log(static_cast<double>(v))).epsilon(1e-14));
    }
  }
  SUBCASE("saturated target gives ~0") {
    std::size_t target[] = {1};
    auto l = op::softmax_cross_entropy(g.constant(Tensor::row({0.0, 1e3, -5.0})), target);
    CHECK(l.value().item() < 1e-12);
  }
  SUBCASE("probabilities sum to one") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto p = softmax_rows(gradcheck::random_tensor(rng, 3, 9, -20.0, 20.0));
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (double v : p.row_span(r)) {
          CHECK(v >= 0.0);
          s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
    }
  }
  SUBCASE("target out of range") {
    std::size_t target[] = {3};
    CHECK_THROWS_AS(op::softmax_cross_entropy(g.constant(Tensor::zeros(1, 3)), target), std::out_of_range);
  }
}

TEST_CASE("backward") {
  SUBCASE("sum gives all-ones gradient") {
    ParameterSet ps;
    ps.add("x", Tensor::row({1.0, -2.0, 3.5}));
    Graph g;
    Binding bind(g, ps);
    g.backward(op::sum(bind(0)));
    for (double v : ps[0].grad.values()) CHECK(v == 1.0);
    CHECK(ps[0].has_grad);
  }
  SUBCASE("affine then cross-entropy matches finite differences") {
    Rng rng(21);
    ParameterSet ps;
    auto layer = Affine::create(ps, "a", 4, 6, rng);
    ps[layer.bias].value = gradcheck::random_tensor(rng, 1, 6);
    const auto x = ps.add("x", gradcheck::random_tensor(rng, 3, 4));
    std::vector<std::size_t> targets = {0, 5, 2};
    auto res = gradcheck::check(ps, [&](Binding& b) {
      return op::sum(op::softmax_cross_entropy(layer.forward(b, b(x)), targets));
    });
    CHECK(res.checked == ps.scalar_count());
    CHECK(res.max_rel_error <= 1e-4);
  }
  SUBCASE("second backward without a new forward pass is an error") {
    ParameterSet ps;
    ps.add("x", Tensor::row({1.0, 2.0}));
    Graph g;
    Binding bind(g, ps);
    Var loss = op::sum(op::square(bind(0)));
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), GraphError);
  }
  SUBCASE("constant-only graph cannot be back-propagated") {
    Graph g;
    Var loss = op::sum(g.constant(Tensor::row({1.0})));
    CHECK_THROWS_AS(g.backward(loss), GraphError);
  }
}

TEST_CASE("every layer passes the finite-difference check") {
  Rng rng(1234);
  for (const auto& c : gradcheck::layer_cases()) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      auto [ps, loss] = c.make(rng);
      worst = std::max(worst, gradcheck::check(ps, loss).max_rel_error);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("ops do not mutate inputs and are deterministic") {
  Rng rng(9);
  Tensor a = gradcheck::random_tensor(rng, 3, 4), b = gradcheck::random_tensor(rng, 4, 2);
  const Tensor a0 = a, b0 = b;
  Tensor first, second;
  for (Tensor* out : {&first, &second}) {
    Graph g;
    Var va = g.constant_ref(a), vb = g.constant_ref(b);
    *out = op::tanh(op::matmul(op::sigmoid(va), vb)).value();
  }
  CHECK(a == a0);
  CHECK(b == b0);
  CHECK(first == second);
}

TEST_CASE("non-finite forward values are rejected") {
  Graph g;
  CHECK_THROWS_AS(op::exp(g.constant(Tensor::row({1e4}))), NumericError);
  CHECK_THROWS_AS(op::log(g.constant(Tensor::row({-1.0}))), NumericError);
}

TEST_CASE("adam_update") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterSet ps;
    ps.add("w", Tensor::row({0.5, -1.5}));
    Adam adam(ps, {});
    ps[0].has_grad = true;
    adam.step(ps);
    CHECK(ps[0].value == Tensor::row({0.5, -1.5}));
    CHECK(ps.step_count == 1);
  }
  SUBCASE("one step on w^2 descends") {
    ParameterSet ps;
    ps.add("w", Tensor::row({1.0}));
    Adam adam(ps, {.lr = 0.1});
    Graph g;
    Binding bind(g, ps);
    g.backward(op::sum(op::square(bind(0))));
    adam.step(ps);
    CHECK(ps[0].value[0] < 1.0);
  }
  SUBCASE("converges on a convex quadratic") {
    ParameterSet ps;
    ps.add("w", Tensor::row({1.0, -2.0, 0.5}));
    Adam adam(ps, {.lr = 0.05});
    for (int it = 0; it < 5000; ++it) {
      Graph g;
      Binding bind(g, ps);
      g.backward(op::sum(op::square(bind(0))));
      adam.step(ps);
      adam.set_lr(0.05 / (1.0 + it / 200.0));
    }
    double f = 0.0;
    for (double v : ps[0].value.values()) f += v * v;
    CHECK(f < 1e-6);
  }
  SUBCASE("missing gradient is an error") {
    ParameterSet ps;
    ps.add("w", Tensor::row({1.0}));
    ps.add("unused", Tensor::row({1.0}));
    Adam adam(ps, {});
    Graph g;
    Binding bind(g, ps);
    g.backward(op::sum(bind(0)));
    CHECK_THROWS_AS(adam.step(ps), GraphError);
  }
}

TEST_CASE("polyak update moves by tau") {
  ParameterSet online, target;
  online.add("w", Tensor::row({1.0, 3.0}));
  target.add("w", Tensor::row({0.0, 1.0}));
  target.polyak_update(online, 0.25);
  CHECK(target[0].value[0] == doctest::Approx(0.25));
  CHECK(target[0].value[1] == doctest::Approx(1.5));
}

TEST_CASE("checkpoint round trip") {
  Rng rng(2);
  Checkpoint ck;
  ck.metadata["mode"] = "default";
  ck.params.add("a.weight", gradcheck::random_tensor(rng, 3, 2));
  ck.params.add("b", Tensor({4}, std::vector<double>{1, 2, 3, 4}));
  const auto path = std::filesystem::temp_directory_path() / "hindsight_ckpt_test.bin";
  write_checkpoint(path, ck);
  auto back = read_checkpoint(path);
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.params.size() == 2);
  CHECK(back.params[0].name == "a.weight");
  CHECK(back.params[0].value == ck.params[0].value);
  CHECK(back.params[1].value.shape() == Shape{4});

  {
    std::ofstream bad(path, std::ios::binary);
    bad << "garbage!";
  }
  CHECK_THROWS_AS(read_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
}
