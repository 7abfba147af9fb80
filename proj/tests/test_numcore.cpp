#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "mnmt/checkpoint.hpp"
#include "mnmt/common.hpp"
#include "mnmt/optim.hpp"
#include "mnmt/tape.hpp"

using namespace mnmt;
using namespace mnmt::num;

TEST_SUITE("numcore") {
  TEST_CASE("tensor construction checks shapes") {
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), Error);
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(m.at(1, 2) == 6);
    CHECK(m.row(1)[0] == 4);
    CHECK(shape_string(m.shape()) == "[2x3]");
  }

  TEST_CASE("primitive values") {
    Tape t(false);
    CHECK(softmax(t.constant(Tensor::vector({0, 0}))).value() == Tensor::vector({0.5, 0.5}));
    CHECK(maxout(t.constant(Tensor::vector({1, 3, 2, 0})), 2).value() == Tensor::vector({3, 2}));
    CHECK(tanh(t.constant(Tensor::vector({0}))).value()[0] == 0.0);
    const Var m = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK(matvec(m, t.constant(Tensor::vector({1, 1}))).value() == Tensor::vector({3, 7}));
    CHECK(matvec_t(m, t.constant(Tensor::vector({1, 1}))).value() == Tensor::vector({4, 6}));
    CHECK(matmul_nt(m, m).value() == Tensor::matrix(2, 2, {5, 11, 11, 25}));
    CHECK_THROWS_AS(add(t.constant(Tensor::vector({1})), t.constant(Tensor::vector({1, 2}))), Error);
  }

  TEST_CASE("softmax rows are distributions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-30, 30);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> x(7);
      for (double& v : x) v = u(rng);
      const Tensor p = softmax_values(x);
      double s = 0.0;
      for (double v : p.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }

  TEST_CASE("analytic gradients of simple losses") {
    ParameterSet ps;
    ps.add("x", Tensor::vector({1, 2}));
    Tape t;
    const Var x = t.param(ps, 0);
    const Var loss = sum(mul(x, x));
    t.backward(loss);
    CHECK(t.grad(x) == Tensor::vector({2, 4}));

    Tape t2;
    const Var logits = t2.param(ps, 0);
    t2.backward(cross_entropy(logits, 1));
    const Tensor p = softmax_values(ps[0].value.values());
    CHECK(t2.grad(logits)[0] == doctest::Approx(p[0]));
    CHECK(t2.grad(logits)[1] == doctest::Approx(p[1] - 1.0));
  }

  TEST_CASE("random three-layer net matches finite differences") {
    std::mt19937_64 rng(17);
    ParameterSet ps;
    ps.add_uniform("w1", {3, 2}, 1.0, rng);
    ps.add_uniform("b1", {3}, 1.0, rng);
    ps.add_uniform("w2", {2, 3}, 1.0, rng);
    ps.add_uniform("b2", {2}, 1.0, rng);
    ps.add_uniform("w3", {2}, 1.0, rng);
    ps.add_uniform("b3", {1}, 1.0, rng);
    REQUIRE(ps.scalar_count() == 20);
    const Tensor input = Tensor::vector({0.3, -0.7});
    const double err = testing::max_gradient_error(ps, [&](Tape& t) {
      const Var h1 = sigmoid(add(matvec(t.param(ps, 0), t.constant_ref(input)), t.param(ps, 1)));
      const Var h2 = tanh(add(matvec(t.param(ps, 2), h1), t.param(ps, 3)));
      return add(dot(t.param(ps, 4), h2), t.param(ps, 5));
    });
    CHECK(err < 1e-5);
  }

  TEST_CASE("every primitive passes a gradient check") {
    std::mt19937_64 rng(23);
    ParameterSet ps;
    const std::size_t a = ps.add_uniform("a", {4}, 1.0, rng);
    const std::size_t b = ps.add_uniform("b", {4}, 1.0, rng);
    const std::size_t m = ps.add_uniform("m", {3, 4}, 1.0, rng);
    const std::size_t n = ps.add_uniform("n", {2, 4}, 1.0, rng);
    const std::size_t c = ps.add_uniform("c", {3}, 1.0, rng);
    ps[a].value[0] += 2.0;  // keep maxout pairs apart from ties
    const double err = testing::max_gradient_error(ps, [&](Tape& t) {
      const Var va = t.param(ps, a), vb = t.param(ps, b), vm = t.param(ps, m), vn = t.param(ps, n);
      const Var vc = t.param(ps, c);
      std::vector<Var> terms;
      terms.push_back(sum(mul(matvec(vm, va), vc)));
      terms.push_back(dot(matvec_t(vm, vc), vb));
      terms.push_back(sum(tanh(matmul_nt(vm, vn))));
      terms.push_back(sum(sigmoid(sub(va, vb))));
      terms.push_back(pick(softmax(va), 2));
      terms.push_back(cross_entropy(vb, 1));
      terms.push_back(sum(maxout(va, 2)));
      terms.push_back(sum(scale(one_minus(vb), 0.5)));
      terms.push_back(sum(log(add(mul(va, va), t.constant(Tensor::vector({1, 1, 1, 1}))))));
      const std::array<Var, 2> parts{va, slice(vb, 1, 2)};
      terms.push_back(dot(concat(parts), concat(parts)));
      const std::array<Var, 2> rows{row(vm, 2), row(vn, 0)};
      terms.push_back(sum(tanh(add_row_bias(stack_rows(rows), vb))));
      return add_n(terms);
    });
    CHECK(err < 1e-5);
  }

  TEST_CASE("frozen parameter sets receive no gradient") {
    ParameterSet ps;
    ps.add("x", Tensor::vector({1, 2}));
    Tape t;
    t.freeze(ps);
    const Var x = t.param(ps, 0);
    CHECK_FALSE(t.requires_grad(x));
  }

  TEST_CASE("non-finite values are rejected") {
    Tape t;
    CHECK_THROWS_AS(log(t.constant(Tensor::vector({-1.0}))), Error);
  }

  TEST_CASE("AdaDelta: first step, second step, zero gradient") {
    const double rho = 0.95, eps = 1e-6;
    ParameterSet ps;
    ps.add("x", Tensor::vector({0.0}));
    AdaDelta opt(ps, rho, eps);
    Gradients g(ps);
    g[0][0] = 1.0;
    opt.step(ps, g);
    const double d1 = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
    CHECK(std::abs(ps[0].value[0] - d1) < 1e-9);
    CHECK(std::abs(d1 - (-4.472e-3)) < 1e-6);

    opt.step(ps, g);
    // E[g^2] = 0.95*0.05 + 0.05, E[dx^2] = 0.05*d1^2
    const double d2 = -std::sqrt(0.05 * d1 * d1 + eps) / std::sqrt(0.95 * 0.05 + 0.05 + eps);
    CHECK(std::abs(ps[0].value[0] - (d1 + d2)) < 1e-12);

    const double eg = opt.mean_sq_grad()[0][0], edx = opt.mean_sq_delta()[0][0];
    const double before = ps[0].value[0];
    g.zero();
    opt.step(ps, g);
    CHECK(ps[0].value[0] == before);
    CHECK(opt.mean_sq_grad()[0][0] == doctest::Approx(rho * eg));
    CHECK(opt.mean_sq_delta()[0][0] == doctest::Approx(rho * edx));
  }

  TEST_CASE("global norm clipping") {
    ParameterSet ps;
    ps.add("x", Tensor::vector({0, 0}));
    Gradients g(ps);
    g[0][0] = 3.0;
    g[0][1] = 4.0;
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g.norm() == doctest::Approx(1.0));
    CHECK(clip_global_norm(g, 5.0) == doctest::Approx(1.0));
    CHECK(g.norm() == doctest::Approx(1.0));
  }

  TEST_CASE("checkpoint round trip preserves values bitwise") {
    std::mt19937_64 rng(1);
    ParameterSet ps;
    ps.add_uniform("enc.w", {3, 4}, 0.1, rng);
    ps.add_uniform("enc.b", {4}, 0.1, rng);
    const auto path = std::filesystem::temp_directory_path() / "mnmt_ckpt.bin";
    save_checkpoint(path, to_named(ps, "model."), artifact_header("", 1));
    const ParameterSet back = from_named(load_checkpoint(path), "model.");
    CHECK(back.checksum() == ps.checksum());
    CHECK(back[back.index_of("enc.w")].value == ps[0].value);
    CHECK(std::filesystem::exists(path.string() + ".manifest"));
  }

  TEST_CASE("checksum changes when a value changes") {
    ParameterSet ps;
    ps.add("x", Tensor::vector({1, 2}));
    const auto before = ps.checksum();
    ps[0].value[1] = 2.0000001;
    CHECK(ps.checksum() != before);
  }
}
