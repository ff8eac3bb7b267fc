// Unit tests for the autodiff tensor engine and the optimizer.
#include <cmath>
#include <vector>

#include "doctest.h"
#include "jssm/optim.hpp"
#include "jssm/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace jssm;
using jssm::testing::grad_check;

namespace {

// Scalarizes an arbitrary-shape output with fixed random weights so the
// finite-difference oracle sees a non-uniform upstream gradient.
Tensor weighted_sum(const Tensor& t, const Tensor& w) { return sum(mul(t, w)); }

bool all_finite(const Tensor& t) {
  for (double x : t.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and direct products") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor p = matmul(eye, m);
  CHECK(p.data()[0] == doctest::Approx(1));
  CHECK(p.data()[1] == doctest::Approx(2));
  CHECK(p.data()[2] == doctest::Approx(3));
  CHECK(p.data()[3] == doctest::Approx(4));

  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor b = Tensor::from({2, 1}, {3, 4});
  CHECK(matmul(a, b).item() == doctest::Approx(11));
}

TEST_CASE("matmul shape errors name both shapes") {
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({5, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(3,4)"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(5,2)"), ShapeError);
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({4})), ShapeError);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(17);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
  Tensor w = Tensor::randn({3, 2}, rng);
  auto res = grad_check({a, b}, [&] { return weighted_sum(matmul(a, b), w); });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("softmax values") {
  Tensor x = Tensor::from({2}, {0, 0});
  Tensor y = softmax(x, 0);
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(0.5));

  // Exp-normalize oracle, computed independently of the implementation.
  Tensor z = softmax(Tensor::from({3}, {1, 2, 3}), 0);
  double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(z.data()[0] == doctest::Approx(std::exp(1.0) / denom).epsilon(1e-9));
  CHECK(z.data()[1] == doctest::Approx(std::exp(2.0) / denom).epsilon(1e-9));
  CHECK(z.data()[2] == doctest::Approx(std::exp(3.0) / denom).epsilon(1e-9));
  CHECK(z.data()[0] == doctest::Approx(0.090031).epsilon(1e-5));
  CHECK(z.data()[1] == doctest::Approx(0.244728).epsilon(1e-5));
  CHECK(z.data()[2] == doctest::Approx(0.665241).epsilon(1e-5));
}

TEST_CASE("softmax is overflow-safe and normalized") {
  Tensor big = softmax(Tensor::from({3}, {1000, 1001, -1000}), 0);
  CHECK(all_finite(big));
  Rng rng(5);
  for (int it = 0; it < 20; ++it) {
    Tensor x = Tensor::randn({4, 6}, rng, 5.0);
    for (int axis : {0, 1}) {
      Tensor y = softmax(x, axis);
      CHECK(all_finite(y));
      for (double v : y.data()) CHECK(v >= 0.0);
      const int lanes = axis == 0 ? 6 : 4;
      const int len = axis == 0 ? 4 : 6;
      for (int lane = 0; lane < lanes; ++lane) {
        double s = 0.0;
        for (int k = 0; k < len; ++k) {
          s += axis == 0 ? y.at({k, lane}) : y.at({lane, k});
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }
  CHECK_THROWS_AS(softmax(Tensor::zeros({2, 2}), 2), ContractError);
}

TEST_CASE("gelu values") {
  CHECK(gelu(Tensor::scalar(0.0)).item() == doctest::Approx(0.0));
  // erf-based CDF oracle
  const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
  CHECK(gelu(Tensor::scalar(1.0)).item() == doctest::Approx(1.0 * phi1).epsilon(1e-12));
  CHECK(gelu(Tensor::scalar(1.0)).item() == doctest::Approx(0.841345).epsilon(1e-5));
  CHECK(gelu(Tensor::scalar(10.0)).item() == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(std::abs(gelu(Tensor::scalar(10.0)).item() - 10.0) < 1e-6);
}

TEST_CASE("cosine values and degenerate input") {
  Tensor u = Tensor::from({3}, {1, 2, -1});
  CHECK(cosine(u, u).item() == doctest::Approx(1.0));
  CHECK(cosine(Tensor::from({2}, {1, 0}), Tensor::from({2}, {0, 1})).item() == doctest::Approx(0.0));
  CHECK(cosine(Tensor::from({2}, {1, 0}), Tensor::from({2}, {1, 1})).item() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(cosine(Tensor::from({2}, {1, 0}), Tensor::from({2}, {1, 1})).item() ==
        doctest::Approx(0.707107).epsilon(1e-5));
  CHECK_THROWS_AS(cosine(Tensor::zeros({3}), u), DegenerateInputError);
  CHECK_THROWS_AS(cosine(u, Tensor::zeros({3})), DegenerateInputError);
}

TEST_CASE("cosine range and positive-scaling invariants") {
  Rng rng(11);
  for (int it = 0; it < 20; ++it) {
    Tensor u = Tensor::randn({5}, rng);
    Tensor v = Tensor::randn({5}, rng);
    const double c = cosine(u, v).item();
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    const double k = rng.uniform(0.1, 10.0);
    Tensor ku = scale(u, k);
    CHECK(cosine(u, ku).item() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mse values and invariants") {
  Tensor y = Tensor::from({3}, {1, 0, 1});
  CHECK(mse(y, y).item() == doctest::Approx(0.0));
  CHECK(mse(Tensor::from({3}, {1, 0, 1}), Tensor::from({3}, {0, 0, 1})).item() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(mse(y, Tensor::zeros({4})), ShapeError);

  Rng rng(3);
  for (int it = 0; it < 20; ++it) {
    Tensor p = Tensor::randn({4}, rng);
    Tensor t = Tensor::randn({4}, rng);
    CHECK(mse(p, t).item() >= 0.0);
  }
}

TEST_CASE("mse gradient is (2/k)(pred - target)") {
  Rng rng(23);
  Tensor p = Tensor::randn({5}, rng, 1.0, true);
  Tensor t = Tensor::randn({5}, rng);
  Tensor loss = mse(p, t);
  backward(loss);
  for (int i = 0; i < 5; ++i) {
    const double expect = 2.0 / 5.0 * (p.data()[i] - t.data()[i]);
    CHECK(p.grad()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  auto res = grad_check({p}, [&] { return mse(p, t); });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("backward on sum of squares") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor loss = sum(mul(x, x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("unused parameter keeps a zero gradient") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor unused = Tensor::from({2}, {5, 5}, true);
  unused.zero_grad();
  backward(sum(mul(x, x)));
  CHECK(unused.grad()[0] == 0.0);
  CHECK(unused.grad()[1] == 0.0);
}

TEST_CASE("composite softmax-mse chain matches finite differences") {
  Rng rng(29);
  Tensor x = Tensor::randn({4}, rng, 1.0, true);
  Tensor target = Tensor::from({4}, {0, 1, 0, 0});
  auto res = grad_check({x}, [&] { return mse(softmax(x, 0), target); });
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("graph trace is topologically consistent") {
  Rng rng(31);
  Tensor a = Tensor::randn({3, 3}, rng, 1.0, true);
  Tensor b = Tensor::randn({3, 3}, rng, 1.0, true);
  Tensor loss = mean(gelu(matmul(add(a, b), transpose(b))));
  Graph g = Graph::trace(loss);
  CHECK(g.size() >= 6);
  CHECK(g.topologically_consistent());
}

TEST_CASE("gradient check sweep over every primitive") {
  // 20 random small tensors per primitive, double precision, h = 1e-5.
  for (int it = 0; it < 20; ++it) {
    Rng rng(1000 + it);

    {  // add / sub / mul
      Tensor a = Tensor::randn({2, 3}, rng, 1.0, true);
      Tensor b = Tensor::randn({2, 3}, rng, 1.0, true);
      Tensor w = Tensor::randn({2, 3}, rng);
      CHECK(grad_check({a, b}, [&] { return weighted_sum(add(a, b), w); }).max_rel_err < 1e-4);
      CHECK(grad_check({a, b}, [&] { return weighted_sum(sub(a, b), w); }).max_rel_err < 1e-4);
      CHECK(grad_check({a, b}, [&] { return weighted_sum(mul(a, b), w); }).max_rel_err < 1e-4);
    }
    {  // scale / mul_scalar
      Tensor a = Tensor::randn({4}, rng, 1.0, true);
      Tensor s = Tensor::randn({1}, rng, 1.0, true);
      Tensor w = Tensor::randn({4}, rng);
      CHECK(grad_check({a}, [&] { return weighted_sum(scale(a, -1.7), w); }).max_rel_err < 1e-4);
      CHECK(grad_check({a, s}, [&] { return weighted_sum(mul_scalar(a, s), w); }).max_rel_err <
            1e-4);
    }
    {  // add_rowvec
      Tensor m = Tensor::randn({3, 4}, rng, 1.0, true);
      Tensor v = Tensor::randn({4}, rng, 1.0, true);
      Tensor w = Tensor::randn({3, 4}, rng);
      CHECK(grad_check({m, v}, [&] { return weighted_sum(add_rowvec(m, v), w); }).max_rel_err <
            1e-4);
    }
    {  // matmul / transpose
      Tensor a = Tensor::randn({2, 4}, rng, 1.0, true);
      Tensor b = Tensor::randn({4, 3}, rng, 1.0, true);
      Tensor w = Tensor::randn({2, 3}, rng);
      CHECK(grad_check({a, b}, [&] { return weighted_sum(matmul(a, b), w); }).max_rel_err < 1e-4);
      Tensor wt = Tensor::randn({4, 2}, rng);
      CHECK(grad_check({a}, [&] { return weighted_sum(transpose(a), wt); }).max_rel_err < 1e-4);
    }
    {  // row / slice_rows / slice_cols
      Tensor m = Tensor::randn({4, 5}, rng, 1.0, true);
      Tensor wr = Tensor::randn({5}, rng);
      CHECK(grad_check({m}, [&] { return weighted_sum(row(m, 2), wr); }).max_rel_err < 1e-4);
      Tensor ws = Tensor::randn({2, 5}, rng);
      CHECK(grad_check({m}, [&] { return weighted_sum(slice_rows(m, 1, 2), ws); }).max_rel_err <
            1e-4);
      Tensor wc = Tensor::randn({4, 2}, rng);
      CHECK(grad_check({m}, [&] { return weighted_sum(slice_cols(m, 2, 2), wc); }).max_rel_err <
            1e-4);
    }
    {  // concat_cols / stack_rows / stack_scalars
      Tensor a = Tensor::randn({3, 2}, rng, 1.0, true);
      Tensor b = Tensor::randn({3, 1}, rng, 1.0, true);
      Tensor w = Tensor::randn({3, 3}, rng);
      CHECK(grad_check({a, b}, [&] { return weighted_sum(concat_cols({a, b}), w); }).max_rel_err <
            1e-4);
      Tensor r0 = Tensor::randn({4}, rng, 1.0, true);
      Tensor r1 = Tensor::randn({4}, rng, 1.0, true);
      Tensor wm = Tensor::randn({2, 4}, rng);
      CHECK(grad_check({r0, r1}, [&] { return weighted_sum(stack_rows({r0, r1}), wm); })
                .max_rel_err < 1e-4);
      Tensor s0 = Tensor::randn({1}, rng, 1.0, true);
      Tensor s1 = Tensor::randn({1}, rng, 1.0, true);
      Tensor wv = Tensor::randn({2}, rng);
      CHECK(grad_check({s0, s1}, [&] { return weighted_sum(stack_scalars({s0, s1}), wv); })
                .max_rel_err < 1e-4);
    }
    {  // gather_rows with repeated ids (checks gradient accumulation)
      Tensor table = Tensor::randn({5, 3}, rng, 1.0, true);
      std::vector<int> ids = {0, 3, 3, 1};
      Tensor w = Tensor::randn({4, 3}, rng);
      CHECK(grad_check({table}, [&] { return weighted_sum(gather_rows(table, ids), w); })
                .max_rel_err < 1e-4);
    }
    {  // sum / mean / dot
      Tensor a = Tensor::randn({6}, rng, 1.0, true);
      Tensor b = Tensor::randn({6}, rng, 1.0, true);
      CHECK(grad_check({a}, [&] { return sum(a); }).max_rel_err < 1e-4);
      CHECK(grad_check({a}, [&] { return mean(a); }).max_rel_err < 1e-4);
      CHECK(grad_check({a, b}, [&] { return dot(a, b); }).max_rel_err < 1e-4);
    }
    {  // mse / cosine
      Tensor p = Tensor::randn({5}, rng, 1.0, true);
      Tensor t = Tensor::randn({5}, rng, 1.0, true);
      CHECK(grad_check({p, t}, [&] { return mse(p, t); }).max_rel_err < 1e-4);
      CHECK(grad_check({p, t}, [&] { return cosine(p, t); }).max_rel_err < 1e-4);
    }
    {  // softmax both axes
      Tensor x = Tensor::randn({3, 4}, rng, 1.0, true);
      Tensor w = Tensor::randn({3, 4}, rng);
      CHECK(grad_check({x}, [&] { return weighted_sum(softmax(x, 0), w); }).max_rel_err < 1e-4);
      CHECK(grad_check({x}, [&] { return weighted_sum(softmax(x, 1), w); }).max_rel_err < 1e-4);
    }
    {  // gelu
      Tensor x = Tensor::randn({7}, rng, 2.0, true);
      Tensor w = Tensor::randn({7}, rng);
      CHECK(grad_check({x}, [&] { return weighted_sum(gelu(x), w); }).max_rel_err < 1e-4);
    }
    {  // layer_norm
      Tensor x = Tensor::randn({3, 6}, rng, 1.5, true);
      Tensor g = Tensor::randn({6}, rng, 0.5, true);
      Tensor b = Tensor::randn({6}, rng, 0.5, true);
      Tensor w = Tensor::randn({3, 6}, rng);
      CHECK(grad_check({x, g, b}, [&] { return weighted_sum(layer_norm(x, g, b), w); })
                .max_rel_err < 1e-4);
    }
    {  // dropout with a fixed in-closure seed so the mask is stable
      Tensor x = Tensor::randn({8}, rng, 1.0, true);
      Tensor w = Tensor::randn({8}, rng);
      auto fwd = [&] {
        Rng mask_rng(99);
        return weighted_sum(dropout(x, 0.4, mask_rng, true), w);
      };
      CHECK(grad_check({x}, fwd).max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("layer_norm stays finite on constant rows") {
  Tensor x = Tensor::full({2, 4}, 3.0);
  Tensor g = Tensor::full({4}, 1.0);
  Tensor b = Tensor::zeros({4});
  CHECK(all_finite(layer_norm(x, g, b)));
}

TEST_CASE("dropout identity and determinism") {
  Rng rng(7);
  Tensor x = Tensor::randn({10}, rng);
  Rng r1(123);
  Tensor eval_out = dropout(x, 0.5, r1, false);
  CHECK(eval_out.node() == x.node());  // identity in eval mode

  Rng r2(123), r3(123);
  Tensor a = dropout(x, 0.5, r2, true);
  Tensor b = dropout(x, 0.5, r3, true);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
  CHECK_THROWS_AS(dropout(x, 1.0, r2, true), ConfigError);
}

TEST_CASE("randn determinism") {
  Rng r1(55), r2(55);
  Tensor a = Tensor::randn({20}, r1);
  Tensor b = Tensor::randn({20}, r2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("optim");

TEST_CASE("zero gradient is a fixed point") {
  Tensor p = Tensor::scalar(1.5, true);
  p.zero_grad();
  Optimizer opt({p}, 0.1);
  opt.step();
  CHECK(p.item() == doctest::Approx(1.5));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam first step matches the reference formula") {
  // m1 = 0.1, v1 = 1e-3; bias-corrected to 1.0 each; delta = lr * 1/(1+eps).
  Tensor p = Tensor::scalar(1.0, true);
  p.zero_grad();
  backward(mul_scalar(p, Tensor::scalar(1.0)));  // d(p*1)/dp = 1
  CHECK(p.grad()[0] == doctest::Approx(1.0));
  Optimizer opt({p}, 0.1);
  opt.step();
  CHECK(p.item() == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("sgd rule") {
  Tensor p = Tensor::scalar(1.0, true);
  p.zero_grad();
  backward(mul_scalar(p, Tensor::scalar(1.0)));
  Optimizer opt({p}, 0.1, UpdateRule::sgd);
  opt.step();
  CHECK(p.item() == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("missing gradient is a contract error") {
  Tensor p = Tensor::scalar(1.0, true);
  Optimizer opt({p}, 0.1);
  CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("same seed gives bitwise-identical trajectories") {
  auto run = [] {
    Rng rng(77);
    Tensor p = Tensor::randn({6}, rng, 1.0, true);
    Tensor t = Tensor::randn({6}, rng);
    Optimizer opt({p}, 0.05);
    for (int step = 0; step < 5; ++step) {
      opt.zero_grad();
      backward(mse(p, t));
      opt.step();
    }
    return std::vector<double>(p.data().begin(), p.data().end());
  };
  auto a = run();
  auto b = run();
  CHECK(a == b);
}

TEST_CASE("learning rate must be positive") {
  Tensor p = Tensor::scalar(1.0, true);
  CHECK_THROWS_AS(Optimizer({p}, 0.0), ConfigError);
  CHECK_THROWS_AS(Optimizer({p}, -1.0), ConfigError);
}

TEST_SUITE_END();
