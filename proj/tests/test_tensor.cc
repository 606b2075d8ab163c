#include <cmath>
#include <vector>

#include "crur/error.h"
#include "crur/tensor.h"
#include "doctest.h"
#include "gradcheck.h"

using namespace crur;
using testing::grad_check;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("construction and invariants") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor::zeros({0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, -1}), DimensionError);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK(Tensor::scalar(4.5).item() == 4.5);
  CHECK_THROWS_AS(Tensor::zeros({3}).item(), RankError);

  // Handle semantics: copies alias, clone detaches.
  Tensor a = Tensor::full({2}, 1.0);
  Tensor b = a;
  b.data()[0] = 7.0;
  CHECK(a.at(0) == 7.0);
  Tensor c = a.clone();
  c.data()[0] = 9.0;
  CHECK(a.at(0) == 7.0);
}

TEST_CASE("matmul identity and hand values") {
  Tensor a = Tensor::from_data({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor eye = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.0;
  Tensor p = ops::matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(p.at(i) == a.at(i));

  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor v = Tensor::from_data({2, 1}, {1, 1});
  Tensor r = ops::matmul(m, v);
  CHECK(r.at(0) == 3.0);
  CHECK(r.at(1) == 7.0);

  CHECK_THROWS_AS(ops::matmul(m, Tensor::zeros({3, 2})), DimensionError);
  CHECK_THROWS_AS(ops::matmul(m, Tensor::zeros({2})), DimensionError);
}

TEST_CASE("matmul gradient vs central differences") {
  Rng rng(11);
  Tensor a = random_tensor({5, 4}, rng);
  Tensor b = random_tensor({4, 3}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto rep = grad_check({a, b},
                        [&] { return ops::sum(ops::matmul(a, b)); });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("elementwise hand values and errors") {
  Tensor z = Tensor::scalar(0.0);
  CHECK(ops::sigmoid(z).item() == 0.5);
  CHECK(ops::tanh(z).item() == 0.0);

  Tensor a = Tensor::from_data({3}, {1, 2, 3});
  Tensor b = Tensor::from_data({3}, {4, 5, 6});
  Tensor s = ops::add(a, b);
  CHECK(s.at(0) == 5.0);
  CHECK(s.at(2) == 9.0);
  CHECK(ops::sub(b, a).at(1) == 3.0);
  CHECK(ops::mul(a, b).at(2) == 18.0);
  CHECK_THROWS_AS(ops::add(a, Tensor::zeros({4})), DimensionError);
  CHECK_THROWS_AS(ops::mul(a, Tensor::zeros({3, 1})), DimensionError);
}

TEST_CASE("elementwise gradients vs central differences") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({3, 3}, rng);
    Tensor b = random_tensor({3, 3}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto mulrep =
        grad_check({a, b}, [&] { return ops::sum(ops::mul(a, b)); });
    CHECK(mulrep.max_rel_err < 1e-6);
    auto mixrep = grad_check({a, b}, [&] {
      Tensor y = ops::sigmoid(ops::add(ops::mul(a, b), ops::sub(a, b)));
      return ops::sum(ops::mul(y, ops::tanh(y)));
    });
    CHECK(mixrep.max_rel_err < 1e-4);
  }
}

TEST_CASE("outer product values and gradient") {
  Tensor u = Tensor::from_data({2}, {1, 0});
  Tensor v = Tensor::from_data({2}, {0, 1});
  Tensor o = ops::outer(u, v);
  CHECK(o.at(0) == 0.0);
  CHECK(o.at(1) == 1.0);
  CHECK(o.at(2) == 0.0);
  CHECK(o.at(3) == 0.0);
  CHECK(ops::outer(Tensor::from_data({1}, {2}), Tensor::from_data({1}, {3}))
            .item() == 6.0);
  CHECK_THROWS_AS(ops::outer(Tensor::zeros({2, 2}), v), RankError);

  Rng rng(13);
  Tensor x = random_tensor({4}, rng);
  Tensor y = random_tensor({6}, rng);
  x.set_requires_grad(true);
  y.set_requires_grad(true);
  Tensor w = random_tensor({4, 6}, rng);  // fixed weighting, not a leaf
  auto rep = grad_check(
      {x, y}, [&] { return ops::sum(ops::mul(ops::outer(x, y), w)); });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("softmax_log shift invariance and normalization") {
  for (double c : {0.0, -3.5, 100.0}) {
    Tensor x = Tensor::full({3}, c);
    Tensor y = ops::softmax_log(x);
    for (int i = 0; i < 3; ++i)
      CHECK(std::fabs(y.at(i) - std::log(1.0 / 3.0)) < 1e-12);
  }
  CHECK(ops::softmax_log(Tensor::scalar(0.0)).item() == 0.0);

  Rng rng(14);
  Tensor x = random_tensor({10}, rng);
  Tensor y = ops::softmax_log(x);
  double z = 0;
  for (int i = 0; i < 10; ++i) z += std::exp(y.at(i));
  CHECK(std::fabs(z - 1.0) < 1e-12);

  // x + c*1 gives the same distribution to floating-point noise.
  Tensor xs = x.clone();
  for (int i = 0; i < 10; ++i) xs.data()[i] += 17.25;
  Tensor ys = ops::softmax_log(xs);
  for (int i = 0; i < 10; ++i) CHECK(std::fabs(ys.at(i) - y.at(i)) < 1e-12);

  CHECK_THROWS_AS(ops::softmax_log(Tensor::zeros({2, 2})), RankError);
}

TEST_CASE("softmax_log gradient") {
  Rng rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({7}, rng);
    x.set_requires_grad(true);
    Tensor w = random_tensor({7}, rng);
    auto rep = grad_check(
        {x}, [&] { return ops::sum(ops::mul(ops::softmax_log(x), w)); });
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("dropout behavior") {
  Rng rng(16);
  Tensor x = Tensor::full({10}, 2.0);
  Tensor same = ops::dropout(x, 0.0, true, rng);
  for (int i = 0; i < 10; ++i) CHECK(same.at(i) == 2.0);
  Tensor inference = ops::dropout(x, 0.5, false, rng);
  for (int i = 0; i < 10; ++i) CHECK(inference.at(i) == 2.0);
  CHECK_THROWS_AS(ops::dropout(x, 1.0, true, rng), ParameterError);
  CHECK_THROWS_AS(ops::dropout(x, -0.1, true, rng), ParameterError);

  // Inverted scaling keeps the expectation: 1e5 ones at rate 0.5.
  Tensor ones = Tensor::full({100000}, 1.0);
  Rng drop_rng(123);
  Tensor dropped = ops::dropout(ones, 0.5, true, drop_rng);
  double mean = 0;
  for (int i = 0; i < dropped.numel(); ++i) mean += dropped.at(i);
  mean /= dropped.numel();
  CHECK(mean > 0.98);
  CHECK(mean < 1.02);

  // Same seed, same mask.
  Rng r1(77), r2(77);
  Tensor d1 = ops::dropout(ones, 0.5, true, r1);
  Tensor d2 = ops::dropout(ones, 0.5, true, r2);
  for (int i = 0; i < 1000; ++i) CHECK(d1.at(i) == d2.at(i));
}

TEST_CASE("dropout gradient replays the mask") {
  Tensor x = Tensor::full({64}, 3.0);
  x.set_requires_grad(true);
  Tape tape;
  Rng rng(9);
  Tensor y = ops::dropout(x, 0.5, true, rng);
  Tensor l = ops::sum(y);
  tape.backward(l);
  Tensor g = tape.grad(x);
  for (int i = 0; i < 64; ++i) {
    const double expected = y.at(i) == 0.0 ? 0.0 : 2.0;
    CHECK(g.at(i) == expected);
  }
}

TEST_CASE("backward basic analytic gradients") {
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  {
    Tape tape;
    Tensor l = ops::sum(x);
    tape.backward(l);
    Tensor g = tape.grad(x);
    CHECK(g.shape() == x.shape());
    for (int i = 0; i < 6; ++i) CHECK(g.at(i) == 1.0);
  }

  Tensor v = Tensor::from_data({3}, {1, 2, 3});
  v.set_requires_grad(true);
  {
    Tape tape;
    Tensor l = ops::sum(ops::mul(v, v));
    tape.backward(l);
    Tensor g = tape.grad(v);
    CHECK(g.at(0) == 2.0);
    CHECK(g.at(1) == 4.0);
    CHECK(g.at(2) == 6.0);
  }

  {
    Tape tape;
    Tensor y = ops::mul(v, v);
    CHECK_THROWS_AS(tape.backward(y), RankError);
  }
}

TEST_CASE("structural ops values and gradients") {
  Rng rng(17);
  Tensor m = random_tensor({3, 4}, rng);
  m.set_requires_grad(true);

  Tensor r1 = ops::row(m, 1);
  for (int j = 0; j < 4; ++j) CHECK(r1.at(j) == m.at(4 + j));
  CHECK_THROWS_AS(ops::row(m, 3), IndexError);
  CHECK_THROWS_AS(ops::row(m, -1), IndexError);
  CHECK_THROWS_AS(ops::row(Tensor::zeros({3}), 0), RankError);

  Tensor flat = ops::reshape(m, {12});
  CHECK(flat.rank() == 1);
  CHECK_THROWS_AS(ops::reshape(m, {5, 2}), DimensionError);

  Tensor a = Tensor::from_data({2}, {1, 2});
  Tensor b = Tensor::from_data({3}, {3, 4, 5});
  Tensor cat = ops::concat(a, b);
  CHECK(cat.numel() == 5);
  CHECK(cat.at(4) == 5.0);
  CHECK_THROWS_AS(ops::concat(m, b), RankError);

  CHECK(ops::pick(m, 5).item() == m.at(5));
  CHECK_THROWS_AS(ops::pick(m, 12), IndexError);
  CHECK(ops::scale(a, 2.5).at(1) == 5.0);

  Tensor u = random_tensor({4}, rng);
  Tensor w = random_tensor({6}, rng);
  u.set_requires_grad(true);
  w.set_requires_grad(true);
  auto rep = grad_check({m, u, w}, [&] {
    Tensor head = ops::concat(ops::row(m, 0), u);          // [8]
    Tensor grid = ops::reshape(ops::concat(head, ops::scale(w, 0.5)), {2, 7});
    Tensor probe = ops::pick(grid, 3);
    return ops::add(ops::sum(ops::sigmoid(grid)), probe);
  });
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("chained reuse accumulates gradient") {
  // x feeds two paths; grads must add.
  Tensor x = Tensor::from_data({2}, {0.3, -0.7});
  x.set_requires_grad(true);
  auto rep = grad_check({x}, [&] {
    Tensor s = ops::sigmoid(x);
    Tensor t = ops::tanh(x);
    return ops::sum(ops::add(ops::mul(s, t), ops::mul(x, x)));
  });
  CHECK(rep.max_rel_err < 1e-4);

  // Value check too: d/dx [x^2] alone at detach-free reuse.
  Tape tape;
  Tensor l = ops::sum(ops::mul(x, x));
  tape.backward(l);
  CHECK(std::fabs(tape.grad(x).at(0) - 0.6) < 1e-15);
}

TEST_CASE("gradient soundness sweep over exposed ops") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({3, 2}, rng);
    Tensor b = random_tensor({3, 2}, rng);
    Tensor c = random_tensor({2, 3}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    c.set_requires_grad(true);
    auto rep = grad_check({a, b, c}, [&] {
      Tensor prod = ops::matmul(ops::add(a, b), c);           // [3,3]
      Tensor gate = ops::sigmoid(prod);
      Tensor cand = ops::tanh(ops::sub(prod, gate));
      Tensor flat = ops::reshape(ops::mul(gate, cand), {9});
      Tensor lp = ops::softmax_log(flat);
      return ops::sub(ops::sum(ops::mul(lp, flat)), ops::pick(lp, 2));
    });
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("determinism of taped runs") {
  auto run = [] {
    Rng rng(42);
    Tensor x = random_tensor({4, 4}, rng);
    x.set_requires_grad(true);
    Tape tape;
    Rng drop(7);
    Tensor y = ops::dropout(ops::sigmoid(ops::matmul(x, x)), 0.3, true, drop);
    Tensor l = ops::sum(y);
    tape.backward(l);
    Tensor g = tape.grad(x);
    std::vector<double> out(g.data(), g.data() + g.numel());
    out.push_back(l.item());
    return out;
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(r1 == r2);
}

TEST_CASE("grad of unreached leaf is zeros; untaped runs stay untaped") {
  Tensor x = Tensor::from_data({2}, {1, 2});
  Tensor y = Tensor::from_data({2}, {3, 4});
  x.set_requires_grad(true);
  y.set_requires_grad(true);
  Tensor z;
  {
    Tape tape;
    Tensor l = ops::sum(ops::mul(x, x));
    tape.watch(y);  // registered but not part of the graph
    tape.backward(l);
    Tensor gy = tape.grad(y);
    CHECK(gy.at(0) == 0.0);
    CHECK(gy.at(1) == 0.0);
  }
  // With no active tape nothing records, even with requires_grad set.
  z = ops::mul(x, y);
  CHECK(z.node() == -1);
  Tape other;
  CHECK_THROWS_AS(other.grad(z), ParameterError);
}

TEST_CASE("fresh tape does not inherit stale bindings") {
  Tensor x = Tensor::from_data({2}, {1, 2});
  x.set_requires_grad(true);
  {
    Tape tape;
    Tensor l = ops::sum(x);
    tape.backward(l);
  }
  // A second tape at (possibly) the same address must re-watch x cleanly.
  Tape tape2;
  Tensor l2 = ops::sum(ops::mul(x, x));
  tape2.backward(l2);
  CHECK(tape2.grad(x).at(1) == 4.0);
}

TEST_CASE("all_finite flags bad values") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0});
  CHECK(all_finite(x));
  x.data()[1] = std::nan("");
  CHECK(!all_finite(x));
  x.data()[1] = 1e308 * 10;  // inf
  CHECK(!all_finite(x));
}

}  // TEST_SUITE
