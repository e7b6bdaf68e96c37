// Copyright 2026 The lewisim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lewisim/tensor.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "lewisim/rng.hpp"
#include "support/gradcheck.hpp"

using namespace lewisim;
using lewisim::testing::finite_diff_grad;
using lewisim::testing::max_rel_err;

namespace {

Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform_range(lo, hi);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("matmul basics") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor m({2, 2}, {3, 4, 5, 6});
  CHECK(matmul(eye, m).data() == std::vector<double>{3, 4, 5, 6});

  const Tensor a({1, 2}, {1, 2});
  const Tensor b({2, 1}, {3, 4});
  CHECK(matmul(a, b).item() == 11.0);

  CHECK_THROWS_MATCHES(matmul(a, a), ShapeError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("[1,2]")));
}

TEST_CASE("matmul gradient matches finite differences") {
  RngStream rng(7, 0);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor x = random_tensor({4, 2}, rng);

  Tape tape;
  tape.backward(reduce_sum(matmul(tape.use(w), x)));
  const auto fd = finite_diff_grad(
      w, [&] { return reduce_sum(matmul(w, x)).item(); });
  CHECK(max_rel_err(tape.grad(w).data(), fd) < 1e-6);
}

TEST_CASE("add and mul elementwise") {
  CHECK(add(Tensor({2}, {1, 2}), Tensor({2}, {0, 0})).data() ==
        std::vector<double>{1, 2});
  CHECK(mul(Tensor({2}, {2, 3}), Tensor({2}, {4, 5})).data() ==
        std::vector<double>{8, 15});
  CHECK_THROWS_AS(add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), ShapeError);

  // Bias broadcast along the last axis.
  const Tensor m({2, 2}, {1, 2, 3, 4});
  const Tensor bias({2}, {10, 20});
  CHECK(add(m, bias).data() == std::vector<double>{11, 22, 13, 24});
}

TEST_CASE("detach blocks exactly one path of x*detach(x)") {
  Tensor x = Tensor::scalar(3.0);
  Tape tape;
  const Tensor tx = tape.use(x);
  tape.backward(mul(tx, detach(tx)));
  // d(x * const)/dx = const = 3; the detached path contributes nothing.
  CHECK(tape.grad(x).item() == 3.0);
}

TEST_CASE("activations") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(relu(Tensor::scalar(-2.0)).item() == 0.0);

  Tensor x({2}, {0.3, -1.1});
  Tape tape;
  tape.backward(reduce_sum(tanh(tape.use(x))));
  const auto fd =
      finite_diff_grad(x, [&] { return reduce_sum(tanh(x)).item(); });
  CHECK(max_rel_err(tape.grad(x).data(), fd) < 1e-6);
}

TEST_CASE("softmax values") {
  const Tensor uniform = softmax(Tensor({4}, {0, 0, 0, 0}));
  for (double p : uniform.data()) CHECK(p == 0.25);

  // Max-subtraction keeps large logits finite.
  const Tensor stable = softmax(Tensor({2}, {1000.0, 0.0}));
  CHECK(stable.data()[0] == Catch::Approx(1.0));
  CHECK(std::isfinite(stable.data()[1]));

  const Tensor handeval = softmax(Tensor({2}, {std::log(2.0), 0.0}));
  CHECK(handeval.data()[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(handeval.data()[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and entropy is bounded") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + rng.uniform_int(6);
    const Tensor logits = random_tensor({3, n}, rng, -30.0, 30.0);
    const Tensor p = softmax(logits);
    for (int r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (int c = 0; c < n; ++c) sum += p.data()[r * n + c];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    const Tensor h = entropy_categorical(logits);
    for (int r = 0; r < 3; ++r) {
      CHECK(h.data()[r] >= 0.0);
      CHECK(h.data()[r] <= std::log(static_cast<double>(n)) + 1e-12);
    }
  }
}

TEST_CASE("entropy values") {
  CHECK(entropy_categorical(Tensor({4}, {7, 7, 7, 7})).item() ==
        Catch::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(entropy_categorical(Tensor({3}, {50, 0, 0})).item() ==
        Catch::Approx(0.0).margin(1e-12));
  // p = [2/3, 1/3]: H = ln 3 - (2/3) ln 2.
  const double expected = std::log(3.0) - (2.0 / 3.0) * std::log(2.0);
  CHECK(entropy_categorical(Tensor({2}, {std::log(2.0), 0.0})).item() ==
        Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("reduce") {
  CHECK(reduce_sum(Tensor({3}, {1, 2, 3})).item() == 6.0);
  CHECK(reduce_mean(Tensor({2}, {2, 4})).item() == 3.0);
  CHECK_THROWS_AS(reduce_sum(Tensor({2, 2}, {1, 2, 3, 4}), 2), ShapeError);

  Tensor x({4}, {1, 2, 3, 4});
  Tape tape;
  tape.backward(reduce_mean(tape.use(x)));
  CHECK(tape.grad(x).data() == std::vector<double>{0.25, 0.25, 0.25, 0.25});

  const Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(reduce_sum(m, 0).data() == std::vector<double>{5, 7, 9});
  CHECK(reduce_sum(m, 1).data() == std::vector<double>{6, 15});
  CHECK(reduce_mean(m, 1).data() == std::vector<double>{2, 5});
}

TEST_CASE("concat and gather_rows") {
  const Tensor left({2, 1}, {1, 2});
  const Tensor right({2, 1}, {3, 4});
  CHECK(concat({left, right}, 1).data() == std::vector<double>{1, 3, 2, 4});

  const Tensor eye3({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(gather_rows(eye3, {2, 0}).data() ==
        std::vector<double>{0, 0, 1, 1, 0, 0});
  CHECK_THROWS_AS(gather_rows(eye3, {3}), ValueError);
}

TEST_CASE("gather backward scatter-adds repeated rows") {
  Tensor table({2, 2}, {1, 2, 3, 4});
  Tape tape;
  tape.backward(reduce_sum(gather_rows(tape.use(table), {0, 0})));
  CHECK(tape.grad(table).data() == std::vector<double>{2, 2, 0, 0});
}

TEST_CASE("detach is a projection with zero gradient") {
  Tensor x = Tensor::scalar(5.0);
  Tensor y = Tensor::scalar(2.0);

  const Tensor d1 = detach(x);
  const Tensor d2 = detach(d1);
  CHECK(d1.data() == x.data());
  CHECK(d2.data() == d1.data());

  Tape tape;
  const Tensor tx = tape.use(x);
  const Tensor ty = tape.use(y);
  tape.backward(mul(detach(tx), ty));
  CHECK(tape.grad(x).item() == 0.0);  // blocked path
  CHECK(tape.grad(y).item() == 5.0);  // d(const * y)/dy = const = x
}

TEST_CASE("backward basics") {
  Tensor theta({3}, {1, 2, 3});

  SECTION("sum gives ones") {
    Tape tape;
    tape.backward(reduce_sum(tape.use(theta)));
    CHECK(tape.grad(theta).data() == std::vector<double>{1, 1, 1});
  }

  SECTION("zero-scaled loss gives zeros") {
    Tape tape;
    tape.backward(scale(reduce_sum(tanh(tape.use(theta))), 0.0));
    CHECK(tape.grad(theta).data() == std::vector<double>{0, 0, 0});
  }

  SECTION("non-scalar loss is a contract error") {
    Tape tape;
    const Tensor t = tape.use(theta);
    CHECK_THROWS_AS(tape.backward(t), ShapeError);
  }

  SECTION("untouched parameters get zero gradients") {
    Tensor unused({2}, {1, 1});
    Tape tape;
    tape.use(unused);
    tape.backward(reduce_sum(tape.use(theta)));
    CHECK(tape.grad(unused).data() == std::vector<double>{0, 0});
  }

  SECTION("repeated backward accumulates; reset clears") {
    Tape tape;
    const Tensor loss = reduce_sum(tape.use(theta));
    tape.backward(loss);
    tape.backward(loss);
    CHECK(tape.grad(theta).data() == std::vector<double>{2, 2, 2});
    tape.reset_grads();
    tape.backward(loss);
    CHECK(tape.grad(theta).data() == std::vector<double>{1, 1, 1});
  }
}

TEST_CASE("backward is deterministic") {
  RngStream rng(23, 0);
  Tensor w1 = random_tensor({4, 5}, rng);
  Tensor w2 = random_tensor({3, 4}, rng);
  Tensor x = random_tensor({2, 5}, rng);

  auto run = [&] {
    Tape tape;
    const Tensor h = tanh(matmul(x, transpose(tape.use(w1))));
    const Tensor y = matmul(h, transpose(tape.use(w2)));
    tape.backward(reduce_sum(softmax(y)));
    return std::make_pair(tape.grad(w1).data(), tape.grad(w2).data());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);    // bit-identical
  CHECK(a.second == b.second);
}

TEST_CASE("two-layer MLP gradients match finite differences") {
  RngStream rng(31, 0);
  Tensor w1 = random_tensor({6, 5}, rng);
  Tensor b1 = random_tensor({6}, rng);
  Tensor w2 = random_tensor({3, 6}, rng);
  Tensor b2 = random_tensor({3}, rng);
  const Tensor x = random_tensor({4, 5}, rng);

  auto loss_value = [&] {
    const Tensor h = tanh(add(matmul(x, transpose(w1)), b1));
    const Tensor y = add(matmul(h, transpose(w2)), b2);
    return reduce_sum(mul(y, y)).item();
  };

  Tape tape;
  const Tensor h = tanh(add(matmul(x, transpose(tape.use(w1))), tape.use(b1)));
  const Tensor y = add(matmul(h, transpose(tape.use(w2))), tape.use(b2));
  tape.backward(reduce_sum(mul(y, y)));

  for (Tensor* p : {&w1, &b1, &w2, &b2}) {
    const auto fd = finite_diff_grad(*p, loss_value);
    CHECK(max_rel_err(tape.grad(*p).data(), fd) < 1e-5);
  }
}

TEST_CASE("randomized per-op finite-difference consistency") {
  RngStream rng(41, 0);
  for (int trial = 0; trial < 8; ++trial) {
    Tensor x = random_tensor({3, 4}, rng);
    const Tensor other = random_tensor({3, 4}, rng);
    const Tensor bias = random_tensor({4}, rng);
    const std::vector<int> pick = {1, 3, 0};

    struct Case {
      const char* name;
      std::function<Tensor(const Tensor&)> apply;
    };
    const std::vector<Case> cases = {
        {"sigmoid", [](const Tensor& t) { return sigmoid(t); }},
        {"relu", [](const Tensor& t) { return relu(t); }},
        {"exp", [](const Tensor& t) { return scale(exp(scale(t, 0.3)), 0.5); }},
        {"softmax", [](const Tensor& t) { return softmax(t); }},
        {"log_softmax", [](const Tensor& t) { return log_softmax(t); }},
        {"entropy", [](const Tensor& t) { return entropy_categorical(t); }},
        {"mul_bias", [&](const Tensor& t) { return mul(t, bias); }},
        {"sub", [&](const Tensor& t) { return sub(t, other); }},
        {"select", [&](const Tensor& t) { return select_last(t, pick); }},
        {"reshape",
         [](const Tensor& t) { return reshape(t, {2, 6}); }},
        {"transpose", [](const Tensor& t) { return transpose(t); }},
        {"reduce0", [](const Tensor& t) { return reduce_mean(t, 0); }},
        {"concat",
         [&](const Tensor& t) { return concat({t, other}, 1); }},
    };
    for (const auto& c : cases) {
      INFO(c.name);
      Tape tape;
      // Weighted sum makes the scalar loss sensitive to every output entry.
      const Tensor out = c.apply(tape.use(x));
      std::vector<double> w(out.size());
      for (size_t i = 0; i < w.size(); ++i) w[i] = 0.1 * (i + 1);
      const Tensor weights(out.shape(), std::move(w));
      tape.backward(reduce_sum(mul(out, weights)));

      const auto fd = finite_diff_grad(x, [&] {
        const Tensor o = c.apply(x);
        return reduce_sum(mul(o, weights)).item();
      });
      CHECK(max_rel_err(tape.grad(x).data(), fd) < 1e-5);
    }
  }
}

TEST_CASE("mixing tapes is rejected") {
  Tensor a = Tensor::scalar(1.0);
  Tensor b = Tensor::scalar(2.0);
  Tape t1, t2;
  const Tensor ta = t1.use(a);
  const Tensor tb = t2.use(b);
  CHECK_THROWS_AS(mul(ta, tb), ValueError);
}
