#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dyad/core/adam.hpp"
#include "dyad/core/layers.hpp"
#include "dyad/core/lstm.hpp"
#include "dyad/core/matrix.hpp"
#include "dyad/core/rng.hpp"
#include "support/gradcheck.hpp"

using namespace dyad;
using Catch::Approx;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal(0.0, scale);
  return m;
}

// Scalar probe loss: sum(output (.) R) for a fixed random R, so every output
// entry contributes to the gradient.
double probe_loss(const Matrix& y, const Matrix& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
  return acc;
}

}  // namespace

TEST_CASE("matrix multiply basics", "[core][matrix]") {
  Matrix a(2, 3);
  for (std::size_t i = 0; i < 6; ++i) a[i] = static_cast<double>(i + 1);
  Matrix b(3, 2);
  for (std::size_t i = 0; i < 6; ++i) b[i] = static_cast<double>(i);
  Matrix c = matmul(a, b);
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 2);
  // [1 2 3; 4 5 6] * [0 1; 2 3; 4 5]
  CHECK(c(0, 0) == Approx(16.0));
  CHECK(c(0, 1) == Approx(22.0));
  CHECK(c(1, 0) == Approx(34.0));
  CHECK(c(1, 1) == Approx(49.0));

  // transposed variants agree with explicit transposition
  Rng rng(7);
  Matrix x = random_matrix(4, 5, rng);
  Matrix w = random_matrix(3, 5, rng);
  Matrix y1 = matmul_nt(x, w);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += x(i, k) * w(j, k);
      CHECK(y1(i, j) == Approx(acc));
    }
  REQUIRE_THROWS_AS(matmul(a, a), DataError);
}

TEST_CASE("dense identity layer maps input to itself", "[core][layers]") {
  Dense d(2, 2);
  d.W = identity(2);
  Matrix x(1, 2);
  x[0] = 1.0;
  x[1] = 0.0;
  LayerCache cache;
  Matrix y = d.forward(x, cache);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 0.0);

  // upstream g passes through unchanged (linear map transpose of I)
  Matrix g(1, 2);
  g[0] = 0.3;
  g[1] = -2.0;
  LayerGrads grads;
  Matrix dx = d.backward(cache, g, grads);
  CHECK(dx[0] == Approx(0.3));
  CHECK(dx[1] == Approx(-2.0));
}

TEST_CASE("maxpool picks window maxima", "[core][layers]") {
  MaxPool1d p(1, 2, 4);
  Matrix x = Matrix::row_vector({1.0, 3.0, 2.0, 5.0});
  LayerCache cache;
  Matrix y = p.forward(x, cache);
  REQUIRE(y.cols() == 2);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 5.0);

  LayerGrads g;
  Matrix dy = Matrix::row_vector({1.0, 1.0});
  Matrix dx = p.backward(cache, dy, g);
  CHECK(dx[0] == 0.0);
  CHECK(dx[1] == 1.0);
  CHECK(dx[2] == 0.0);
  CHECK(dx[3] == 1.0);
}

TEST_CASE("conv1d computes valid cross-correlation", "[core][layers]") {
  Conv1d c(1, 1, 2, 1, 3);
  c.W(0, 0) = 1.0;
  c.W(0, 1) = -1.0;
  Matrix x = Matrix::row_vector({2.0, 2.0, 5.0});
  LayerCache cache;
  Matrix y = c.forward(x, cache);
  REQUIRE(y.cols() == 2);
  CHECK(y[0] == Approx(0.0));
  CHECK(y[1] == Approx(-3.0));
}

TEST_CASE("output length formulas hold for all valid geometries", "[core][layers]") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 2 + rng.index(40);
    const std::size_t kernel = 1 + rng.index(len);
    const std::size_t stride = 1 + rng.index(4);
    Conv1d c(1, 1, kernel, stride, len);
    Matrix x = random_matrix(1, len, rng);
    LayerCache cache;
    Matrix y = c.forward(x, cache);
    REQUIRE(y.cols() == (len - kernel) / stride + 1);

    const std::size_t width = 1 + rng.index(len);
    MaxPool1d p(1, width, len);
    Matrix yp = p.forward(x, cache);
    REQUIRE(yp.cols() == len / width);
  }
}

TEST_CASE("forward is pure", "[core][layers]") {
  Rng rng(3);
  Dense d(6, 4);
  d.init(rng);
  Matrix x = random_matrix(2, 6, rng);
  LayerCache c1, c2;
  Matrix y1 = d.forward(x, c1);
  Matrix y2 = d.forward(x, c2);
  REQUIRE(y1 == y2);
}

TEST_CASE("zero upstream gradient yields zero gradients everywhere", "[core][layers]") {
  Rng rng(5);
  Conv1d c(2, 3, 3, 1, 10);
  c.init(rng);
  Matrix x = random_matrix(2, 20, rng);
  LayerCache cache;
  Matrix y = c.forward(x, cache);
  Matrix dy(y.rows(), y.cols());
  LayerGrads g;
  Matrix dx = c.backward(cache, dy, g);
  for (std::size_t i = 0; i < dx.size(); ++i) CHECK(dx[i] == 0.0);
  for (std::size_t i = 0; i < g.dW.size(); ++i) CHECK(g.dW[i] == 0.0);
  for (std::size_t i = 0; i < g.db.size(); ++i) CHECK(g.db[i] == 0.0);
}

TEST_CASE("backward missing cache is rejected", "[core][layers]") {
  Dense d(2, 2);
  LayerCache empty;
  LayerGrads g;
  Matrix dy(1, 2);
  REQUIRE_THROWS_AS(d.backward(empty, dy, g), DataError);
}

TEST_CASE("analytic gradients match finite differences for every layer kind",
          "[core][gradients]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);

    SECTION("seed " + std::to_string(seed)) {
      // dense
      {
        Dense d(5, 4);
        d.init(rng);
        Matrix x = random_matrix(3, 5, rng);
        Matrix r = random_matrix(3, 4, rng);
        auto loss = [&] {
          LayerCache c;
          return probe_loss(d.forward(x, c), r);
        };
        LayerCache cache;
        Matrix y = d.forward(x, cache);
        LayerGrads g;
        Matrix dx = d.backward(cache, r, g);
        CHECK(dyad::test::max_grad_rel_err(d.W, g.dW, loss) < dyad::test::kFdTol);
        CHECK(dyad::test::max_grad_rel_err(d.b, g.db, loss) < dyad::test::kFdTol);
        CHECK(dyad::test::max_grad_rel_err(x, dx, loss) < dyad::test::kFdTol);
      }
      // conv1d
      {
        Conv1d cv(2, 3, 3, 2, 9);
        cv.init(rng);
        Matrix x = random_matrix(2, 18, rng);
        Matrix r = random_matrix(2, 3 * cv.out_len(), rng);
        auto loss = [&] {
          LayerCache c;
          return probe_loss(cv.forward(x, c), r);
        };
        LayerCache cache;
        cv.forward(x, cache);
        LayerGrads g;
        Matrix dx = cv.backward(cache, r, g);
        CHECK(dyad::test::max_grad_rel_err(cv.W, g.dW, loss) < dyad::test::kFdTol);
        CHECK(dyad::test::max_grad_rel_err(cv.b, g.db, loss) < dyad::test::kFdTol);
        CHECK(dyad::test::max_grad_rel_err(x, dx, loss) < dyad::test::kFdTol);
      }
      // maxpool (input gradient only; FD step small enough not to flip winners
      // for generic random input)
      {
        MaxPool1d mp(2, 2, 8);
        Matrix x = random_matrix(2, 16, rng);
        Matrix r = random_matrix(2, 8, rng);
        auto loss = [&] {
          LayerCache c;
          return probe_loss(mp.forward(x, c), r);
        };
        LayerCache cache;
        mp.forward(x, cache);
        LayerGrads g;
        Matrix dx = mp.backward(cache, r, g);
        CHECK(dyad::test::max_grad_rel_err(x, dx, loss) < dyad::test::kFdTol);
      }
      // activations
      for (Act act : {Act::tanh, Act::sigmoid, Act::relu, Act::identity}) {
        Activation a(act);
        Matrix x = random_matrix(2, 6, rng);
        // keep relu inputs away from the kink
        for (std::size_t i = 0; i < x.size(); ++i)
          if (std::fabs(x[i]) < 1e-3) x[i] = 0.5;
        Matrix r = random_matrix(2, 6, rng);
        auto loss = [&] {
          LayerCache c;
          return probe_loss(a.forward(x, c), r);
        };
        LayerCache cache;
        a.forward(x, cache);
        LayerGrads g;
        Matrix dx = a.backward(cache, r, g);
        CHECK(dyad::test::max_grad_rel_err(x, dx, loss) < dyad::test::kFdTol);
      }
    }
  }
}

TEST_CASE("lstm zero weights halve the cell state", "[core][lstm]") {
  LstmCell cell(3, 4);  // zero weights
  Matrix x(1, 3);
  Matrix h0(1, 4), c0(1, 4);
  for (std::size_t i = 0; i < 4; ++i) c0[i] = static_cast<double>(i) - 1.5;
  auto [h, c] = cell.step(x, h0, c0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c[i] == Approx(0.5 * c0[i]));
  }
  // zero input, zero prior state, zero weights -> h = 0
  Matrix cz(1, 4);
  auto [h2, c2] = cell.step(x, h0, cz);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(h2[i] == 0.0);
    CHECK(c2[i] == 0.0);
  }
}

TEST_CASE("lstm hidden output stays in (-1,1)", "[core][lstm]") {
  Rng rng(42);
  LstmCell cell(4, 6);
  cell.init(rng);
  Matrix h(1, 6), c(1, 6);
  for (int t = 0; t < 100; ++t) {
    Matrix x = random_matrix(1, 4, rng, 3.0);
    auto [hn, cn] = cell.step(x, h, c);
    h = hn;
    c = cn;
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::fabs(h[i]) < 1.0);
      CHECK(std::isfinite(c[i]));
    }
  }
}

TEST_CASE("lstm sequence forward matches single steps", "[core][lstm]") {
  Rng rng(9);
  LstmCell cell(3, 5);
  cell.init(rng);
  std::vector<Matrix> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(random_matrix(1, 3, rng));
  LstmSeqCache cache;
  lstm_seq_forward(cell, xs, cache);
  Matrix h(1, 5), c(1, 5);
  for (int t = 0; t < 4; ++t) {
    auto [hn, cn] = cell.step(xs[static_cast<std::size_t>(t)], h, c);
    h = hn;
    c = cn;
    for (std::size_t u = 0; u < 5; ++u) {
      CHECK(cache.hs[static_cast<std::size_t>(t) + 1](0, u) == Approx(h[u]).margin(1e-12));
    }
  }
}

TEST_CASE("lstm gate gradients match finite differences", "[core][gradients]") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    Rng rng(seed);
    LstmCell cell(3, 4);
    cell.init(rng);
    const std::size_t T = 5, B = 2;
    std::vector<Matrix> xs;
    for (std::size_t t = 0; t < T; ++t) xs.push_back(random_matrix(B, 3, rng));
    std::vector<Matrix> rs;
    for (std::size_t t = 0; t < T; ++t) rs.push_back(random_matrix(B, 4, rng));

    auto loss = [&] {
      LstmSeqCache c;
      lstm_seq_forward(cell, xs, c);
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += probe_loss(c.hs[t + 1], rs[t]);
      return acc;
    };

    LstmSeqCache cache;
    lstm_seq_forward(cell, xs, cache);
    LstmGrads grads;
    std::vector<Matrix> dxs;
    lstm_seq_backward(cell, cache, rs, grads, &dxs);

    CHECK(dyad::test::max_grad_rel_err(cell.Wx, grads.dWx, loss) < dyad::test::kFdTol);
    CHECK(dyad::test::max_grad_rel_err(cell.Wh, grads.dWh, loss) < dyad::test::kFdTol);
    CHECK(dyad::test::max_grad_rel_err(cell.b, grads.db, loss) < dyad::test::kFdTol);
    CHECK(dyad::test::max_grad_rel_err(xs[2], dxs[2], loss) < dyad::test::kFdTol);
  }
}

TEST_CASE("adam with zero gradients leaves parameters unchanged", "[core][adam]") {
  Rng rng(1);
  Matrix w = random_matrix(3, 3, rng);
  Matrix w0 = w;
  Matrix g(3, 3);
  AdamState st(1e-2, {&w});
  for (int i = 0; i < 5; ++i) adam_step(st, {&w}, std::vector<const Matrix*>{&g});
  REQUIRE(w == w0);
  REQUIRE(st.step == 5);
}

TEST_CASE("first adam step moves by about -lr * sign(g)", "[core][adam]") {
  Matrix w(1, 1);
  w[0] = 2.0;
  Matrix g(1, 1);
  g[0] = 0.37;  // arbitrary positive constant gradient
  AdamState st(1e-3, {&w});
  adam_step(st, {&w}, std::vector<const Matrix*>{&g});
  // bias-corrected first step: delta = -lr * g / (|g| + eps) ~= -lr
  CHECK(w[0] == Approx(2.0 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam matches a hand-rolled scalar trace on a quadratic", "[core][adam]") {
  // minimize f(x) = 0.5 * (x - 3)^2, gradient x - 3
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double x_ref = 0.0, m = 0.0, v = 0.0;
  Matrix w(1, 1);
  AdamState st(lr, {&w});
  for (int t = 1; t <= 2; ++t) {
    const double g = x_ref - 3.0;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    x_ref -= lr * mhat / (std::sqrt(vhat) + eps);

    Matrix grad(1, 1);
    grad[0] = w[0] - 3.0;
    adam_step(st, {&w}, std::vector<const Matrix*>{&grad});
    REQUIRE(w[0] == Approx(x_ref).margin(1e-15));
  }
}

TEST_CASE("adam rejects non-finite gradients", "[core][adam]") {
  Matrix w(1, 1);
  Matrix g(1, 1);
  g[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState st(1e-3, {&w});
  REQUIRE_THROWS_AS(adam_step(st, {&w}, std::vector<const Matrix*>{&g}), NumericError);
}
