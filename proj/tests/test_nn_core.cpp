#include <catch2/catch_amalgamated.hpp>

#include <itsc/itsc.hpp>

#include "support/gradcheck_suite.hpp"
#include "support/oracles.hpp"

using namespace itsc;
using testsup::randn;
using testsup::randint;

TEST_CASE("conv1d: zero input gives bias everywhere") {
  nn::ConvSpec spec{2, 3, 5, 2};
  Matrix<double> x(2, 9, 0.0);
  Rng rng(1);
  Matrix<double> w = randn(3, 2 * 5, rng);
  Matrix<double> b(1, 3);
  b[0][0] = -1.5; b[0][1] = 0.25; b[0][2] = 4.0;
  const Matrix<double> y = nn::conv1d_forward(x, spec, w, b);
  for (int o = 0; o < 3; ++o)
    for (int t = 0; t < 9; ++t) CHECK(y[o][t] == b[0][o]);
}

TEST_CASE("conv1d: 1x1 identity kernel per channel reproduces the input") {
  nn::ConvSpec spec{2, 2, 1, 1};
  Rng rng(2);
  Matrix<double> x = randn(2, 7, rng);
  Matrix<double> w(2, 2, 0.0);
  w[0][0] = 1.0;  // out0 <- in0
  w[1][1] = 1.0;  // out1 <- in1
  Matrix<double> b(1, 2, 0.0);
  const Matrix<double> y = nn::conv1d_forward(x, spec, w, b);
  CHECK(y.data == x.data);
}

TEST_CASE("conv1d: matches the direct-loop oracle") {
  Rng rng(3);
  for (int it = 0; it < 30; ++it) {
    const int c_in = randint(rng, 1, 4), c_out = randint(rng, 1, 4);
    const int f = 2 * randint(rng, 0, 3) + 1, d = randint(rng, 1, 3);
    const int T = randint(rng, 1, 32);
    nn::ConvSpec spec{c_in, c_out, f, d};
    Matrix<double> x = randn(c_in, T, rng), w = randn(c_out, c_in * f, rng);
    Matrix<double> b = randn(1, c_out, rng);
    const Matrix<double> y = nn::conv1d_forward(x, spec, w, b);
    const std::vector<double> ref =
        oracle::conv1d_direct(x.data, c_in, T, w.data, c_out, f, d, b.data);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(std::abs(y.data[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("conv1d: same padding preserves the time length for all odd f, d >= 1") {
  Rng rng(4);
  for (int f = 1; f <= 11; f += 2)
    for (int d = 1; d <= 4; ++d) {
      nn::ConvSpec spec{1, 2, f, d};
      Matrix<double> x = randn(1, 13, rng);
      Matrix<double> w = randn(2, f, rng), b(1, 2, 0.0);
      const Matrix<double> y = nn::conv1d_forward(x, spec, w, b);
      CHECK(y.rows == 2);
      CHECK(y.cols == 13);
    }
}

TEST_CASE("conv1d: rejects channel mismatch and even kernels") {
  Matrix<double> x(3, 5, 1.0);
  Matrix<double> w(2, 2 * 3, 0.0), b(1, 2, 0.0);
  CHECK_THROWS_AS(nn::conv1d_forward(x, nn::ConvSpec{2, 2, 3, 1}, w, b), shape_error);
  nn::ConvSpec even{3, 2, 4, 1};
  CHECK_THROWS_AS(even.validate(), shape_error);
}

TEST_CASE("conv1d backward: zero upstream gradient, identity case, missing cache") {
  Rng rng(5);
  nn::ConvSpec spec{1, 1, 1, 1};
  Matrix<double> x = randn(1, 6, rng);
  Matrix<double> w(1, 1, 1.0);
  Matrix<double> gx, gw, gb;

  Matrix<double> zero_gy(1, 6, 0.0);
  nn::conv1d_backward(zero_gy, x, spec, w, gx, gw, gb);
  for (double v : gx.data) CHECK(v == 0.0);
  for (double v : gw.data) CHECK(v == 0.0);
  for (double v : gb.data) CHECK(v == 0.0);

  Matrix<double> gy = randn(1, 6, rng);
  nn::conv1d_backward(gy, x, spec, w, gx, gw, gb);
  CHECK(gx.data == gy.data);  // f=1 identity kernel passes gradients through

  Matrix<double> missing;
  CHECK_THROWS_AS(nn::conv1d_backward(gy, missing, spec, w, gx, gw, gb), shape_error);
}

TEST_CASE("conv1d backward: finite differences") {
  const auto worst = testsup::worst_over(5, 11, testsup::check_conv1d);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("relu: definition and gradient") {
  Matrix<double> x(1, 3);
  x[0][0] = -1; x[0][1] = 0; x[0][2] = 2;
  const Matrix<double> y = nn::relu_forward(x);
  CHECK(y[0][0] == 0.0);
  CHECK(y[0][1] == 0.0);
  CHECK(y[0][2] == 2.0);

  // all-positive input: identity forward, gradient passes unchanged
  Rng rng(6);
  Matrix<double> pos = randn(1, 8, rng);
  for (auto& v : pos.data) v = std::abs(v) + 0.1;
  CHECK(nn::relu_forward(pos).data == pos.data);
  Matrix<double> gy = randn(1, 8, rng);
  CHECK(nn::relu_backward(gy, pos).data == gy.data);

  // subgradient at exactly 0 is 0
  Matrix<double> at_zero(1, 1, 0.0), g1(1, 1, 3.0);
  CHECK(nn::relu_backward(g1, at_zero)[0][0] == 0.0);

  const auto worst = testsup::worst_over(5, 12, testsup::check_relu);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("linear: identity, zero input, gradient") {
  Rng rng(7);
  Matrix<double> x = randn(1, 4, rng);
  Matrix<double> eye(4, 4, 0.0);
  for (int i = 0; i < 4; ++i) eye[i][i] = 1.0;
  Matrix<double> zero_b(1, 4, 0.0);
  CHECK(nn::linear_forward(x, eye, zero_b).data == x.data);

  Matrix<double> zero_x(1, 4, 0.0);
  Matrix<double> b = randn(1, 4, rng);
  CHECK(nn::linear_forward(zero_x, eye, b).data == b.data);

  Matrix<double> bad_w(3, 5, 0.0);
  CHECK_THROWS_AS(nn::linear_forward(x, bad_w, zero_b), shape_error);

  const auto worst = testsup::worst_over(5, 13, testsup::check_linear);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("softmax cross-entropy: uniform logits, stability, properties") {
  {
    Matrix<double> logits(1, 2, 0.0);
    const auto r = nn::softmax_cross_entropy(logits, std::vector<int>{0});
    CHECK(r.probabilities[0][0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(r.probabilities[0][1] == Catch::Approx(0.5).margin(1e-15));
    CHECK(r.loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  }
  {
    Matrix<double> logits(1, 2, 0.0);
    logits[0][0] = 1000.0;
    const auto r = nn::softmax_cross_entropy(logits, std::vector<int>{0});
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == Catch::Approx(0.0).margin(1e-9));
  }
  // probabilities sum to 1, lie in (0,1), and are shift invariant
  Rng rng(8);
  for (int it = 0; it < 20; ++it) {
    const int B = randint(rng, 1, 4), C = randint(rng, 2, 6);
    Matrix<double> logits = randn(B, C, rng);
    std::vector<int> labels(B);
    for (auto& y : labels) y = randint(rng, 0, C - 1);
    const auto r = nn::softmax_cross_entropy(logits, labels);
    Matrix<double> shifted = logits;
    const double shift = randn(1, 1, rng)[0][0];
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) shifted[b][c] += shift;
    const auto r2 = nn::softmax_cross_entropy(shifted, labels);
    for (int b = 0; b < B; ++b) {
      double sum = 0;
      for (int c = 0; c < C; ++c) {
        const double p = r.probabilities[b][c];
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(r2.probabilities[b][c] == Catch::Approx(p).margin(1e-9));
        sum += p;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
  // label out of range rejected
  Matrix<double> logits(1, 3, 0.0);
  CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, std::vector<int>{3}), shape_error);
  CHECK_THROWS_AS(nn::softmax_cross_entropy(logits, std::vector<int>{-1}), shape_error);

  const auto worst = testsup::worst_over(5, 14, testsup::check_softmax_ce);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("batchnorm: normalization, degenerate cases, running stats") {
  Rng rng(9);
  const int B = 3, C = 2, T = 5;
  Matrix<double> x = randn(1, B * C * T, rng);
  std::vector<double> gamma(C, 1.0), beta(C, 0.0), y(x.size());
  nn::BnCache<double> cache;
  nn::batchnorm_train_forward(x.data.data(), B, C, T, gamma.data(), beta.data(), nn::kBnEps,
                              y.data(), cache);
  for (int c = 0; c < C; ++c) {
    double sum = 0, sq = 0;
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t) {
        const double v = y[(static_cast<std::size_t>(b) * C + c) * T + t];
        sum += v;
        sq += v * v;
      }
    const double mean = sum / (B * T), var = sq / (B * T) - mean * mean;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(var == Catch::Approx(1.0).margin(1e-3));  // eps shifts variance slightly
  }

  // constant channel: output equals beta everywhere (variance clamped by eps)
  Matrix<double> const_x(1, B * C * T, 7.0);
  std::vector<double> beta2{0.5, -2.0};
  nn::batchnorm_train_forward(const_x.data.data(), B, C, T, gamma.data(), beta2.data(),
                              nn::kBnEps, y.data(), cache);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t)
        CHECK(y[(static_cast<std::size_t>(b) * C + c) * T + t] ==
              Catch::Approx(beta2[c]).margin(1e-12));

  // single element per channel rejected
  nn::BnCache<double> c1;
  std::vector<double> y1(1);
  CHECK_THROWS_AS(nn::batchnorm_train_forward(const_x.data.data(), 1, 1, 1, gamma.data(),
                                              beta.data(), nn::kBnEps, y1.data(), c1),
                  shape_error);

  // running stats: momentum update toward the batch statistics
  nn::BatchNorm1d<double> bn(1);
  Matrix<double> xb(1, 8);
  for (int i = 0; i < 8; ++i) xb.data[i] = i;  // mean 3.5, biased var 5.25
  nn::BnCache<double> cache2;
  std::vector<double> yb(8);
  bn.forward(xb.data.data(), 2, 4, nn::BnMode::train, yb.data(), &cache2);
  CHECK(bn.run_mean[0][0] == Catch::Approx(0.9 * 0.0 + 0.1 * 3.5).epsilon(1e-12));
  CHECK(bn.run_var[0][0] == Catch::Approx(0.9 * 1.0 + 0.1 * 5.25 * 8.0 / 7.0).epsilon(1e-12));

  // eval mode uses the running stats, not the batch
  std::vector<double> ye(8);
  bn.forward(xb.data.data(), 2, 4, nn::BnMode::eval, ye.data(), nullptr);
  const double inv = 1.0 / std::sqrt(bn.run_var[0][0] + nn::kBnEps);
  for (int i = 0; i < 8; ++i)
    CHECK(ye[i] == Catch::Approx((xb.data[i] - bn.run_mean[0][0]) * inv).epsilon(1e-10));

  const auto worst = testsup::worst_over(5, 15, testsup::check_batchnorm);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("adam: first-step properties and the hand-unrolled recurrence") {
  // zero gradient at step 1 leaves params unchanged
  {
    std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
    nn::AdamState st(2, 3e-4);
    nn::adam_step(p.data(), g.data(), 2, st);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(st.step_count == 1);
  }
  // first step: update magnitude ~= learning rate, against the gradient
  {
    std::vector<double> p{0.0}, g{0.7};
    nn::AdamState st(1, 1e-2);
    nn::adam_step(p.data(), g.data(), 1, st);
    CHECK(p[0] == Catch::Approx(-1e-2).epsilon(1e-6));
  }
  // two steps with constant gradient: hand-unrolled recurrence
  {
    const double lr = 5e-3, g = 1.3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> p{0.25}, grad{g};
    nn::AdamState st(1, lr);
    nn::adam_step(p.data(), grad.data(), 1, st);
    nn::adam_step(p.data(), grad.data(), 1, st);
    // hand recurrence
    double m = 0, v = 0, x = 0.25;
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      x -= lr * mh / (std::sqrt(vh) + eps);
    }
    CHECK(p[0] == Catch::Approx(x).epsilon(1e-14));
  }
  // deterministic: same inputs, same result
  {
    std::vector<double> p1{0.5}, p2{0.5}, g{0.1};
    nn::AdamState s1(1, 1e-3), s2(1, 1e-3);
    nn::adam_step(p1.data(), g.data(), 1, s1);
    nn::adam_step(p2.data(), g.data(), 1, s2);
    CHECK(p1[0] == p2[0]);
  }
  // non-finite gradient rejected with diagnostic
  {
    std::vector<double> p{0.0}, g{std::numeric_limits<double>::quiet_NaN()};
    nn::AdamState st(1, 1e-3);
    CHECK_THROWS_AS(nn::adam_step(p.data(), g.data(), 1, st), numeric_error);
  }
  // state shape mismatch rejected
  {
    std::vector<double> p{0.0, 1.0}, g{0.1, 0.1};
    nn::AdamState st(1, 1e-3);
    CHECK_THROWS_AS(nn::adam_step(p.data(), g.data(), 2, st), shape_error);
  }
}

TEST_CASE("grad_check: passes on a linear op, detects a corrupted gradient") {
  Rng rng(16);
  Matrix<double> x = randn(1, 4, rng), w = randn(3, 4, rng), b = randn(1, 3, rng);
  const Matrix<double> c = randn(1, 3, rng);
  testsup::ParamPack pack;
  pack.add(x); pack.add(w); pack.add(b);
  auto loss = [&] {
    const Matrix<double> y = nn::linear_forward(x, w, b);
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += c.data[i] * y.data[i];
    return acc;
  };
  auto analytic = [&] {
    Matrix<double> gx, gw, gb;
    nn::linear_backward(c, x, w, gx, gw, gb);
    std::vector<double> out;
    for (const auto* g : {&gx, &gw, &gb}) out.insert(out.end(), g->data.begin(), g->data.end());
    return out;
  };
  const auto ok = testsup::run_check(pack, loss, analytic);
  CHECK(ok.pass());
  CHECK(ok.failing_coordinate == -1);

  // corrupt one sizable coordinate by +10%: must fail and name a coordinate
  auto corrupted = [&] {
    auto a = analytic();
    for (auto& v : a)
      if (std::abs(v) > 0.1) {
        v *= 1.1;
        break;
      }
    return a;
  };
  const auto bad = testsup::run_check(pack, loss, corrupted);
  CHECK_FALSE(bad.pass());
  CHECK(bad.failing_coordinate >= 0);
}

TEST_CASE("composite conv -> relu -> linear chain passes the gradient check") {
  Rng rng(17);
  const int T = 6;
  nn::ConvSpec spec{1, 2, 3, 1};
  Matrix<double> x = randn(1, T, rng), w = randn(2, 3, rng), b = randn(1, 2, rng);
  Matrix<double> w2 = randn(2, 2 * T, rng), b2 = randn(1, 2, rng);
  testsup::ParamPack pack;
  pack.add(x); pack.add(w); pack.add(b); pack.add(w2); pack.add(b2);
  const std::vector<int> label{1};
  auto forward = [&](Matrix<double>* cache_conv, Matrix<double>* cache_relu,
                     nn::SoftmaxCeResult<double>* ce_out) {
    Matrix<double> conv = nn::conv1d_forward(x, spec, w, b);
    Matrix<double> act = nn::relu_forward(conv);
    Matrix<double> flat(1, 2 * T);
    std::copy(act.data.begin(), act.data.end(), flat.data.begin());
    const Matrix<double> logits = nn::linear_forward(flat, w2, b2);
    auto ce = nn::softmax_cross_entropy(logits, label);
    if (cache_conv) *cache_conv = std::move(conv);
    if (cache_relu) *cache_relu = std::move(flat);
    if (ce_out) *ce_out = std::move(ce);
    return ce_out ? ce_out->loss : ce.loss;
  };
  auto loss = [&] { return forward(nullptr, nullptr, nullptr); };
  auto analytic = [&] {
    Matrix<double> conv, flat;
    nn::SoftmaxCeResult<double> ce;
    forward(&conv, &flat, &ce);
    Matrix<double> gflat, gw2, gb2;
    nn::linear_backward(ce.grad_logits, flat, w2, gflat, gw2, gb2);
    Matrix<double> gact(2, T);
    std::copy(gflat.data.begin(), gflat.data.end(), gact.data.begin());
    const Matrix<double> gconv = nn::relu_backward(gact, conv);
    Matrix<double> gx, gw, gb;
    nn::conv1d_backward(gconv, x, spec, w, gx, gw, gb);
    std::vector<double> out;
    for (const auto* g : {&gx, &gw, &gb, &gw2, &gb2})
      out.insert(out.end(), g->data.begin(), g->data.end());
    return out;
  };
  const auto report = testsup::run_check(pack, loss, analytic);
  CHECK(report.max_relative_error <= 1e-4);
}

TEST_CASE("stability: no NaN/Inf on finite random inputs") {
  Rng rng(18);
  for (int it = 0; it < 25; ++it) {
    const int c_in = randint(rng, 1, 3), c_out = randint(rng, 1, 3);
    const int f = 2 * randint(rng, 0, 2) + 1, T = randint(rng, 2, 16);
    nn::ConvSpec spec{c_in, c_out, f, randint(rng, 1, 3)};
    Matrix<double> x = randn(c_in, T, rng, 10.0);
    Matrix<double> w = randn(c_out, c_in * f, rng, 10.0), b = randn(1, c_out, rng, 10.0);
    const Matrix<double> y = nn::conv1d_forward(x, spec, w, b);
    CHECK(all_finite(y));
    const Matrix<double> r = nn::relu_forward(y);
    CHECK(all_finite(r));
    Matrix<double> logits = randn(1, randint(rng, 2, 5), rng, 100.0);
    const auto ce = nn::softmax_cross_entropy(logits, std::vector<int>{0});
    CHECK(std::isfinite(ce.loss));
    CHECK(all_finite(ce.probabilities));
    CHECK(all_finite(ce.grad_logits));
  }
}
