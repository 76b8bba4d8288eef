#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include <itsc/itsc.hpp>

#include "support/gradcheck_suite.hpp"
#include "support/oracles.hpp"

using namespace itsc;
using testsup::randn;
using testsup::randint;

namespace {

oracle::ScalarGru to_oracle(const GruParams<double>& p) {
  oracle::ScalarGru g;
  g.n = p.input_size;
  g.m = p.hidden_size;
  auto grab = [](const Matrix<double>& m) {
    std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < m.cols; ++c) out[r][c] = m[r][c];
    return out;
  };
  g.wxz = grab(p.w_xz); g.whz = grab(p.w_hz);
  g.wxr = grab(p.w_xr); g.whr = grab(p.w_hr);
  g.wxh = grab(p.w_xh); g.whh = grab(p.w_hh);
  g.bz.assign(p.b_z.data.begin(), p.b_z.data.end());
  g.br.assign(p.b_r.data.begin(), p.b_r.data.end());
  g.bh.assign(p.b_h.data.begin(), p.b_h.data.end());
  g.wimp = grab(p.w_imp);
  g.bimp.assign(p.b_imp.data.begin(), p.b_imp.data.end());
  return g;
}

}  // namespace

TEST_CASE("gru_cell: zero-parameter algebra gives h_t = 0.5 * h_prev") {
  GruParams<double> p(2, 3);
  p.zero_all();
  Matrix<double> u(1, 2, 0.7);
  Matrix<double> h(1, 3);
  h[0][0] = 0.4; h[0][1] = -1.0; h[0][2] = 0.25;
  const Matrix<double> out = gru_cell(u, h, p);
  for (int i = 0; i < 3; ++i) CHECK(out[0][i] == Catch::Approx(0.5 * h[0][i]).epsilon(1e-15));

  Matrix<double> h0(1, 3, 0.0);
  const Matrix<double> out0 = gru_cell(u, h0, p);
  for (int i = 0; i < 3; ++i) CHECK(out0[0][i] == 0.0);
}

TEST_CASE("gru_cell: matches the scalar reference evaluation") {
  Rng rng(21);
  for (int it = 0; it < 20; ++it) {
    const int n = randint(rng, 1, 3), m = randint(rng, 1, 5);
    GruParams<double> p(n, m);
    p.init(rng);
    Matrix<double> u = randn(1, n, rng), h = randn(1, m, rng, 0.5);
    const Matrix<double> got = gru_cell(u, h, p);
    const auto ref = to_oracle(p).step(std::vector<double>(u.data.begin(), u.data.end()),
                                       std::vector<double>(h.data.begin(), h.data.end()));
    for (int i = 0; i < m; ++i) CHECK(std::abs(got[0][i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("gru_cell: shape mismatch rejected") {
  GruParams<double> p(2, 3);
  p.zero_all();
  Matrix<double> u(1, 3, 0.0), h(1, 3, 0.0);
  CHECK_THROWS_AS(gru_cell(u, h, p), shape_error);
  Matrix<double> u2(1, 2, 0.0), h2(1, 2, 0.0);
  CHECK_THROWS_AS(gru_cell(u2, h2, p), shape_error);
}

TEST_CASE("estimate_next: constant head, zero hidden, random matvec oracle") {
  Rng rng(22);
  GruParams<double> p(2, 4);
  p.zero_all();
  p.b_imp[0][0] = 1.5;
  p.b_imp[0][1] = -0.5;
  Matrix<double> h = randn(1, 4, rng);
  const Matrix<double> xh = estimate_next(h, p);  // w_imp = 0 -> bias only
  CHECK(xh[0][0] == 1.5);
  CHECK(xh[0][1] == -0.5);

  p.init(rng);
  Matrix<double> h0(1, 4, 0.0);
  const Matrix<double> xh0 = estimate_next(h0, p);
  for (int j = 0; j < 2; ++j) CHECK(xh0[0][j] == p.b_imp[0][j]);

  const Matrix<double> got = estimate_next(h, p);
  for (int j = 0; j < 2; ++j) {
    double acc = p.b_imp[0][j];
    for (int i = 0; i < 4; ++i) acc += p.w_imp[j][i] * h[0][i];
    CHECK(got[0][j] == Catch::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("impute_sequence: mask of ones passes the input through bit-exactly") {
  Rng rng(23);
  GruParams<double> p(2, 3);
  p.init(rng);
  Matrix<double> x = randn(6, 2, rng);
  x[3][1] = -0.0;  // signed zero must survive the merge
  Matrix<double> mask(6, 2, 1.0);
  const auto tr = impute_sequence(x, mask, p);
  CHECK(std::memcmp(tr.u.data.data(), x.data.data(), x.size() * sizeof(double)) == 0);
  CHECK_FALSE(tr.all_missing);
}

TEST_CASE("impute_sequence: all-missing with zero params free-runs at zero") {
  GruParams<double> p(1, 3);
  p.zero_all();
  Matrix<double> x(5, 1, 9.0);
  Matrix<double> mask(5, 1, 0.0);
  const auto tr = impute_sequence(x, mask, p);
  CHECK(tr.all_missing);
  for (double v : tr.u.data) CHECK(v == 0.0);
  for (double v : tr.h.data) CHECK(v == 0.0);
  for (double v : tr.xhat.data) CHECK(v == 0.0);
}

TEST_CASE("impute_sequence: hand-set T=3 trace matches the scalar unroll") {
  GruParams<double> p(1, 2);
  p.zero_all();
  // small asymmetric parameters, set by hand
  p.w_xz[0][0] = 0.3;  p.w_xz[1][0] = -0.2;
  p.w_hz[0][0] = 0.1;  p.w_hz[0][1] = 0.05; p.w_hz[1][0] = -0.07; p.w_hz[1][1] = 0.2;
  p.w_xr[0][0] = -0.4; p.w_xr[1][0] = 0.25;
  p.w_hr[0][1] = 0.15; p.w_hr[1][0] = 0.3;
  p.w_xh[0][0] = 0.5;  p.w_xh[1][0] = 0.45;
  p.w_hh[0][0] = -0.3; p.w_hh[1][1] = 0.35;
  p.b_z[0][0] = 0.02;  p.b_r[0][1] = -0.03; p.b_h[0][0] = 0.04;
  p.w_imp[0][0] = 0.6; p.w_imp[0][1] = -0.8;
  p.b_imp[0][0] = 0.1;
  Matrix<double> x(3, 1);
  x[0][0] = 1.0; x[1][0] = 99.0; x[2][0] = -0.5;  // stored value at t=1 is missing
  Matrix<double> mask(3, 1);
  mask[0][0] = 1; mask[1][0] = 0; mask[2][0] = 1;

  const auto tr = impute_sequence(x, mask, p);
  const auto ref = to_oracle(p).unroll({{1.0}, {99.0}, {-0.5}}, {{1.0}, {0.0}, {1.0}});
  for (int t = 0; t < 3; ++t) {
    CHECK(std::abs(tr.u[t][0] - ref.u[t][0]) <= 1e-12);
    CHECK(std::abs(tr.xhat[t][0] - ref.xhat[t][0]) <= 1e-12);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(tr.h[t][i] - ref.h[t][i]) <= 1e-12);
  }
  // the missing step really used the estimate
  CHECK(tr.u[1][0] == tr.xhat[1][0]);
}

TEST_CASE("impute_sequence: masked-out storage is semantically inert") {
  Rng rng(24);
  GruParams<double> p(2, 4);
  p.init(rng);
  Matrix<double> x = randn(8, 2, rng);
  Matrix<double> mask = testsup::random_mask(8, 2, rng);
  const auto base = impute_sequence(x, mask, p);
  Matrix<double> x2 = x;
  bool toggled = false;
  for (int t = 0; t < 8; ++t)
    for (int j = 0; j < 2; ++j)
      if (mask[t][j] == 0.0) {
        x2[t][j] = 1e6 + t + j;  // arbitrary garbage
        toggled = true;
      }
  REQUIRE(toggled);
  const auto got = impute_sequence(x2, mask, p);
  CHECK(base.u.data == got.u.data);
  CHECK(base.h.data == got.h.data);
  CHECK(base.xhat.data == got.xhat.data);
}

TEST_CASE("impute_sequence: hidden states stay inside (-1, 1)") {
  Rng rng(25);
  for (int it = 0; it < 10; ++it) {
    const int T = randint(rng, 2, 12), n = randint(rng, 1, 2), m = randint(rng, 1, 5);
    GruParams<double> p(n, m);
    p.init(rng);
    for (auto& v : p.w_hh.data) v *= 1.5;  // exaggerate: the bound is structural
    Matrix<double> x = randn(T, n, rng, 2.0);
    const Matrix<double> mask = testsup::random_mask(T, n, rng);
    const auto tr = impute_sequence(x, mask, p);
    for (double v : tr.h.data) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("impute_sequence: leading-missing estimates ignore later observations") {
  Rng rng(26);
  GruParams<double> p(1, 3);
  p.init(rng);
  const int T = 10, lead = 4;
  Matrix<double> x = randn(T, 1, rng);
  Matrix<double> mask(T, 1, 1.0);
  for (int t = 0; t < lead; ++t) mask[t][0] = 0.0;
  const auto base = impute_sequence(x, mask, p);
  Matrix<double> x2 = x;
  for (int t = lead; t < T; ++t) x2[t][0] = x[T - 1 - t + lead][0] * 2.0 + 1.0;  // scramble
  const auto got = impute_sequence(x2, mask, p);
  // estimates over the leading missing run (and one past it, which depends
  // only on hidden state built from that run) are identical
  for (int t = 0; t <= lead; ++t) CHECK(base.xhat[t][0] == got.xhat[t][0]);
  // while later estimates diverge
  bool diverged = false;
  for (int t = lead + 1; t < T; ++t) diverged = diverged || base.xhat[t][0] != got.xhat[t][0];
  CHECK(diverged);
}

TEST_CASE("impute_sequence: input contract errors") {
  GruParams<double> p(2, 3);
  p.zero_all();
  Matrix<double> x(4, 2, 0.0);
  Matrix<double> bad_mask(4, 2, 0.5);
  CHECK_THROWS_AS(impute_sequence(x, bad_mask, p), shape_error);
  Matrix<double> short_x(1, 2, 0.0), short_m(1, 2, 1.0);
  CHECK_THROWS_AS(impute_sequence(short_x, short_m, p), shape_error);
  Matrix<double> wrong_m(4, 1, 1.0);
  CHECK_THROWS_AS(impute_sequence(x, wrong_m, p), shape_error);
}

TEST_CASE("impute_sequence backward: requires the forward cache") {
  GruParams<double> p(1, 2);
  p.zero_all();
  Matrix<double> x(3, 1, 0.5), mask(3, 1, 1.0);
  const auto tr = impute_sequence(x, mask, p);
  ImputationCache<double> empty_cache;
  GruParams<double> g(1, 2);
  g.zero_all();
  const Matrix<double> none;
  CHECK_THROWS_AS(impute_sequence_backward(tr, empty_cache, p, none, none,
                                           static_cast<const double*>(nullptr), g),
                  shape_error);
}

TEST_CASE("impute_sequence: BPTT gradients match finite differences") {
  const auto worst = testsup::worst_over(8, 27, testsup::check_impute_bptt);
  CHECK(worst.max_relative_error <= 1e-4);
}

TEST_CASE("gru_cell: gradients match finite differences") {
  const auto worst = testsup::worst_over(8, 28, testsup::check_gru_cell);
  CHECK(worst.max_relative_error <= 1e-4);
}
