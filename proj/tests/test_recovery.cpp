#include "catch_amalgamated.hpp"

#include <numeric>

#include "ctista/recovery.hpp"
#include "support.hpp"

using namespace ctista;
using ctista::test::random_cmatrix;
using ctista::test::random_cvector;

namespace {

CVector bg_vector(Eigen::Index n, std::uint64_t seed, double p = 0.3) {
  RngStream rng(seed, 17);
  CVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.bernoulli(p) ? draw_cgaussian(rng, 1.0) : cplx(0.0);
  return x;
}

}  // namespace

TEST_CASE("h_step") {
  const CMatrix a = random_cmatrix(4, 8, 1, 0.25);
  const CVector s = random_cvector(8, 2);
  const CVector y = random_cvector(4, 3);

  SECTION("identity map") {
    const CtistaModel model(a, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 1);
    CHECK((h_step(model, s, y) - model.W() * (y - a * s)).norm() <= 1e-12);
  }
  SECTION("zero residual") {
    const ComponentwiseMap f = clip_map(0.5);
    const CtistaModel model(a, f, ShrinkageFn::complex_soft(), 1);
    CHECK(h_step(model, s, f.apply(a * s)).norm() == 0.0);
  }
  SECTION("clip map against the LMS gradient") {
    const ComponentwiseMap f = clip_map(0.5);
    const CtistaModel with_w(a, f, ShrinkageFn::complex_soft(), 1);
    const CtistaModel with_ah(a, f, ShrinkageFn::complex_soft(), 1, true);
    // h with A^H in place of W is -2 grad g
    CHECK((h_step(with_ah, s, y) + 2.0 * grad_lms(a, y, f, s)).norm() <= 1e-12);
    // element-wise evaluation of the bracket, then W
    const CVector u = a * s;
    CVector bracket(4);
    for (Eigen::Index i = 0; i < 4; ++i) {
      const cplx e = y(i) - f.eval(u(i));
      bracket(i) = std::conj(e) * f.d_f_dzc(u(i)) + e * f.d_fconj_dzc(u(i));
    }
    CHECK((h_step(with_w, s, y) - with_w.W() * bracket).norm() <= 1e-12);
  }
  SECTION("dimension mismatch") {
    const CtistaModel model(a, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 1);
    CHECK_THROWS_AS(h_step(model, CVector::Zero(7), y), DimensionError);
    CHECK_THROWS_AS(h_step(model, s, CVector::Zero(5)), DimensionError);
  }
}

TEST_CASE("lambda_est") {
  const CMatrix a = CMatrix::Identity(3, 3);
  const CtistaModel model(a, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 2);
  const CVector s = CVector::Zero(3);
  CtistaParams p({1.0, 1.0}, {0.0, 0.5}, {1.0, 0.0});
  CHECK(lambda_est(model, p, 1, s, s) == kLambdaFloor);
  CHECK(lambda_est(model, p, 2, s, random_cvector(3, 4)) == 0.5);
  CVector y(3);
  y << std::sqrt(2.0), cplx(1.0, 1.0), std::sqrt(2.0);  // ||y||^2 = 6, Tr = 3
  CtistaParams q({1.0}, {0.0}, {2.0});
  const CtistaModel one(a, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 1);
  CHECK(lambda_est(one, q, 1, s, y) == Catch::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(lambda_est(model, p, 3, s, s), DomainError);
  CHECK_THROWS_AS(lambda_est(model, p, 0, s, s), DomainError);
}

TEST_CASE("CtistaParams") {
  CHECK_THROWS_AS(CtistaParams({1.0}, {1.0, 2.0}, {1.0}), DimensionError);
  CHECK_THROWS_AS(CtistaParams({1.0}, {std::nan("")}, {1.0}), DomainError);
  CtistaParams p({1, 2, 3}, {4, 5, 6}, {7, 8, 9});
  CHECK(p.flatten(2) == std::vector<double>{1, 2, 4, 5, 7, 8});
  p.unflatten(2, {10, 20, 40, 50, 70, 80});
  CHECK(p.beta == std::vector<double>{10, 20, 3});
  CHECK(p.a == std::vector<double>{40, 50, 6});
  CHECK(p.b == std::vector<double>{70, 80, 9});
  CHECK_THROWS_AS(p.unflatten(2, {1.0}), DimensionError);
}

TEST_CASE("ctista_forward closed forms") {
  SECTION("one layer with A = I") {
    const CtistaModel model(CMatrix::Identity(5, 5), ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 1);
    const CVector y = random_cvector(5, 5);
    const CtistaParams p({1.0}, {0.3}, {0.0});
    const RecoveryResult res = ctista_forward(model, p, y);
    REQUIRE(res.trace.steps.size() == 1);
    CHECK(res.trace.steps[0].r == y);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(res.estimate(i) == soft_complex(y(i), 0.3));
  }
  SECTION("noiseless square system with a constellation input is a fixed point") {
    const Constellation s8 = make_psk(8);
    const CMatrix a = random_cmatrix(6, 6, 6);
    RngStream rng(7, 7);
    CVector x(6);
    for (Eigen::Index i = 0; i < 6; ++i) x(i) = s8[rng.index(8)];
    const CtistaModel model(a, ComponentwiseMap::identity(), ShrinkageFn::mmse(s8), 3);
    const RecoveryResult res = ctista_forward(model, CtistaParams::constant(3, 1.0, 0.0, 1.0), a * x);
    CHECK((res.trace.steps[0].s - x).norm() <= 1e-12);
    CHECK(res.trace.steps[0].lambda == kLambdaFloor);
    CHECK((res.estimate - x).norm() <= 1e-12);
  }
  SECTION("parameter length must match T") {
    const CtistaModel model(CMatrix::Identity(2, 2), ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 3);
    CHECK_THROWS_AS(ctista_forward(model, CtistaParams::constant(2, 1, 0, 1), CVector::Zero(2)), DimensionError);
    CHECK_THROWS_AS(ctista_forward(model, CtistaParams::constant(3, 1, 0, 1), CVector::Zero(3)), DimensionError);
  }
  SECTION("model validation") {
    CHECK_THROWS_AS(CtistaModel(CMatrix::Identity(2, 2), ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 0),
                    DomainError);
    CHECK_THROWS_AS(CtistaModel(CMatrix::Zero(2, 3), ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 1),
                    RankError);
  }
}

// Re-evaluates the recursion one scalar at a time and compares with the trace.
TEST_CASE("transcript oracle on a small sparse instance") {
  const int n = 8, m = 4, T = 5;
  const CMatrix a = random_cmatrix(m, n, 8, 1.0 / m);
  const CVector x = bg_vector(n, 9);
  RngStream rng(10, 10);
  const CVector y = a * x + sample_cgaussian(0.0, 1e-3, rng, m);
  const CtistaParams p({1.0, 0.9, 1.1, 0.8, 1.2}, {0.05, 0.02, 0.01, -0.01, 0.005}, {1.0, 1.5, 0.5, 2.0, 1.0});
  for (const auto& f : {ComponentwiseMap::identity(), clip_map(0.7)}) {
    CAPTURE(f.name());
    const CtistaModel model(a, f, ShrinkageFn::complex_soft(), T);
    const RecoveryResult res = ctista_forward(model, p, y);
    REQUIRE(res.trace.steps.size() == T);

    const CMatrix w = model.W();
    double tr = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) tr += std::norm(a(i, j));
    CVector s = w * y;
    for (int t = 0; t < T; ++t) {
      CVector u = CVector::Zero(m);
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) u(i) += a(i, j) * s(j);
      double res_sq = 0.0;
      CVector q(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const cplx e = y(i) - f.eval(u(i));
        res_sq += std::norm(e);
        q(i) = std::conj(e) * f.d_f_dzc(u(i)) + e * f.d_fconj_dzc(u(i));
      }
      const CVector r = s + p.beta[t] * (w * q);
      const double lam = std::max(p.a[t] + p.b[t] * res_sq / tr, 1e-9);
      const TraceStep& step = res.trace.steps[t];
      CHECK((step.s - s).norm() <= 1e-12 * std::max(1.0, s.norm()));
      CHECK(std::abs(step.residual_sq - res_sq) <= 1e-12 * std::max(1.0, res_sq));
      CHECK(std::abs(step.lambda - lam) <= 1e-12);
      CHECK((step.r - r).norm() <= 1e-12 * std::max(1.0, r.norm()));
      for (Eigen::Index j = 0; j < n; ++j) s(j) = soft_complex(r(j), lam);
    }
    CHECK((res.estimate - s).norm() <= 1e-12 * std::max(1.0, s.norm()));
  }
}

TEST_CASE("ctista_forward invariants") {
  const CMatrix a = random_cmatrix(6, 12, 11, 1.0 / 6);
  const CVector x = bg_vector(12, 12);
  const CVector y = a * x;
  const CtistaParams p = CtistaParams::constant(4, 1.0, -0.5, 0.2);
  const CtistaModel model(a, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 4);

  SECTION("projection onto consistency") {
    const RecoveryResult res = ctista_forward(model, CtistaParams::constant(4, 1.0, 0.01, 1.0), y);
    for (const auto& step : res.trace.steps) CHECK((a * step.r - y).norm() <= 1e-9);
  }
  SECTION("lambda clamp") {
    const RecoveryResult res = ctista_forward(model, p, y);
    for (const auto& step : res.trace.steps) CHECK(step.lambda >= kLambdaFloor);
  }
  SECTION("bit-identical repeat") {
    const RecoveryResult r1 = ctista_forward(model, p, y);
    const RecoveryResult r2 = ctista_forward(model, p, y);
    CHECK(r1.estimate == r2.estimate);
    for (std::size_t t = 0; t < r1.trace.steps.size(); ++t) {
      CHECK(r1.trace.steps[t].s == r2.trace.steps[t].s);
      CHECK(r1.trace.steps[t].r == r2.trace.steps[t].r);
      CHECK(r1.trace.steps[t].lambda == r2.trace.steps[t].lambda);
    }
  }
  SECTION("column permutation equivariance") {
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.begin() + 7);
    std::swap(perm[3], perm[10]);
    CMatrix ap(6, 12);
    CVector xp(12);
    for (int j = 0; j < 12; ++j) {
      ap.col(j) = a.col(perm[j]);
      xp(j) = x(perm[j]);
    }
    const CtistaModel mp(ap, ComponentwiseMap::identity(), ShrinkageFn::complex_soft(), 4);
    const CtistaParams q = CtistaParams::constant(4, 1.0, 0.02, 1.0);
    const CVector est = ctista_forward(model, q, y).estimate;
    const CVector est_p = ctista_forward(mp, q, ap * xp).estimate;
    for (int j = 0; j < 12; ++j) CHECK(std::abs(est_p(j) - est(perm[j])) <= 1e-10);
  }
  SECTION("batch columns equal single runs") {
    CMatrix ys(6, 3);
    for (int c = 0; c < 3; ++c) ys.col(c) = a * bg_vector(12, 20 + c);
    const CMatrix out = forward_batch(model, p, ys);
    for (int c = 0; c < 3; ++c) CHECK((out.col(c) - ctista_forward(model, p, ys.col(c)).estimate).norm() <= 1e-12);
  }
  SECTION("divergence reports the layer") {
    CVector yy = y;
    yy(0) += 1.0;
    try {
      ctista_forward(model, CtistaParams::constant(4, 1e200, 0.0, 0.0), yy);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.iteration() >= 1);
      CHECK(e.iteration() <= 4);
    }
  }
}

TEST_CASE("zf_detect") {
  const CVector y = random_cvector(4, 30);
  CHECK(zf_detect(CMatrix::Identity(4, 4), y) == y);
  const CMatrix sq = random_cmatrix(5, 5, 31);
  const CVector x = random_cvector(5, 32);
  CHECK((zf_detect(pseudo_inverse(sq), sq * x) - x).norm() <= 1e-9);
  const CMatrix fat = random_cmatrix(4, 9, 33);
  const CVector xf = random_cvector(9, 34);
  const CVector yf = fat * xf;
  CHECK((fat * zf_detect(pseudo_inverse(fat), yf) - yf).norm() <= 1e-9);
  CHECK_THROWS_AS(zf_detect(pseudo_inverse(fat), CVector::Zero(5)), DimensionError);
}
