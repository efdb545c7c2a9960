#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "hardylab/herglotz.hpp"

using namespace hardylab;

namespace {

double adaptive(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

BoundarySamples one_plus_z(int N) {
  return sample(make_grid(N), [](double t) { return 1.0 + std::polar(1.0, t); });
}

}  // namespace

TEST(Grid, HalfOffsetAngles) {
  auto g = make_grid(8);
  ASSERT_EQ(g->size, 8);
  for (int j = 0; j < 8; ++j) EXPECT_NEAR(g->angles[j], pi * (2 * j + 1) / 8, 1e-15);
  for (double t : g->angles) EXPECT_NE(t, 0.0);
  // 1 - e^{-1/|t|} is finite on every sample
  for (double t : g->angles) EXPECT_TRUE(std::isfinite(1.0 - std::exp(-1.0 / std::abs(wrap_angle(t)))));
}

TEST(Grid, RejectsBadSizes) {
  EXPECT_THROW(make_grid(12), LabError);
  EXPECT_THROW(make_grid(0), LabError);
}

TEST(Quadrature, Normalized) {
  for (int N : {8, 64, 1024}) EXPECT_NEAR(quadrature(sample(make_grid(N), [](double) { return cplx(1); })).real(), 1.0, 1e-15);
}

TEST(Quadrature, ConstantAndMonomials) {
  const int N = 64;
  auto g = make_grid(N);
  EXPECT_NEAR(std::abs(quadrature(sample(g, [](double) { return cplx(2.5, -1); })) - cplx(2.5, -1)), 0, 1e-14);
  for (int k : {1, 5, 31, -7, -31}) {
    auto f = sample(g, [k](double t) { return std::polar(1.0, k * t); });
    EXPECT_LT(std::abs(quadrature(f)), 1e-14) << k;
  }
}

TEST(Quadrature, AbsOnePlusZAgainstAdaptive) {
  const double oracle = adaptive([](double t) { return std::abs(1.0 + std::polar(1.0, t)); }, 0, two_pi) / two_pi;
  EXPECT_NEAR(oracle, 4 / pi, 1e-12);
  auto f = sample(make_grid(4096), [](double t) { return cplx(std::abs(1.0 + std::polar(1.0, t))); });
  EXPECT_NEAR(quadrature(f).real(), oracle, 1e-6);
}

TEST(Taylor, ConstantAndMonomial) {
  auto g = make_grid(64);
  auto c = taylor_coefficients(sample(g, [](double) { return cplx(1); }), 10);
  EXPECT_NEAR(std::abs(c[0] - 1.0), 0, 1e-14);
  for (int m = 1; m <= 10; ++m) EXPECT_LT(std::abs(c[m]), 1e-14);
  for (int k : {0, 3, 10}) {
    auto cm = taylor_coefficients(sample(g, [k](double t) { return std::polar(1.0, k * t); }), 10);
    for (int m = 0; m <= 10; ++m) EXPECT_NEAR(std::abs(cm[m]), m == k ? 1.0 : 0.0, 1e-13);
  }
}

TEST(Taylor, GeometricSeries) {
  const int N = 64;
  auto c = taylor_coefficients(sample(make_grid(N), [](double t) { return 1.0 / (1.0 - std::polar(1.0, t) / 2.0); }), 20);
  // aliasing: c_n picks up 2^{-(n+N)} / (1 - 2^{-N}), far below 2^{-N/2+n}
  for (int n = 0; n <= 20; ++n) {
    EXPECT_NEAR(c[n].real(), std::ldexp(1.0, -n), std::ldexp(1.0, -N / 2 + n)) << n;
    EXPECT_NEAR(c[n].imag(), 0, std::ldexp(1.0, -N / 2 + n));
  }
}

TEST(Taylor, RequiresMBelowHalfGrid) { EXPECT_THROW(taylor_coefficients(one_plus_z(16), 8), LabError); }

TEST(HardyNorm, Values) {
  EXPECT_NEAR(hardy_norm(sample(make_grid(32), [](double) { return cplx(0, -3); }), 1.3), 3.0, 1e-14);
  EXPECT_NEAR(hardy_norm(one_plus_z(64), 2.0), std::sqrt(2.0), 1e-8);
  const double l1 = adaptive([](double t) { return std::abs(1.0 + std::polar(1.0, t)); }, 0, two_pi) / two_pi;
  EXPECT_NEAR(hardy_norm(one_plus_z(4096), 1.0), l1, 1e-6);
}

TEST(LogIntegral, Simple) {
  const int N = 64;
  EXPECT_NEAR(log_integral(std::vector<double>(N, 1.0)).value, 0.0, 1e-15);
  EXPECT_NEAR(log_integral(std::vector<double>(N, std::exp(-1.0))).value, -1.0, 1e-14);
  EXPECT_FALSE(log_integral(std::vector<double>(N, std::exp(-1.0))).divergent);
}

TEST(LogIntegral, DivergentForms) {
  // log (e^{-1/|t|}) = -1/|t| has a logarithmically divergent integral
  auto li = log_integral([](double t) { return -1.0 / std::abs(t); }, 1 << 12);
  EXPECT_TRUE(li.divergent);
  // -e^{1/|t|} overflows the threshold
  auto lx = log_integral([](double t) { return -std::exp(1.0 / std::abs(t)); }, 1 << 10);
  EXPECT_TRUE(lx.divergent);
  // log |sin(t/2)|^2 integrates to -2 log 2
  auto ls = log_integral([](double t) { return 2 * std::log(std::abs(std::sin(t / 2))); }, 1 << 10);
  EXPECT_FALSE(ls.divergent);
  EXPECT_NEAR(ls.value, -2 * std::log(2.0), 2e-3);
}

TEST(Herglotz, Constant) {
  HerglotzTransform U(make_grid(64), std::vector<double>(64, 0.7));
  for (cplx z : {cplx(0), cplx(0.5), cplx(0.3, 0.4)}) EXPECT_NEAR(std::abs(U(z) - 0.7), 0, 1e-13);
}

TEST(Herglotz, OnePlusCos) {
  const int N = 1 << 12;
  auto g = make_grid(N);
  std::vector<double> u(N);
  for (int j = 0; j < N; ++j) u[j] = 1 + std::cos(g->angles[j]);
  HerglotzTransform U(g, u);
  for (cplx z : {cplx(0), cplx(0, 0.5), cplx(-0.7)}) EXPECT_NEAR(std::abs(U(z) - (1.0 + z)), 0, 1e-6);
  // series form agrees on the circle: 1 + e^{it}
  for (double t : {0.1, 1.0, 2.5}) EXPECT_NEAR(std::abs(U.series(t) - (1.0 + std::polar(1.0, t))), 0, 1e-12);
}

TEST(Herglotz, SinSquaredAtOrigin) {
  const int N = 256;
  auto g = make_grid(N);
  std::vector<double> u(N);
  for (int j = 0; j < N; ++j) u[j] = std::pow(std::sin(g->angles[j] / 2), 2);
  EXPECT_NEAR(HerglotzTransform(g, u)(0.0).real(), 0.5, 1e-14);
}

TEST(Herglotz, ReproducesRealPartOnGrid) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(0.0, 2.0);
  const int N = 128;
  std::vector<double> u(N);
  for (auto& x : u) x = d(rng);
  HerglotzTransform U(make_grid(N), u);
  auto tr = U.trace_at_radius(1.0);
  for (int j = 0; j < N; ++j) EXPECT_NEAR(tr[j].real(), u[j], 1e-12);
}

TEST(Outer, ConstantModulus) {
  auto w = outer_from_log_modulus(make_grid(64), std::vector<double>(64, std::log(0.3)));
  for (cplx z : {cplx(0), cplx(0.5), cplx(0.3, 0.4)}) EXPECT_NEAR(std::abs(w(z) - 0.3), 0, 1e-13);
}

TEST(Outer, ValueAtOriginIsGeometricMean) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(0.1, 3.0);
  const int N = 256;
  std::vector<double> lu(N);
  for (auto& x : lu) x = std::log(d(rng));
  auto w = outer_from_log_modulus(make_grid(N), lu);
  EXPECT_NEAR(std::abs(w(0.0)), std::exp(quadrature_real(lu)), 1e-12);
  EXPECT_NEAR(std::abs(w.at_zero()), std::exp(quadrature_real(lu)), 1e-12);
}

TEST(Outer, OneMinusZFromItsModulus) {
  const int N = 1 << 13;
  auto g = make_grid(N);
  std::vector<double> lu(N);
  for (int j = 0; j < N; ++j) lu[j] = std::log(2 * std::abs(std::sin(g->angles[j] / 2)));
  auto w = outer_from_log_modulus(g, lu);
  auto c = taylor_coefficients(w.trace(), 8);
  // 1 - z up to a unimodular factor; |w(0)| = 1 fixes that factor as c_0
  const cplx unit = c[0] / std::abs(c[0]);
  EXPECT_NEAR(std::abs(c[0] - unit), 0, 1e-4);
  EXPECT_NEAR(std::abs(c[1] + unit), 0, 1e-4);
  for (int m = 2; m <= 8; ++m) EXPECT_LT(std::abs(c[m]), 1e-4) << m;
}

TEST(Outer, RejectsNonIntegrableLog) {
  std::vector<double> lu(64, 0.0);
  lu[3] = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(outer_from_log_modulus(make_grid(64), lu), LabError);
  auto g = make_grid(64);
  BoundarySamples u{g, std::vector<cplx>(64, cplx(1))};
  u.values[5] = 0.0;
  try {
    outer_from_modulus(u);
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergent_log_integral);
  }
}

TEST(Property, QuadratureIsLinear) {
  std::mt19937 rng(3);
  std::normal_distribution<double> d;
  auto g = make_grid(64);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<cplx> a(64), b(64), s(64);
    const double alpha = d(rng);
    for (int j = 0; j < 64; ++j) {
      a[j] = {d(rng), d(rng)};
      b[j] = {d(rng), d(rng)};
      s[j] = alpha * a[j] + b[j];
    }
    const cplx lhs = quadrature({g, s});
    const cplx rhs = alpha * quadrature({g, a}) + quadrature({g, b});
    EXPECT_NEAR(std::abs(lhs - rhs), 0, 1e-13);
  }
}

TEST(Property, FourierRoundTrip) {
  std::mt19937 rng(5);
  std::normal_distribution<double> d;
  for (int N : {8, 256}) {
    std::vector<cplx> f(N);
    for (auto& x : f) x = {d(rng), d(rng)};
    auto back = fourier_synthesis(fourier_coefficients(f));
    for (int j = 0; j < N; ++j) EXPECT_NEAR(std::abs(back[j] - f[j]), 0, 1e-12);
  }
}

TEST(Property, ParsevalForPolynomials) {
  std::mt19937 rng(9);
  std::normal_distribution<double> d;
  auto g = make_grid(128);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<cplx> c(20);
    double e = 0;
    for (auto& x : c) x = {d(rng), d(rng)}, e += std::norm(x);
    auto f = sample(g, [&](double t) {
      cplx s = 0;
      for (int k = 19; k >= 0; --k) s = s * std::polar(1.0, t) + c[k];
      return s;
    });
    EXPECT_NEAR(hardy_norm(f, 2.0), std::sqrt(e), 1e-11);
  }
}
