#include <gtest/gtest.h>

#include <random>

#include "hardylab/weights.hpp"

using namespace hardylab;

namespace {

PullbackMeasure single_atom(cplx z, double mass = 1.0) {
  PullbackMeasure m;
  m.atoms.push_back(make_atom(z, 1.0 - std::abs(z), mass));
  m.totalMass = mass;
  return m;
}

PullbackMeasure grid_measure(const Symbol& s, int N, const std::vector<double>& density = {}) {
  auto tr = s.trace(make_grid(N));
  return pullback(tr, density.empty() ? unit_density(N) : density);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// random atoms, some on the circle
PullbackMeasure random_measure(std::mt19937& rng, int count) {
  std::uniform_real_distribution<double> u(0, 1);
  PullbackMeasure m;
  for (int i = 0; i < count; ++i) {
    const double depth = i % 7 == 0 ? 0.0 : std::pow(u(rng), 4);
    m.atoms.push_back(make_atom(std::polar(1.0 - depth, two_pi * u(rng)), depth, u(rng)));
  }
  for (const auto& a : m.atoms) m.totalMass += a.mass;
  return m;
}

}  // namespace

TEST(Pullback, UnitDensityHasUnitMass) {
  EXPECT_NEAR(grid_measure(half(), 1024).totalMass, 1.0, 1e-14);
}

TEST(Pullback, ConstantSymbolAtoms) {
  auto m = grid_measure(constant_symbol(cplx(0.3)), 64);
  for (const auto& a : m.atoms) EXPECT_NEAR(std::abs(a.z - 0.3), 0, 1e-16);
}

TEST(Pullback, WeightedMassIsHardyNorm) {
  auto s = half();
  auto w = hs_weight(s);
  auto g = make_grid(1 << 12);
  auto m = pullback(s.trace(g), w.density(g));
  const double n2 = hardy_norm(w.trace(g), 2.0);
  EXPECT_NEAR(m.totalMass, n2 * n2, 1e-10);
}

TEST(Window, WholeDisk) {
  auto m = grid_measure(lens(0.5), 512);
  EXPECT_NEAR(window_mass(m, {1.0, 1.0, WindowFlavor::carleson}), m.totalMass, 1e-14);
}

TEST(Window, AtomOutsideShallowWindow) {
  EXPECT_EQ(window_mass(single_atom(0.9), {1.0, 0.05, WindowFlavor::carleson}), 0.0);
  EXPECT_EQ(window_mass(single_atom(0.9), {1.0, 0.1, WindowFlavor::carleson}), 1.0);
}

TEST(Window, LensContactScaling) {
  auto m = graded_pullback(lens(0.5), [](double) { return 0.0; });
  std::vector<double> x, y;
  for (int n = 4; n <= 12; ++n) {
    const double h = std::ldexp(1.0, -n);
    x.push_back(std::log(h));
    y.push_back(std::log(window_mass(m, {1.0, h, WindowFlavor::carleson})));
  }
  EXPECT_NEAR(slope(x, y), 2.0, 0.15);
}

TEST(Profile, ArcMeasure) {
  const int N = 1 << 12;
  auto m = grid_measure(power_symbol(1), N);
  auto r = carleson_profile(m, 2, 10);
  for (std::size_t i = 0; i < r.h.size(); ++i) EXPECT_NEAR(r.rho[i], r.h[i], 2.0 / N);
}

TEST(Profile, AtomAtOrigin) {
  auto r = carleson_profile(single_atom(0.0), 1, 10);
  for (double x : r.rho) EXPECT_EQ(x, 0.0);
}

TEST(Profile, LensDecompactIsCarlesonNotVanishing) {
  auto s = lens(0.5);
  auto nu = graded_measure(s, lens_decompact_weight(0.5));
  auto r = carleson_profile(nu, 4, 12);
  EXPECT_TRUE(std::isfinite(r.constant));
  EXPECT_GE(r.vanishingScore, 0.05);
}

TEST(Profile, NestingOfWindows) {
  std::mt19937 rng(31);
  auto m = random_measure(rng, 500);
  auto r = carleson_profile(m, 1, 12);
  for (std::size_t i = 1; i < r.rho.size(); ++i) EXPECT_LE(r.rho[i], r.rho[i - 1]);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const cplx c = std::polar(1.0, two_pi * u(rng));
    double prev = 0;
    for (int n = 12; n >= 0; --n) {
      const double v = window_mass(m, {c, std::ldexp(1.0, -n), WindowFlavor::carleson});
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Annulus, WholeAnnulusExcludesCircle) {
  std::mt19937 rng(37);
  auto m = random_measure(rng, 300);
  double inside = 0;
  for (const auto& a : m.atoms)
    if (a.depth > 0) inside += a.mass;
  EXPECT_NEAR(annulus_mass(m, 1.0, false), inside, 1e-12);
}

TEST(Annulus, BetaExpScaling) {
  auto m = graded_pullback(beta_exp(2), [](double) { return 0.0; });
  std::vector<double> x, y;
  for (int n = 4; n <= 16; ++n) {
    const double h = std::ldexp(1.0, -n);
    x.push_back(std::log(h));
    y.push_back(std::log(annulus_mass(m, h, false)));
  }
  EXPECT_NEAR(slope(x, y), 0.5, 0.1);
}

TEST(Annulus, HsExtremalDyadicBand) {
  auto m = grid_measure(hs_extremal(), 1 << 16);
  std::vector<double> v;
  for (int n = 6; n <= 14; ++n) {
    const double h = std::ldexp(1.0, -n), L = std::log(1 / h);
    v.push_back(annulus_mass(m, h, true) * L * std::pow(std::log(L), 2));
  }
  EXPECT_LE(*std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end()), 3.0);
}

TEST(Boxes, IndexConvention) {
  EXPECT_EQ(box_index(0.0, 3), 0);
  EXPECT_EQ(box_index(1.0 / 16 - 1e-12, 3), 0);
  EXPECT_EQ(box_index(1.0 / 16 + 1e-12, 3), 1);
  EXPECT_EQ(box_index(0.99, 3), 0);
}

TEST(Luecking, AtomAtOrigin) {
  for (double p : {0.5, 1.0, 2.0, 3.0}) EXPECT_NEAR(luecking_sum(single_atom(0.0), p, 10).partialSums.back(), 1.0, 1e-15);
}

TEST(Luecking, HalfDilation) {
  auto m = grid_measure(dilation(0.5), 256);
  for (double p : {0.5, 1.0, 2.0, 4.0}) {
    auto r = luecking_sum(m, p, 12);
    EXPECT_NEAR(r.partialSums.back(), 2.0, 1e-12) << p;
    EXPECT_NEAR(r.perLevel[1], 2.0, 1e-12);
    EXPECT_EQ(r.perLevel[0], 0.0);
  }
}

TEST(Luecking, HsExtremalWithGapDensity) {
  auto s = hs_extremal();
  const int N = 1 << 16;
  auto g = make_grid(N);
  auto tr = s.trace(g);
  auto m = pullback(tr, tr.gap);
  auto r2 = luecking_sum(m, 2.0, 14);
  auto r1 = luecking_sum(m, 1.0, 14);
  EXPECT_EQ(r2.verdict, Verdict::converging);
  EXPECT_EQ(r1.verdict, Verdict::diverging);
  std::vector<double> scaled;
  for (int n = 6; n <= 14; ++n) scaled.push_back(std::sqrt(double(n)) * std::log(double(n)) * r1.perLevel[n]);
  EXPECT_LE(*std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end()), 5.0);
}

TEST(Luecking, Verdicts) {
  std::vector<double> inc, part;
  double s = 0;
  for (int n = 0; n < 20; ++n) inc.push_back(std::pow(2.0, -n)), part.push_back(s += inc.back());
  EXPECT_EQ(series_verdict(inc, part), Verdict::converging);
  inc.clear(), part.clear(), s = 0;
  for (int n = 1; n <= 20; ++n) inc.push_back(1.0 / n), part.push_back(s += inc.back());
  EXPECT_EQ(series_verdict(inc, part), Verdict::diverging);
  EXPECT_EQ(series_verdict({1, 0.5, 0.25}, {1, 1.5, 1.75}), Verdict::inconclusive);
}

TEST(SimpBound, ZeroMeasure) {
  PullbackMeasure z;
  auto r = carleson_profile(z, 4, 12);
  for (int n : {1, 16, 256}) EXPECT_NEAR(simp_bound(z, n, r), std::exp(-n * std::ldexp(1.0, -4)), 1e-15);
}

TEST(SimpBound, ArcMeasureNoDecay) {
  auto m = grid_measure(power_symbol(1), 1 << 12);
  auto r = carleson_profile(m, 4, 12);
  for (int n : {16, 256, 4096}) EXPECT_GE(simp_bound(m, n, r), 1.0 - 1e-3);
}

TEST(SimpBound, StaircaseDecays) {
  auto s = beta_exp(2);
  StaircaseSpec sp;
  sp.delta = staircase_delta(2.0, 40);
  for (int k = 1; k <= 40; ++k) sp.level_h.push_back(std::ldexp(1.0, -k));
  auto m0 = graded_pullback(s, [](double) { return 0.0; }, {}, level_breakpoints(s, sp.level_h));
  for (double h : sp.level_h) sp.masses.push_back(level_mass(m0, h));
  auto nu = graded_measure(s, staircase_weight(s, sp));
  auto r = carleson_profile(nu, 4, 20);
  double prev = 1e300;
  for (int n : {16, 64, 256, 1024, 4096, 1 << 16}) {
    const double b = simp_bound(nu, n, r);
    EXPECT_LT(b, prev) << n;
    prev = b;
  }
  EXPECT_LE(simp_bound(nu, 1 << 16, r) * 10, simp_bound(nu, 16, r));
}

TEST(Property, BoxesPartitionDyadicAnnulus) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_measure(rng, 2000);
    for (int n = 0; n <= 14; ++n) {
      double sum = 0;
      for (long j = 0; j < (1L << n); ++j) sum += window_mass(m, dyadic_window(j, n, WindowFlavor::hl_box));
      const double ann = annulus_mass(m, std::ldexp(1.0, -n), true);
      EXPECT_NEAR(sum, ann, 1e-12 * std::max(ann, 1e-300)) << n;
      double viaMap = 0;
      for (const auto& [j, v] : box_masses(m, n)) viaMap += v;
      EXPECT_NEAR(viaMap, ann, 1e-12 * std::max(ann, 1e-300));
    }
  }
}

TEST(Property, LueckingMonotoneInPOnNormalizedData) {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    // every box value 2^n mu(box) <= 1: one small atom per level box
    PullbackMeasure m;
    for (int n = 0; n <= 8; ++n) {
      const double h = std::ldexp(1.0, -n);
      for (long j = 0; j < (1L << n); ++j) {
        const double depth = h * (0.5 + 0.5 * u(rng)) + 1e-15;
        m.atoms.push_back(make_atom(std::polar(1 - std::min(depth, h), two_pi * j * h), std::min(depth, h), h * u(rng)));
      }
    }
    std::vector<double> prev;
    for (double p : {0.5, 1.0, 1.5, 2.0, 3.0}) {
      auto r = luecking_sum(m, p, 8);
      if (!prev.empty())
        for (int n = 0; n <= 8; ++n) EXPECT_LE(r.perLevel[n], prev[n] * (1 + 1e-12)) << p << " " << n;
      prev = r.perLevel;
    }
  }
}

TEST(Property, ConvexityOfBoxSumsBelowTwo) {
  // sum_j x_j^{p/2} >= (sum_j x_j)^{p/2} for p < 2, on every level
  for (const auto& s : {half(), lens(0.5), beta_exp(2), hs_extremal()}) {
    auto m = grid_measure(s, 1 << 12);
    for (int n = 0; n <= 12; ++n) {
      const auto boxes = box_masses(m, n);
      double tot = 0;
      for (const auto& [j, v] : boxes) tot += std::ldexp(v, n);
      for (double p : {0.5, 1.0, 1.5}) {
        double lhs = 0;
        for (const auto& [j, v] : boxes) lhs += std::pow(std::ldexp(v, n), p / 2);
        EXPECT_GE(lhs * (1 + 1e-12), std::pow(tot, p / 2)) << s.name << " " << n;
      }
    }
  }
}
