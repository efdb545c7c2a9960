#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include "symbols.hpp"

namespace hardylab {

// An atom keeps its argument (as a fraction of a turn) and its depth 1 - |z| separately, so
// window tests near the circle do not lose the depth to rounding of |z|.
struct Atom {
  cplx z;
  double turn = 0.0;   // arg z / 2pi in [0, 1)
  double arg_hi = 0.0, arg_lo = 0.0;  // arg z = arg_hi + arg_lo, for kernel differences
  double depth = 1.0;  // 1 - |z|
  double mass = 0.0;
};

struct PullbackMeasure {
  std::vector<Atom> atoms;
  double totalMass = 0.0;

  void finalize() {
    CompensatedSum<double> s;
    for (const auto& a : atoms) s.add(a.mass);
    totalMass = s.value();
  }
};

inline Atom make_atom(cplx z, double depth, double mass) {
  Atom a;
  a.z = z;
  a.depth = depth;
  a.arg_hi = z == cplx(0) ? 0.0 : std::arg(z);
  a.turn = turn_of(a.arg_hi);
  a.mass = mass;
  return a;
}

inline Atom make_atom(const BoundaryPoint& p, double mass) {
  Atom a = make_atom(p.value, p.gap, mass);
  if (!std::isnan(p.arg_hi)) {
    a.arg_hi = p.arg_hi;
    a.arg_lo = p.arg_lo;
    a.turn = turn_of(p.arg_hi + p.arg_lo);
  }
  return a;
}

inline PullbackMeasure pullback(const SymbolTrace& phi, const std::vector<double>& density) {
  require(static_cast<int>(density.size()) == phi.size(), ErrorKind::invalid_argument,
          "pullback: traces must share one grid");
  PullbackMeasure mu;
  const int N = phi.size();
  mu.atoms.reserve(N);
  for (int j = 0; j < N; ++j) {
    require(density[j] >= 0.0, ErrorKind::invalid_argument, "pullback: density must be nonnegative");
    mu.atoms.push_back(make_atom(phi.values.values[j], phi.gap[j], density[j] / N));
  }
  mu.finalize();
  return mu;
}

inline PullbackMeasure pullback(const BoundarySamples& phi, const BoundarySamples& density) {
  require_same_grid(phi, density);
  PullbackMeasure mu;
  const int N = phi.size();
  for (int j = 0; j < N; ++j) {
    const double d = density.values[j].real();
    require(d >= 0.0, ErrorKind::invalid_argument, "pullback: density must be nonnegative");
    const cplx z = phi.values[j];
    mu.atoms.push_back(make_atom(z, std::max(0.0, 1.0 - std::abs(z)), d / N));
  }
  mu.finalize();
  return mu;
}

inline std::vector<double> unit_density(int N) { return std::vector<double>(N, 1.0); }

inline std::vector<double> density_from_weight(const BoundarySamples& w) {
  std::vector<double> d(w.values.size());
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::norm(w.values[j]);
  return d;
}

// ---------------------------------------------------------------------------------------
// graded atomization of m_phi or nu for closed-form symbols

struct GradedOptions {
  int levels = 60;        // dyadic shells toward each contact angle
  int q = 4;              // Gauss-Legendre nodes per cell
  double kappa = 1.0;     // image diameter allowed per unit depth
  double tol = 1e-9;      // cells whose mass/depth is below tol^2 are not refined
  int max_subdivisions = 4096;
  int plain_cells = 64;   // used when the symbol has no contact angle
};

namespace detail {

inline void gauss_legendre(int q, std::vector<double>& x, std::vector<double>& w) {
  // Golub-Welsch
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(q, q);
  for (int i = 1; i < q; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(q);
  w.resize(q);
  for (int i = 0; i < q; ++i) {
    x[i] = es.eigenvalues()(i);
    w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

}  // namespace detail

struct NearAngle {
  double contact = 0.0;
  double offset = 0.0;  // signed
};

// log_density(t) = log of the density against m at angle t (0 for m_phi).  Nodes are placed by
// their offset from the nearest contact angle, in dyadic shells refined until the image of each
// cell has diameter below kappa times its depth.
inline PullbackMeasure graded_pullback(const Symbol& phi, const std::function<double(double)>& log_density,
                                       const GradedOptions& opt = {}, const std::vector<NearAngle>& breaks = {}) {
  std::vector<double> gx, gw;
  detail::gauss_legendre(opt.q, gx, gw);
  PullbackMeasure mu;

  auto emit_cell = [&](double c, double sign, double a, double b) {
    constexpr int probes = 8;
    double dmin = 1e300, diam = 0.0, dens = 0.0;
    BoundaryPoint prev = phi.boundary_near(c, sign * a);
    for (int i = 1; i <= probes; ++i) {
      const double s = a + (b - a) * i / probes;
      BoundaryPoint cur = phi.boundary_near(c, sign * s);
      dmin = std::min(dmin, cur.gap);
      diam += std::abs(cur.value - prev.value);
      dens = std::max(dens, std::exp(log_density(c + sign * s)));
      prev = cur;
    }
    dmin = std::max(dmin, 1e-300);
    const double cell_mass = (b - a) / two_pi * dens;
    int nsub = 1;
    if (cell_mass / dmin >= opt.tol * opt.tol)
      nsub = static_cast<int>(
          std::min<double>(opt.max_subdivisions, std::max(1.0, std::ceil(diam / (opt.kappa * dmin)))));
    for (int k = 0; k < nsub; ++k) {
      const double aa = a + (b - a) * k / nsub, bb = a + (b - a) * (k + 1) / nsub;
      for (int i = 0; i < opt.q; ++i) {
        const double s = 0.5 * (aa + bb) + 0.5 * (bb - aa) * gx[i];
        const double w = 0.5 * (bb - aa) * gw[i] / two_pi;
        const double m = w * std::exp(log_density(c + sign * s));
        if (m > 0) mu.atoms.push_back(make_atom(phi.boundary_near(c, sign * s), m));
      }
    }
  };

  std::vector<double> cs;
  for (double c : phi.contacts) cs.push_back(turn_of(c) * two_pi);
  std::sort(cs.begin(), cs.end());
  cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
  if (cs.empty()) {
    for (int i = 0; i < opt.plain_cells; ++i)
      emit_cell(0.0, 1.0, two_pi * i / opt.plain_cells, two_pi * (i + 1) / opt.plain_cells);
  } else {
    const std::size_t nc = cs.size();
    for (std::size_t i = 0; i < nc; ++i) {
      const double prev = i > 0 ? cs[i - 1] : cs[nc - 1] - two_pi;
      const double next = i + 1 < nc ? cs[i + 1] : cs[0] + two_pi;
      for (double sign : {-1.0, 1.0}) {
        const double L = 0.5 * (sign > 0 ? next - cs[i] : cs[i] - prev);
        std::vector<double> edges{0.0};
        for (int k = opt.levels; k >= 0; --k) edges.push_back(L * std::ldexp(1.0, -k));
        for (const auto& br : breaks) {
          if (std::abs(wrap_angle(br.contact - cs[i])) > 1e-12) continue;
          if (br.offset * sign > 0 && std::abs(br.offset) < L) edges.push_back(std::abs(br.offset));
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (std::size_t e = 0; e + 1 < edges.size(); ++e) emit_cell(cs[i], sign, edges[e], edges[e + 1]);
      }
    }
  }
  mu.finalize();
  return mu;
}

// offsets where the gap of phi crosses the given levels, found by bisection on each side of
// every contact angle (the gap is assumed monotone in the distance to the contact)
inline std::vector<NearAngle> level_breakpoints(const Symbol& phi, const std::vector<double>& levels) {
  std::vector<NearAngle> out;
  for (double c : phi.contacts) {
    double far = pi;
    for (double c2 : phi.contacts)
      if (c2 != c) far = std::min(far, std::abs(wrap_angle(c2 - c)) / 2);
    for (double side : {-1.0, 1.0}) {
      for (double target : levels) {
        double lo = 0.0, hi = far;
        if (phi.boundary_near(c, side * hi).gap < target) continue;
        for (int it = 0; it < 2000; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid == lo || mid == hi) break;
          if (phi.boundary_near(c, side * mid).gap <= target) lo = mid; else hi = mid;
        }
        if (lo > 0) out.push_back({c, side * lo});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// windows

enum class WindowFlavor { carleson, hl_box, modified_hl_box, annulus, dyadic_annulus };

struct WindowSpec {
  cplx center = 1.0;
  double h = 1.0;
  WindowFlavor flavor = WindowFlavor::carleson;
  double cRatio = 0.5;  // modified boxes: cRatio h <= depth <= h
  double turn = -1.0;   // center as a fraction of a turn; taken from center when negative
};

inline WindowSpec dyadic_window(long j, int n, WindowFlavor f) {
  WindowSpec w;
  w.turn = std::ldexp(double(j), -n);
  w.center = std::polar(1.0, two_pi * w.turn);
  w.h = std::ldexp(1.0, -n);
  w.flavor = f;
  return w;
}

namespace detail {

// offset of turn a from turn c reduced to (-1/2, 1/2]
inline double turn_offset(double a, double c) {
  double s = a - c;
  if (s > 0.5) s -= 1.0;
  else if (s <= -0.5) s += 1.0;
  return s;
}

inline bool in_window(const Atom& a, double cturn, double h, WindowFlavor f, double cRatio) {
  const double half = 0.5 * h;
  switch (f) {
    case WindowFlavor::carleson:
      return a.depth <= h && std::abs(turn_offset(a.turn, cturn)) <= half;
    case WindowFlavor::hl_box: {
      if (!(a.depth > half && a.depth <= h)) return false;
      const double s = turn_offset(a.turn, cturn);
      return s > -half && s <= half;
    }
    case WindowFlavor::modified_hl_box:
      return a.depth >= cRatio * h && a.depth <= h && std::abs(turn_offset(a.turn, cturn)) <= half;
    case WindowFlavor::annulus:
      return a.depth > 0.0 && a.depth <= h;
    case WindowFlavor::dyadic_annulus:
      return a.depth > half && a.depth <= h;
  }
  return false;
}

}  // namespace detail

inline double window_mass(const PullbackMeasure& mu, const WindowSpec& w) {
  require(w.h > 0.0 && w.h <= 1.0, ErrorKind::invalid_argument, "window size must lie in (0,1]");
  const double ct = w.turn >= 0 ? w.turn : turn_of(std::arg(w.center));
  CompensatedSum<double> s;
  for (const auto& a : mu.atoms)
    if (detail::in_window(a, ct, w.h, w.flavor, w.cRatio)) s.add(a.mass);
  return s.value();
}

inline double annulus_mass(const PullbackMeasure& mu, double h, bool dyadic) {
  require(h > 0.0 && h <= 1.0, ErrorKind::invalid_argument, "annulus_mass: h must lie in (0,1]");
  return window_mass(mu, {1.0, h, dyadic ? WindowFlavor::dyadic_annulus : WindowFlavor::annulus, 0.5});
}

// box index j of an atom at dyadic level n: the box centered at turn j/2^n that holds it
inline long box_index(double turn, int n) {
  const double scaled = std::ldexp(turn, n);
  long j = static_cast<long>(std::ceil(scaled - 0.5));
  const long count = 1L << n;
  j %= count;
  if (j < 0) j += count;
  return j;
}

inline std::map<long, double> box_masses(const PullbackMeasure& mu, int n) {
  const double h = std::ldexp(1.0, -n);
  std::map<long, CompensatedSum<double>> acc;
  for (const auto& a : mu.atoms)
    if (a.depth > 0.5 * h && a.depth <= h) acc[box_index(a.turn, n)].add(a.mass);
  std::map<long, double> out;
  for (auto& [j, s] : acc) out[j] = s.value();
  return out;
}

struct CarlesonReport {
  std::vector<int> levels;
  std::vector<double> h, rho, ratio, argmax;
  double constant = 0.0;
  double vanishingScore = 0.0;
};

inline CarlesonReport carleson_profile(const PullbackMeasure& mu, int n0, int n1, int heavy = 64) {
  require(n0 < n1, ErrorKind::invalid_argument, "carleson_profile: need n0 < n1");
  require(n1 <= ilog2(std::max<long>(1, mu.atoms.size())) + 4 || n1 <= 20, ErrorKind::resolution,
          "carleson_profile: n1 beyond resolution guard");
  std::vector<std::size_t> order(mu.atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mu.atoms[a].mass > mu.atoms[b].mass; });
  std::vector<double> heavy_turns;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(i) < heavy; ++i)
    heavy_turns.push_back(mu.atoms[order[i]].turn);

  CarlesonReport rep;
  for (int n = n0; n <= n1; ++n) {
    const double h = std::ldexp(1.0, -n);
    std::vector<const Atom*> cand;
    for (const auto& a : mu.atoms)
      if (a.depth <= h) cand.push_back(&a);
    std::stable_sort(cand.begin(), cand.end(), [](const Atom* a, const Atom* b) { return a->turn < b->turn; });
    std::vector<double> turns(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) turns[i] = cand[i]->turn;

    auto mass_at = [&](double ct) {
      CompensatedSum<double> s;
      auto scan = [&](double lo, double hi) {
        auto it = std::lower_bound(turns.begin(), turns.end(), lo - 1e-15);
        for (; it != turns.end() && *it <= hi + 1e-15; ++it) {
          const Atom& a = *cand[it - turns.begin()];
          if (detail::in_window(a, ct, h, WindowFlavor::carleson, 0)) s.add(a.mass);
        }
      };
      double lo = ct - 0.5 * h, hi = ct + 0.5 * h;
      if (h >= 1.0) {
        scan(0.0, 1.0);
      } else if (lo < 0) {
        scan(0.0, hi);
        scan(lo + 1.0, 1.0);
      } else if (hi >= 1.0) {
        scan(lo, 1.0);
        scan(0.0, hi - 1.0);
      } else {
        scan(lo, hi);
      }
      return s.value();
    };

    double best = 0.0, where = 0.0;
    const long nc = 1L << (n + 2);
    for (long j = 0; j < nc; ++j) {
      const double ct = std::ldexp(double(j), -(n + 2));
      const double m = mass_at(ct);
      if (m > best) best = m, where = ct;
    }
    for (double ct : heavy_turns) {
      const double m = mass_at(ct);
      if (m > best) best = m, where = ct;
    }
    rep.levels.push_back(n);
    rep.h.push_back(h);
    rep.rho.push_back(best);
    rep.ratio.push_back(best / h);
    rep.argmax.push_back(two_pi * where);
  }
  // W(xi, h/2) lies inside W(xi, h): coarser levels inherit finer sups
  for (std::size_t i = rep.rho.size() - 1; i-- > 0;)
    if (rep.rho[i + 1] > rep.rho[i]) {
      rep.rho[i] = rep.rho[i + 1];
      rep.ratio[i] = rep.rho[i] / rep.h[i];
      rep.argmax[i] = rep.argmax[i + 1];
    }
  rep.constant = *std::max_element(rep.ratio.begin(), rep.ratio.end());
  rep.vanishingScore = rep.ratio.front() > 0 ? rep.ratio.back() / rep.ratio.front() : 0.0;
  return rep;
}

enum class Verdict { converging, diverging, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::converging: return "converging";
    case Verdict::diverging: return "diverging";
    default: return "inconclusive";
  }
}

struct LueckingReport {
  double p = 2.0;
  std::vector<double> perLevel, partialSums;
  double tailExponent = 0.0;  // fitted power of the last four increments
  Verdict verdict = Verdict::inconclusive;
};

// Increments x_n ~ C n^{-s} fitted on the last four levels. Diverging when s <= 1 (no finite
// tail bound); converging when the last increment is below 1% of the partial sum and there are
// at least 8 levels.
inline Verdict series_verdict(const std::vector<double>& inc, const std::vector<double>& partial,
                              double* exponent = nullptr) {
  const std::size_t L = inc.size();
  double s = 0.0;
  bool fit = false;
  if (L >= 5) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    bool ok = true;
    for (std::size_t i = L - 4; i < L; ++i) {
      if (!(inc[i] > 0)) { ok = false; break; }
      const double x = std::log(double(i)), y = std::log(inc[i]);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++cnt;
    }
    if (ok) {
      s = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
      fit = true;
    }
  }
  if (exponent) *exponent = s;
  if (fit && s <= 1.0) return Verdict::diverging;
  if (L >= 8 && partial.back() > 0 && inc.back() < 0.01 * partial.back()) return Verdict::converging;
  if (L >= 8 && partial.back() == 0) return Verdict::converging;
  return Verdict::inconclusive;
}

inline LueckingReport luecking_sum(const PullbackMeasure& mu, double p, int nMax) {
  require(p > 0, ErrorKind::invalid_argument, "luecking_sum: p must be positive");
  require(nMax >= 0 && nMax <= 40, ErrorKind::resolution, "luecking_sum: nMax out of range");
  LueckingReport r;
  r.p = p;
  CompensatedSum<double> total;
  for (int n = 0; n <= nMax; ++n) {
    CompensatedSum<double> lev;
    for (const auto& [j, m] : box_masses(mu, n)) lev.add(std::pow(std::ldexp(m, n), p / 2));
    r.perLevel.push_back(lev.value());
    total.add(lev.value());
    r.partialSums.push_back(total.value());
  }
  r.verdict = series_verdict(r.perLevel, r.partialSums, &r.tailExponent);
  return r;
}

// discrete version of inf_h ( e^{-n h} + sup_{t <= h} sqrt(rho(t)/t) )
inline double simp_bound(const PullbackMeasure&, int n, const CarlesonReport& rep) {
  double best = 1e300;
  for (std::size_t i = 0; i < rep.h.size(); ++i) {
    double sup = 0.0;
    for (std::size_t k = 0; k < rep.h.size(); ++k)
      if (rep.h[k] <= rep.h[i]) sup = std::max(sup, std::sqrt(rep.ratio[k]));
    best = std::min(best, std::exp(-n * rep.h[i]) + sup);
  }
  return best;
}

}  // namespace hardylab
