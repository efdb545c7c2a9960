#pragma once

#include "carleson.hpp"

namespace hardylab {

// A weight is described by its boundary log-modulus; outer weights are realized on a grid
// through the Herglotz integral, closed-form weights carry their own evaluator.
struct Weight {
  std::string kind = "unit";
  std::string name = "unit";
  std::string provenance;

  std::function<double(double)> log_modulus_fn;  // log |w*(e^{it})|
  std::function<cplx(double)> closed_boundary;   // w*(e^{it}) when a closed form exists
  std::function<cplx(cplx)> closed_eval;

  // gap levels 1 - |phi*| where |w*| jumps; graded atomization puts cell edges there
  std::vector<double> jumps;

  // weights tied to the sample grid they were built on (box indicators)
  GridPtr bound_grid;
  std::vector<double> bound_log_modulus;

  bool grid_bound() const { return static_cast<bool>(bound_grid); }

  double log_modulus_at(double t) const {
    require(static_cast<bool>(log_modulus_fn), ErrorKind::invalid_argument,
            "weight " + name + " is only defined on its construction grid");
    return log_modulus_fn(t);
  }

  std::vector<double> log_modulus(const GridPtr& g) const {
    if (grid_bound()) {
      require(g->size == bound_grid->size, ErrorKind::invalid_argument,
              "weight " + name + " is bound to an N=" + std::to_string(bound_grid->size) + " grid");
      return bound_log_modulus;
    }
    std::vector<double> v(g->size);
    for (int j = 0; j < g->size; ++j) v[j] = log_modulus_fn(g->angles[j]);
    return v;
  }

  OuterFunction outer(const GridPtr& g) const { return outer_from_log_modulus(g, log_modulus(g)); }

  BoundarySamples trace(const GridPtr& g) const {
    if (closed_boundary) {
      std::vector<cplx> v(g->size);
      for (int j = 0; j < g->size; ++j) v[j] = closed_boundary(g->angles[j]);
      return {g, std::move(v)};
    }
    return outer(g).trace();
  }

  // |w*|^2 at the grid angles, straight from the log-modulus
  std::vector<double> density(const GridPtr& g) const {
    auto v = log_modulus(g);
    for (auto& x : v) x = std::exp(2 * x);
    return v;
  }

  std::function<double(double)> log_density() const {
    auto f = log_modulus_fn;
    return [f](double t) { return 2 * f(t); };
  }
};

inline Weight unit_weight() {
  Weight w;
  w.provenance = "unit weight";
  w.log_modulus_fn = [](double) { return 0.0; };
  w.closed_boundary = [](double) { return cplx(1.0); };
  w.closed_eval = [](cplx) { return cplx(1.0); };
  return w;
}

inline constexpr int default_check_grid = 1 << 12;

inline void require_log_integrable(const Symbol& phi, int checkN) {
  auto li = log_integral([&](double t) { return phi.log_gap(t); }, checkN);
  require(!li.divergent, ErrorKind::divergent_log_integral,
          "divergent log-integral: int log(1 - |phi*|) dm does not converge for " + phi.name);
}

// |w*|^2 = 1 - |phi*|
inline Weight hs_weight(const Symbol& phi, int checkN = default_check_grid) {
  require_log_integrable(phi, checkN);
  Weight w;
  w.kind = "hs";
  w.name = "hs";
  w.provenance = "Hilbert-Schmidt weight |w*|^2 = 1 - |phi*|";
  auto p = std::make_shared<Symbol>(phi);
  w.log_modulus_fn = [p](double t) { return 0.5 * p->log_gap(t); };
  return w;
}

// |w*| = (1 - |phi*|)^K; K = 0 gives the unit weight
inline Weight power_weight(const Symbol& phi, double K, int checkN = default_check_grid) {
  require(K >= 0, ErrorKind::invalid_argument, "power_weight: K must be >= 0");
  if (K == 0) {
    Weight w = unit_weight();
    w.kind = "power";
    w.name = "power:0";
    return w;
  }
  require_log_integrable(phi, checkN);
  Weight w;
  w.kind = "power";
  w.name = "power:" + detail::fmt_param(K);
  w.provenance = "power weight |w*| = (1 - |phi*|)^K";
  auto p = std::make_shared<Symbol>(phi);
  w.log_modulus_fn = [p, K](double t) { return K * p->log_gap(t); };
  return w;
}

// |w*| = (1 - |phi*|)^K as a prescribed boundary modulus only.  No outer function is built
// and no log-integrability is required, so this also covers symbols where hs_weight and
// power_weight refuse; it feeds pull-back densities and column norms.
inline Weight gap_modulus_weight(const Symbol& phi, double K) {
  require(K >= 0, ErrorKind::invalid_argument, "gap_modulus_weight: K must be >= 0");
  Weight w;
  w.kind = "gap";
  w.name = "gap:" + detail::fmt_param(K);
  w.provenance = "prescribed modulus (1 - |phi*|)^K, no outer function";
  auto p = std::make_shared<Symbol>(phi);
  w.log_modulus_fn = [p, K](double t) { return K == 0 ? 0.0 : K * p->log_gap(t); };
  return w;
}

// exponent as a function of the gap 1 - |phi*| (g composed with |phi*|)
using Gauge = std::function<double(double)>;

inline Gauge default_gauge(double K0 = 2.0) {
  // g(t) = max(K0, log log(e^2 / (1 - t)))
  return [K0](double gap) { return std::max(K0, std::log(2.0 - std::log(gap))); };
}

inline Weight gauge_weight(const Symbol& phi, Gauge g, int checkN = default_check_grid) {
  require_log_integrable(phi, checkN);
  auto p = std::make_shared<Symbol>(phi);
  auto f = [p, g](double t) {
    const double gap = p->gap(t);
    return gap > 0 ? g(gap) * p->log_gap(t) : -std::numeric_limits<double>::infinity();
  };
  auto li = log_integral(f, checkN);
  require(!li.divergent, ErrorKind::divergent_log_integral, "divergent log-integral for the gauge exponent");
  Weight w;
  w.kind = "gauge";
  w.name = "gauge";
  w.provenance = "gauge weight |w*| = (1 - |phi*|)^{g(|phi*|)}";
  w.log_modulus_fn = f;
  return w;
}

struct CompactifyResult {
  Weight weight;
  std::vector<int> schedule;         // k_n for n = 1..n_eff
  std::vector<double> partialSums;   // sum_{m<=n} c_{k_m} log m
  double tailBound = 0.0;            // sum_{n > n_eff} 2^{-n} log n
  bool cauchy = true;
};

// k_n = min{ k <= kMax : c_k <= 2^{-n} }, |w*| = prod_n 1/n on the nested sets F_{k_n}
inline CompactifyResult compactify_weight(const Symbol& phi, const LevelSets& L, int nMax = 64) {
  CompactifyResult r;
  for (int n = 1; n <= nMax; ++n) {
    const double target = std::ldexp(1.0, -n);
    int kn = -1;
    for (int k = 0; k <= L.kMax; ++k)
      if (L.masses[k] <= target) { kn = k; break; }
    if (kn < 0) break;
    r.schedule.push_back(kn);
  }
  require(!r.schedule.empty(), ErrorKind::not_compactifiable,
          "not compactifiable at this resolution: no level has c_k <= 1/2");
  CompensatedSum<double> s;
  for (std::size_t i = 0; i < r.schedule.size(); ++i) {
    s.add(L.masses[r.schedule[i]] * std::log(double(i + 1)));
    r.partialSums.push_back(s.value());
  }
  CompensatedSum<double> tail;
  for (int n = static_cast<int>(r.schedule.size()) + 1; n <= 2000; ++n) tail.add(std::ldexp(std::log(double(n)), -n));
  r.tailBound = r.schedule.size() >= static_cast<std::size_t>(nMax) ? 0.0 : tail.value();
  const double S = r.partialSums.back();
  r.cauchy = S > 0 ? r.tailBound <= 0.01 * S : true;

  auto p = std::make_shared<Symbol>(phi);
  auto sched = std::make_shared<std::vector<int>>(r.schedule);
  for (int k : r.schedule) r.weight.jumps.push_back(std::ldexp(1.0, -k));
  std::sort(r.weight.jumps.begin(), r.weight.jumps.end());
  r.weight.jumps.erase(std::unique(r.weight.jumps.begin(), r.weight.jumps.end()), r.weight.jumps.end());
  r.weight.kind = "compactify";
  r.weight.name = "compactify";
  r.weight.provenance = "compactifying infinite product, schedule k_n";
  r.weight.log_modulus_fn = [p, sched](double t) {
    const double gap = p->gap(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < sched->size(); ++i)
      if (gap <= std::ldexp(1.0, -(*sched)[i])) acc -= std::log(double(i + 1));
    return acc;
  };
  return r;
}

// delta_k = exp(-2^{k/beta} / k^2)
inline std::vector<double> staircase_delta(double beta, int K) {
  std::vector<double> d;
  for (int k = 1; k <= K; ++k) d.push_back(std::exp(-std::pow(2.0, k / beta) / (double(k) * k)));
  return d;
}

struct StaircaseSpec {
  std::vector<double> delta;    // delta_k, k = 1..K
  std::vector<double> level_h;  // F_k = { 1 - |phi*| <= level_h[k-1] }, default 2^{-k}
  std::vector<double> masses;   // c_k = m(F_k), for the convergence check
};

inline Weight staircase_weight(const Symbol& phi, StaircaseSpec spec) {
  const std::size_t K = spec.delta.size();
  if (spec.level_h.empty())
    for (std::size_t k = 1; k <= K; ++k) spec.level_h.push_back(std::ldexp(1.0, -int(k)));
  require(spec.level_h.size() == K && spec.masses.size() >= K, ErrorKind::invalid_argument,
          "staircase_weight: need one level size and one mass per delta");
  for (double d : spec.delta)
    require(d > 0.0 && d <= 1.0, ErrorKind::invalid_argument, "staircase_weight: delta_k must lie in (0,1]");
  CompensatedSum<double> s;
  double last = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    last = spec.masses[k] * -std::log(spec.delta[k]);
    s.add(last);
  }
  const double total = s.value();
  require(std::isfinite(total) && (total == 0.0 || last <= 0.01 * total), ErrorKind::divergent_staircase,
          "divergent staircase: sum c_k log(1/delta_k) does not settle within 1%");
  auto p = std::make_shared<Symbol>(phi);
  auto sp = std::make_shared<StaircaseSpec>(std::move(spec));
  Weight w;
  w.kind = "staircase";
  w.name = "staircase";
  w.provenance = "staircase weight prod_k delta_k on F_k";
  w.jumps = sp->level_h;
  w.log_modulus_fn = [p, sp](double t) {
    const double gap = p->gap(t);
    double acc = 0.0;
    for (std::size_t k = 0; k < sp->delta.size(); ++k)
      if (gap <= sp->level_h[k]) acc += std::log(sp->delta[k]);
    return acc;
  };
  return w;
}

inline Weight staircase_weight(const Symbol& phi, const LevelSets& L, const std::vector<double>& delta) {
  StaircaseSpec sp;
  const int K = std::min<int>(delta.size(), L.kMax);
  sp.delta.assign(delta.begin(), delta.begin() + K);
  sp.masses.assign(L.masses.begin() + 1, L.masses.begin() + 1 + K);
  return staircase_weight(phi, std::move(sp));
}

// c_k from an atomic measure: mass of { 1 - |z| <= h }
inline double level_mass(const PullbackMeasure& mphi, double h) {
  CompensatedSum<double> s;
  for (const auto& a : mphi.atoms)
    if (a.depth <= h) s.add(a.mass);
  return s.value();
}

// w = (1 - lambda_theta)^a with a = (1 - 1/theta)/2
inline Weight lens_decompact_weight(double theta) {
  require(theta > 0.0 && theta < 1.0, ErrorKind::invalid_argument, "lens_decompact_weight: theta must lie in (0,1)");
  const double a = 0.5 * (1.0 - 1.0 / theta);
  Weight w;
  w.kind = "lensdecomp";
  w.name = "lensdecomp:" + detail::fmt_param(theta);
  w.provenance = "lens decompactifying weight (1 - lambda_theta)^a";
  // 1 - lambda = 2B/(A+B) with A = (1+xi)^theta, B = (1-xi)^theta
  auto one_minus = [theta](double t) {
    t = wrap_angle(t);
    const double c = std::cos(t / 2), sn = std::sin(t / 2);
    const double sg = t > 0 ? 1.0 : -1.0;
    const cplx A = std::polar(std::pow(2 * std::max(c, 0.0), theta), theta * t / 2);
    const cplx B = std::polar(std::pow(2 * std::abs(sn), theta), theta * (t / 2 - sg * pi / 2));
    return 2.0 * B / (A + B);
  };
  w.log_modulus_fn = [one_minus, a](double t) { return a * std::log(std::abs(one_minus(t))); };
  w.closed_boundary = [one_minus, a](double t) { return std::pow(one_minus(t), a); };
  auto lam = lens(theta);
  w.closed_eval = [lam, a](cplx z) { return std::pow(1.0 - lam(z), a); };
  return w;
}

struct ChosenBox {
  int k = 0;
  long j = 0;
  cplx center;
  double mphiMass = 0.0;
};

struct BoxDecompactResult {
  Weight weight;
  std::vector<ChosenBox> boxes;
  std::vector<double> u;   // |w*|^2 at the grid points
  double excess = 0.0;     // quadrature of u - 1
};

// u = 1 + sum_n 2^{-k_n} / m_phi(box_n) on phi*^{-1}(box_n), one maximal box per occupied corona
inline BoxDecompactResult box_decompact_weight(const PullbackMeasure& mphi, const GridPtr& grid,
                                               const SymbolTrace& phi, double sup_lattice, int kMax = 40) {
  require(sup_lattice > 1.0 - 1e-3, ErrorKind::norm_below_one,
          "norm below one: sup |phi| < 1 - 1e-3, such symbols are never decompactifiable");
  require(static_cast<int>(mphi.atoms.size()) == grid->size && phi.size() == grid->size,
          ErrorKind::invalid_argument, "box_decompact_weight: measure must be the grid pull-back");
  BoxDecompactResult r;
  std::vector<double> u(grid->size, 1.0);
  for (int k = 1; k <= kMax; ++k) {
    auto boxes = box_masses(mphi, k);
    long bestj = -1;
    double best = 0.0;
    for (const auto& [j, m] : boxes)
      if (m > best) best = m, bestj = j;
    if (bestj < 0) continue;
    ChosenBox b{k, bestj, std::polar(1.0, two_pi * std::ldexp(double(bestj), -k)), best};
    const double add = std::ldexp(1.0, -k) / best;
    const double h = std::ldexp(1.0, -k);
    for (std::size_t i = 0; i < mphi.atoms.size(); ++i) {
      const Atom& a = mphi.atoms[i];
      if (a.depth > 0.5 * h && a.depth <= h && box_index(a.turn, k) == bestj) u[i] += add;
    }
    r.boxes.push_back(b);
  }
  std::vector<double> excess(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) excess[i] = u[i] - 1.0;
  r.excess = quadrature_real(excess);
  r.u = u;
  r.weight.kind = "boxdecomp";
  r.weight.name = "boxdecomp";
  r.weight.provenance = "box-indicator decompactifying weight";
  r.weight.bound_grid = grid;
  r.weight.bound_log_modulus.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) r.weight.bound_log_modulus[i] = 0.5 * std::log(u[i]);
  return r;
}

// graded atomization of nu = phi*(|w*|^2 m) with cell edges at the weight's jump levels
inline PullbackMeasure graded_measure(const Symbol& phi, const Weight& w, const GradedOptions& opt = {}) {
  require(!w.grid_bound(), ErrorKind::invalid_argument,
          "graded_measure: weight " + w.name + " is bound to its grid, use the grid pull-back");
  std::vector<NearAngle> br;
  if (!w.jumps.empty()) br = level_breakpoints(phi, w.jumps);
  return graded_pullback(phi, w.log_density(), opt, br);
}

}  // namespace hardylab
