#pragma once

#include <Eigen/Dense>

#include "weights.hpp"

namespace hardylab {

struct OperatorMatrix {
  Eigen::MatrixXcd entries;  // (M+1) x (Ncols+1), A(m, n) = coefficient m of w* (phi*)^n
  int M = 0, Ncols = 0, N = 0;
};

inline OperatorMatrix operator_matrix(const BoundarySamples& w, const BoundarySamples& phi, int M, int Ncols) {
  require_same_grid(w, phi);
  const int N = w.size();
  require(M >= 0 && Ncols >= 0 && 4 * M < N && 4 * Ncols < N, ErrorKind::resolution,
          "operator_matrix: cuts must satisfy M, Ncols < N/4");
  OperatorMatrix A;
  A.M = M, A.Ncols = Ncols, A.N = N;
  A.entries.resize(M + 1, Ncols + 1);
  std::vector<cplx> run = w.values;
  for (int n = 0; n <= Ncols; ++n) {
    auto c = fourier_coefficients(run);
    for (int m = 0; m <= M; ++m) A.entries(m, n) = c[m];
    for (int j = 0; j < N; ++j) run[j] *= phi.values[j];
  }
  return A;
}

struct SingularSpectrum {
  std::vector<double> values;
  int M = 0, Ncols = 0, N = 0;  // truncation metadata (monomial route)
  std::string method = "monomial";
  double noiseFloor = 0.0;      // values below this are not resolved
  long atoms = 0, rank = 0;     // kernel route metadata
};

inline SingularSpectrum singular_values(const Eigen::MatrixXcd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
  SingularSpectrum s;
  const auto& sv = svd.singularValues();
  s.values.assign(sv.data(), sv.data() + sv.size());
  const double eps = std::numeric_limits<double>::epsilon();
  s.noiseFloor = s.values.empty() ? 0.0 : eps * std::max(A.rows(), A.cols()) * s.values.front();
  return s;
}

inline SingularSpectrum singular_values(const OperatorMatrix& A) {
  auto s = singular_values(A.entries);
  s.M = A.M, s.Ncols = A.Ncols, s.N = A.N;
  return s;
}

// ---------------------------------------------------------------------------------------
// approximation numbers through the embedding H^2 -> L^2(nu):
// a_n(M_w C_phi) = a_n(J_nu) = sqrt of the eigenvalues of S_pq = sqrt(mu_p mu_q) / (1 - z_p conj z_q)

struct KernelOptions {
  double rel_tol = 1e-8;  // stop when the residual trace falls below (rel_tol * s_1)^2
  int max_rank = 3000;    // or when it reaches the rounding level of the initial trace
};

inline SingularSpectrum embedding_spectrum(const PullbackMeasure& nu, const KernelOptions& opt = {}) {
  std::vector<double> ahi, alo, depth, sq, diag;
  for (const auto& a : nu.atoms) {
    if (!(a.mass > 0)) continue;
    require(a.depth > 0.0, ErrorKind::resolution,
            "embedding_spectrum: boundary atom with positive mass, embedding is unbounded");
    ahi.push_back(a.arg_hi);
    alo.push_back(a.arg_lo);
    depth.push_back(a.depth);
    sq.push_back(std::sqrt(a.mass));
    diag.push_back(a.mass / (a.depth * (2.0 - a.depth)));
  }
  const long Q = static_cast<long>(sq.size());
  SingularSpectrum out;
  out.method = "kernel";
  out.atoms = Q;
  if (Q == 0) return out;

  // 1 - z_p conj z_q = -2i sin(d/2) e^{id/2} + e^{id} (dp + dq - dp dq), d = alpha_p - alpha_q
  auto column = [&](long j, Eigen::VectorXcd& col) {
    for (long p = 0; p < Q; ++p) {
      const double d = (ahi[p] - ahi[j]) + (alo[p] - alo[j]);
      const double s2 = std::sin(d / 2), c2 = std::cos(d / 2);
      const double dd = depth[p] + depth[j] - depth[p] * depth[j];
      // -2i s2 (c2 + i s2) + (cos d + i sin d) dd
      const double re = 2 * s2 * s2 + (c2 * c2 - s2 * s2) * dd;
      const double im = -2 * s2 * c2 + 2 * s2 * c2 * dd;
      const double scale = sq[p] * sq[j] / (re * re + im * im);
      col(p) = cplx(re * scale, -im * scale);
    }
  };

  const double d0 = *std::max_element(diag.begin(), diag.end());
  const long rmax = std::min<long>(Q, opt.max_rank);
  // row-major so that each update is a contiguous dot product
  Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> L(Q, std::min<long>(64, rmax));
  Eigen::VectorXcd col(Q);
  long r = 0;
  double resid = compensated_total(diag);
  const double stop = std::max(opt.rel_tol * opt.rel_tol * d0, 64 * std::numeric_limits<double>::epsilon() * resid);
  while (r < rmax) {
    long j = 0;
    for (long p = 1; p < Q; ++p)
      if (diag[p] > diag[j]) j = p;
    if (resid <= stop || diag[j] <= 0) break;
    column(j, col);
    if (r > 0) {
      const auto lj = L.row(j).head(r);
      for (long p = 0; p < Q; ++p) col(p) -= lj.dot(L.row(p).head(r));
    }
    const double piv = std::sqrt(diag[j]);
    if (r == L.cols()) L.conservativeResize(Eigen::NoChange, std::min<long>(2 * L.cols(), rmax));
    L.col(r) = col / piv;
    CompensatedSum<double> rs;
    for (long p = 0; p < Q; ++p) {
      diag[p] = std::max(0.0, diag[p] - std::norm(L(p, r)));
      rs.add(diag[p]);
    }
    diag[j] = 0.0;
    resid = rs.value();
    ++r;
  }
  out.rank = r;
  // singular values of L from its r x r Gram matrix; the squaring costs sqrt(eps) s_1,
  // which the noise floor below already carries
  Eigen::MatrixXcd G(r, r);
  G.noalias() = L.leftCols(r).adjoint() * L.leftCols(r);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  out.values.resize(r);
  for (long i = 0; i < r; ++i) out.values[i] = std::sqrt(std::max(ev[r - 1 - i], 0.0));
  const double eps = std::numeric_limits<double>::epsilon();
  const double s1 = out.values.empty() ? 0.0 : out.values.front();
  out.noiseFloor = std::max(std::sqrt(std::max(resid, 0.0)), std::sqrt(eps * std::max<long>(r, 1)) * s1);
  return out;
}

// ---------------------------------------------------------------------------------------
// quadrature-based integrals with the refinement divergence rule

struct RefinedValue {
  double value = 0.0;
  bool divergent = false;
  std::vector<double> refinements;
};

inline constexpr double divergence_cap = 1e6;

// f(t) evaluated on grids N, 2N, 4N; divergent when a doubling moves the value by more than
// rel or the value exceeds the cap
inline RefinedValue refined_quadrature(const std::function<double(double)>& f, int N, double rel = 0.05,
                                       double cap = divergence_cap) {
  RefinedValue r;
  for (int level = 0; level < 3; ++level) {
    auto g = make_grid(N << level);
    CompensatedSum<double> s;
    bool finite = true;
    for (double t : g->angles) {
      const double v = f(t);
      if (!std::isfinite(v)) finite = false;
      s.add(v);
    }
    r.refinements.push_back(finite ? s.value() / g->size : std::numeric_limits<double>::infinity());
  }
  r.value = r.refinements.back();
  for (double q : r.refinements)
    if (!std::isfinite(q) || std::abs(q) > cap) r.divergent = true;
  for (int i = 0; i < 2 && !r.divergent; ++i) {
    const double a = r.refinements[i], b = r.refinements[i + 1];
    if (std::abs(b - a) > rel * std::max(std::abs(b), 1e-300)) r.divergent = true;
  }
  return r;
}

// 1 - |phi*|^2 = gap (2 - gap)
inline double one_minus_sq(double gap) { return gap * (2.0 - gap); }

// sample form: quadrature of |w*|^2 / (1 - |phi*|^2), divergent above the cap
inline RefinedValue hs_norm_boundary(const BoundarySamples& w, const SymbolTrace& phi) {
  require_same_grid(w, phi.values);
  std::vector<double> v(w.values.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::norm(w.values[j]) / one_minus_sq(phi.gap[j]);
  RefinedValue r;
  r.value = quadrature_real(v);
  r.refinements = {r.value};
  r.divergent = !std::isfinite(r.value) || r.value > divergence_cap;
  return r;
}

inline RefinedValue hs_norm_boundary(const Weight& w, const Symbol& phi, int N) {
  return refined_quadrature(
      [&](double t) {
        const double gap = phi.gap(t);
        return std::exp(2 * w.log_modulus_at(t)) / one_minus_sq(gap);
      },
      N);
}

struct MomentResult {
  RefinedValue moment;        // int |w*|^2 (1 - |phi*|^2)^{-alpha} dm
  RefinedValue logWeight;     // int |log |w*|^2| dm
  RefinedValue logGap;        // int |log (1 - |phi*|^2)| dm
  bool ruleApplies = false;  // moment and log-weight finite
  bool ruleConsistent = true;
};

inline MomentResult moment_integral(const Weight& w, const Symbol& phi, double alpha, int N) {
  require(alpha > 0, ErrorKind::invalid_argument, "moment_integral: alpha must be positive");
  MomentResult r;
  r.moment = refined_quadrature(
      [&](double t) {
        const double lw = 2 * w.log_modulus_at(t);
        // exp(log|w|^2 - alpha log(1 - |phi|^2)) avoids 0 * inf for vanishing weights; the log-gap
        // stays finite where the gap itself underflows
        const double lg = phi.log_gap(t) + std::log(2.0 - phi.gap(t));
        if (lw == -std::numeric_limits<double>::infinity()) return 0.0;
        return std::exp(lw - alpha * lg);
      },
      N);
  r.logWeight = refined_quadrature([&](double t) { return std::abs(2 * w.log_modulus_at(t)); }, N, 0.01,
                                   log_integral_threshold);
  r.logGap = refined_quadrature(
      [&](double t) {
        const double lg = phi.log_gap(t);
        // log(1 - |phi|^2) = log gap + log(2 - gap)
        return std::abs(lg + std::log(2.0 - phi.gap(t)));
      },
      N, 0.01, log_integral_threshold);
  r.ruleApplies = !r.moment.divergent && !r.logWeight.divergent;
  r.ruleConsistent = !r.ruleApplies || !r.logGap.divergent;
  return r;
}

enum class TailFlag { stable, growing };

struct SchattenEstimate {
  double value = 0.0;
  TailFlag tail = TailFlag::stable;
  double tailShare = 0.0;
};

inline SchattenEstimate schatten_estimate(const SingularSpectrum& S, double p) {
  require(p > 0, ErrorKind::invalid_argument, "schatten_estimate: p must be positive");
  SchattenEstimate e;
  const std::size_t L = S.values.size();
  CompensatedSum<double> all, last;
  for (std::size_t i = 0; i < L; ++i) {
    const double v = std::pow(S.values[i], p);
    all.add(v);
    if (4 * i >= 3 * L) last.add(v);
  }
  e.value = std::pow(all.value(), 1.0 / p);
  e.tailShare = all.value() > 0 ? last.value() / all.value() : 0.0;
  e.tail = e.tailShare > 0.1 ? TailFlag::growing : TailFlag::stable;
  return e;
}

struct ColumnNorms {
  std::vector<double> norms;   // ||w (phi)^n||_p, n = 0..nMax
  double sum = 0.0;
  double halfSum = 0.0;        // sum up to nMax/2
  double scaledMax = 0.0;      // max_{n>=1} n^2 ||T e_n||
  double scaledMedian = 0.0;
  int argmax = 0;
  bool sumStable = false;      // last half adds < 1%
};

// from log-moduli: ||T e_n||_p^p = quadrature exp(p log|w*| + p n log|phi*|)
inline ColumnNorms column_pnorms(const std::vector<double>& log_w, const std::vector<double>& log_phi, double p,
                                 int nMax) {
  require(p >= 1.0, ErrorKind::invalid_argument, "column_pnorms: p must be >= 1");
  require(log_w.size() == log_phi.size(), ErrorKind::invalid_argument, "column_pnorms: traces must share one grid");
  ColumnNorms c;
  for (int n = 0; n <= nMax; ++n) {
    CompensatedSum<double> s;
    for (std::size_t j = 0; j < log_w.size(); ++j) {
      if (n > 0 && log_phi[j] == -std::numeric_limits<double>::infinity()) continue;
      s.add(std::exp(p * log_w[j] + (n > 0 ? p * n * log_phi[j] : 0.0)));
    }
    c.norms.push_back(std::pow(s.value() / log_w.size(), 1.0 / p));
  }
  CompensatedSum<double> tot, half;
  std::vector<double> scaled;
  for (int n = 0; n <= nMax; ++n) {
    tot.add(c.norms[n]);
    if (n <= nMax / 2) half.add(c.norms[n]);
    if (n >= 1) {
      scaled.push_back(double(n) * n * c.norms[n]);
      if (scaled.back() > c.scaledMax) c.scaledMax = scaled.back(), c.argmax = n;
    }
  }
  c.sum = tot.value();
  c.halfSum = half.value();
  if (!scaled.empty()) {
    std::vector<double> srt = scaled;
    std::sort(srt.begin(), srt.end());
    const std::size_t m = srt.size();
    c.scaledMedian = m % 2 ? srt[m / 2] : 0.5 * (srt[m / 2 - 1] + srt[m / 2]);
  }
  c.sumStable = c.sum > 0 ? (c.sum - c.halfSum) <= 0.01 * c.sum : true;
  return c;
}

inline ColumnNorms column_pnorms(const BoundarySamples& w, const SymbolTrace& phi, double p, int nMax) {
  require_same_grid(w, phi.values);
  std::vector<double> lw(w.values.size()), lp(w.values.size());
  for (std::size_t j = 0; j < lw.size(); ++j) {
    lw[j] = std::log(std::abs(w.values[j]));
    lp[j] = std::log1p(-phi.gap[j]);
  }
  return column_pnorms(lw, lp, p, nMax);
}

struct DecayFit {
  double b = 0.0, gamma = 0.0, residual = 0.0;
  int lo = 0, hi = 0, count = 0;  // 1-based indices of the fitted window
  bool fittable = false;
};

// least squares of log log(1/s_n) = log b + gamma log n over n in (lo, hi], s_n in (floor, 1)
inline DecayFit decay_fit(const std::vector<double>& s, int lo = 8, double floor = 1e-12, int hi = -1) {
  DecayFit f;
  if (hi < 0) hi = static_cast<int>(s.size());
  std::vector<double> X, Y;
  for (int n = lo + 1; n <= hi && n <= static_cast<int>(s.size()); ++n) {
    const double v = s[n - 1];
    if (!(v > floor) || !(v < 1.0)) continue;
    X.push_back(std::log(double(n)));
    Y.push_back(std::log(-std::log(v)));
    if (f.count == 0) f.lo = n;
    f.hi = n;
    ++f.count;
  }
  if (f.count < 16) return f;
  const double m = double(f.count);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < f.count; ++i) sx += X[i], sy += Y[i], sxx += X[i] * X[i], sxy += X[i] * Y[i];
  f.gamma = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double lb = (sy - f.gamma * sx) / m;
  f.b = std::exp(lb);
  double rss = 0;
  for (int i = 0; i < f.count; ++i) rss += std::pow(Y[i] - lb - f.gamma * X[i], 2);
  f.residual = std::sqrt(rss / m);
  f.fittable = f.residual <= 0.5 && f.gamma > 0 && f.gamma <= 1.5;
  return f;
}

inline DecayFit decay_fit(const SingularSpectrum& S, int lo = 8) {
  return decay_fit(S.values, lo, std::max(1e-12, S.noiseFloor));
}

struct Cut {
  int M = 0, Ncols = 0, N = 0;
};

struct TruncationStudy {
  std::vector<Cut> cuts;
  std::vector<SingularSpectrum> spectra;
  std::vector<std::vector<double>> change;  // relative change of s_n between consecutive cuts
  std::vector<std::vector<int>> flagged;    // 1-based indices with change > 1%
};

inline TruncationStudy truncation_study(const Weight& w, const Symbol& phi, const std::vector<Cut>& cuts,
                                        int report = 32) {
  TruncationStudy T;
  T.cuts = cuts;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (i > 0)
      require(cuts[i].M >= cuts[i - 1].M && cuts[i].Ncols >= cuts[i - 1].Ncols && cuts[i].N >= cuts[i - 1].N,
              ErrorKind::invalid_argument, "truncation_study: cuts must increase");
    auto g = make_grid(cuts[i].N);
    auto A = operator_matrix(w.trace(g), phi.trace(g).values, cuts[i].M, cuts[i].Ncols);
    T.spectra.push_back(singular_values(A));
  }
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    const auto& a = T.spectra[i - 1].values;
    const auto& b = T.spectra[i].values;
    std::vector<double> ch;
    std::vector<int> fl;
    const std::size_t L = std::min({a.size(), b.size(), std::size_t(report)});
    for (std::size_t n = 0; n < L; ++n) {
      const double c = b[n] > 0 ? std::abs(b[n] - a[n]) / b[n] : (a[n] > 0 ? 1.0 : 0.0);
      ch.push_back(c);
      if (c > 0.01) fl.push_back(static_cast<int>(n + 1));
    }
    T.change.push_back(ch);
    T.flagged.push_back(fl);
  }
  return T;
}

}  // namespace hardylab
