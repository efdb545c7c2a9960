#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "core.hpp"

namespace hardylab {

// Half-step offset grid t_j = 2 pi (j + 1/2) / N on the circle.
struct BoundaryGrid {
  int size = 0;
  std::vector<double> angles;
  std::vector<cplx> points;
};

using GridPtr = std::shared_ptr<const BoundaryGrid>;

inline GridPtr make_grid(int N) {
  require(N >= 8 && is_power_of_two(N), ErrorKind::invalid_argument,
          "grid size must be a power of two >= 8, got " + std::to_string(N));
  auto g = std::make_shared<BoundaryGrid>();
  g->size = N;
  g->angles.resize(N);
  g->points.resize(N);
  for (int j = 0; j < N; ++j) {
    g->angles[j] = two_pi * (j + 0.5) / N;
    g->points[j] = std::polar(1.0, g->angles[j]);
  }
  return g;
}

struct BoundarySamples {
  GridPtr grid;
  std::vector<cplx> values;

  BoundarySamples() = default;
  BoundarySamples(GridPtr g, std::vector<cplx> v) : grid(std::move(g)), values(std::move(v)) {
    require(grid && static_cast<int>(values.size()) == grid->size, ErrorKind::invalid_argument,
            "sample count does not match grid size");
  }
  int size() const { return grid->size; }
};

// samples of a function of the angle t
inline BoundarySamples sample(const GridPtr& g, const std::function<cplx(double)>& f) {
  std::vector<cplx> v(g->size);
  for (int j = 0; j < g->size; ++j) v[j] = f(g->angles[j]);
  return {g, std::move(v)};
}

inline BoundarySamples sample_real(const GridPtr& g, const std::function<double(double)>& f) {
  std::vector<cplx> v(g->size);
  for (int j = 0; j < g->size; ++j) v[j] = f(g->angles[j]);
  return {g, std::move(v)};
}

inline void require_same_grid(const BoundarySamples& a, const BoundarySamples& b) {
  require(a.grid && b.grid && a.grid->size == b.grid->size, ErrorKind::invalid_argument,
          "traces must share one grid");
}

inline cplx quadrature(const BoundarySamples& f) {
  CompensatedSum<cplx> s;
  for (const cplx& v : f.values) s.add(v);
  return s.value() / static_cast<double>(f.size());
}

inline double quadrature_real(const std::vector<double>& v) {
  return compensated_total(v) / static_cast<double>(v.size());
}

// Fourier coefficients hat f_k = (1/N) sum_j f_j xi_j^{-k}.  Slot m holds frequency m for
// m < N/2 and m - N otherwise; the offset grid contributes the phase e^{-i pi k / N}.
inline std::vector<cplx> fourier_coefficients(const std::vector<cplx>& f) {
  const int N = static_cast<int>(f.size());
  Eigen::FFT<double> fft;
  std::vector<cplx> F;
  fft.fwd(F, f);
  for (int m = 0; m < N; ++m) {
    const int k = m < N / 2 ? m : m - N;
    F[m] *= std::polar(1.0 / N, -pi * k / N);
  }
  return F;
}

inline std::vector<cplx> fourier_synthesis(const std::vector<cplx>& c) {
  const int N = static_cast<int>(c.size());
  std::vector<cplx> F(N);
  for (int m = 0; m < N; ++m) {
    const int k = m < N / 2 ? m : m - N;
    F[m] = c[m] * std::polar(1.0, pi * k / N);
  }
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> f;
  fft.inv(f, F);
  return f;
}

inline std::vector<cplx> taylor_coefficients(const BoundarySamples& f, int M) {
  require(M >= 0 && 2 * M < f.size(), ErrorKind::resolution,
          "taylor_coefficients: M must satisfy M < N/2 (aliasing guard)");
  auto c = fourier_coefficients(f.values);
  c.resize(M + 1);
  return c;
}

inline double hardy_norm(const BoundarySamples& f, double p = 2.0) {
  require(p >= 1.0, ErrorKind::invalid_argument, "hardy_norm: p must be >= 1");
  CompensatedSum<double> s;
  for (const cplx& v : f.values) s.add(std::pow(std::abs(v), p));
  return std::pow(s.value() / f.size(), 1.0 / p);
}

struct LogIntegral {
  double value = 0.0;
  bool divergent = false;
  std::vector<double> refinements;  // values at N, 2N, 4N for the function form
};

inline constexpr double log_integral_threshold = 1e3;

// sample form: u in (0, 1]
inline LogIntegral log_integral(const std::vector<double>& u) {
  LogIntegral r;
  CompensatedSum<double> s;
  for (double x : u) {
    if (!(x > std::numeric_limits<double>::min()) || !std::isfinite(x)) {
      r.divergent = true;
      r.value = -std::numeric_limits<double>::infinity();
      return r;
    }
    s.add(std::log(x));
  }
  r.value = s.value() / u.size();
  if (std::abs(r.value) > log_integral_threshold) r.divergent = true;
  return r;
}

inline LogIntegral log_integral(const BoundarySamples& u) {
  std::vector<double> v(u.values.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = u.values[j].real();
  return log_integral(v);
}

// function form: log u given directly as a function of angle, refined at N, 2N, 4N.
// Offset grids do not nest, so every level resamples the function.
inline LogIntegral log_integral(const std::function<double(double)>& log_u, int N,
                                double tol = 0.01) {
  LogIntegral r;
  for (int level = 0; level < 3; ++level) {
    auto g = make_grid(N << level);
    CompensatedSum<double> s;
    bool finite = true;
    for (double t : g->angles) {
      double v = log_u(t);
      if (!std::isfinite(v)) finite = false;
      s.add(v);
    }
    double q = finite ? s.value() / g->size : -std::numeric_limits<double>::infinity();
    r.refinements.push_back(q);
  }
  r.value = r.refinements.back();
  auto unstable = [&](double a, double b) {
    return std::abs(b - a) > tol * std::max(std::abs(b), 1e-300);
  };
  for (double q : r.refinements)
    if (!std::isfinite(q) || std::abs(q) > log_integral_threshold) r.divergent = true;
  if (!r.divergent)
    r.divergent = unstable(r.refinements[0], r.refinements[1]) ||
                  unstable(r.refinements[1], r.refinements[2]);
  return r;
}

}  // namespace hardylab
