#pragma once

#include "grid.hpp"

namespace hardylab {

// U(z) = int (xi + z)/(xi - z) u dm for real samples u.  Taylor coefficients are
// a_0 = hat u_0, a_k = 2 hat u_k (0 < k < N/2) and a_{N/2} = conj(hat u_{-N/2}); with that
// Nyquist choice Re U* reproduces u exactly on the grid.
class HerglotzTransform {
 public:
  HerglotzTransform() = default;
  HerglotzTransform(GridPtr grid, std::vector<double> u) : grid_(std::move(grid)), u_(std::move(u)) {
    require(grid_ && static_cast<int>(u_.size()) == grid_->size, ErrorKind::invalid_argument,
            "herglotz: sample count does not match grid");
    const int N = grid_->size;
    std::vector<cplx> uc(u_.begin(), u_.end());
    auto hat = fourier_coefficients(uc);
    coeffs_.assign(N / 2 + 1, cplx(0));
    coeffs_[0] = hat[0].real();
    for (int k = 1; k < N / 2; ++k) coeffs_[k] = 2.0 * hat[k];
    coeffs_[N / 2] = std::conj(hat[N / 2]);
    double total = 0;
    for (const auto& c : coeffs_) total += std::abs(c);
    degree_ = N / 2;
    while (degree_ > 0 && std::abs(coeffs_[degree_]) <= 2 * std::numeric_limits<double>::epsilon() * total)
      --degree_;
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<double>& samples() const { return u_; }
  const std::vector<cplx>& coefficients() const { return coeffs_; }

  // interior value by direct quadrature of the kernel
  cplx operator()(cplx z) const {
    require(std::abs(z) < 1.0, ErrorKind::invalid_argument, "herglotz: |z| must be < 1");
    CompensatedSum<cplx> s;
    const auto& xi = grid_->points;
    for (std::size_t j = 0; j < u_.size(); ++j) s.add((xi[j] + z) / (xi[j] - z) * u_[j]);
    return s.value() / static_cast<double>(u_.size());
  }

  // series value at radius r in (0, 1] and arbitrary angle t (Horner in r e^{it})
  cplx series(double t, double r = 1.0) const {
    // top coefficients at the FFT rounding level (2 eps of the l1 mass) are dropped
    const double zr = r * std::cos(t), zi = r * std::sin(t);
    double pr = coeffs_[degree_].real(), pi_ = coeffs_[degree_].imag();
    for (int k = degree_ - 1; k >= 0; --k) {
      const double nr = pr * zr - pi_ * zi + coeffs_[k].real();
      const double ni = pr * zi + pi_ * zr + coeffs_[k].imag();
      pr = nr, pi_ = ni;
    }
    return {pr, pi_};
  }

  // discrete conjugate function at an arbitrary angle
  double conjugate(double t) const { return series(t).imag(); }

  // U on the circle of radius r, at the grid angles
  std::vector<cplx> trace_at_radius(double r) const {
    const int N = grid_->size;
    std::vector<cplx> c(N, cplx(0));
    double rk = 1.0;
    for (int k = 0; k < N / 2; ++k) {
      c[k] = coeffs_[k] * rk;
      rk *= r;
    }
    // frequency N/2 lands in the slot of -N/2, where xi_j^{N/2} = -xi_j^{-N/2}
    c[N / 2] = -coeffs_[N / 2] * rk;
    return fourier_synthesis(c);
  }

  // boundary trace u + i H u with the real part taken from the samples
  std::vector<cplx> trace() const {
    auto v = trace_at_radius(1.0);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = cplx(u_[j], v[j].imag());
    return v;
  }

 private:
  GridPtr grid_;
  std::vector<double> u_;
  std::vector<cplx> coeffs_;
  int degree_ = 0;
};

inline HerglotzTransform herglotz_map(const BoundarySamples& u) {
  std::vector<double> v(u.values.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    require(u.values[j].real() >= 0.0 && u.values[j].imag() == 0.0, ErrorKind::invalid_argument,
            "herglotz_map: samples must be real and nonnegative");
    v[j] = u.values[j].real();
  }
  return HerglotzTransform(u.grid, std::move(v));
}

// w = exp(U) with U the Herglotz integral of log u
class OuterFunction {
 public:
  OuterFunction() = default;
  OuterFunction(GridPtr grid, std::vector<double> log_modulus)
      : h_(std::move(grid), std::move(log_modulus)) {}

  const GridPtr& grid() const { return h_.grid(); }
  const std::vector<double>& log_modulus() const { return h_.samples(); }
  const HerglotzTransform& exponent() const { return h_; }

  cplx operator()(cplx z) const { return std::exp(h_(z)); }
  cplx at_zero() const { return std::exp(cplx(h_.coefficients()[0])); }

  // boundary values exp(log u + i H log u) on the grid
  BoundarySamples trace() const {
    auto v = h_.trace();
    for (auto& x : v) x = std::exp(x);
    return {grid(), std::move(v)};
  }

  BoundarySamples trace_at_radius(double r) const {
    auto v = h_.trace_at_radius(r);
    for (auto& x : v) x = std::exp(x);
    return {grid(), std::move(v)};
  }

  BoundarySamples modulus() const {
    std::vector<cplx> v(log_modulus().size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::exp(log_modulus()[j]);
    return {grid(), std::move(v)};
  }

 private:
  HerglotzTransform h_;
};

inline OuterFunction outer_from_log_modulus(const GridPtr& grid, std::vector<double> log_u) {
  for (double x : log_u)
    require(std::isfinite(x), ErrorKind::divergent_log_integral, "not log-integrable: log u not finite");
  CompensatedSum<double> s;
  for (double x : log_u) s.add(std::abs(x));
  require(s.value() / log_u.size() <= log_integral_threshold, ErrorKind::divergent_log_integral,
          "not log-integrable: quadrature of |log u| exceeds threshold");
  return OuterFunction(grid, std::move(log_u));
}

inline OuterFunction outer_from_modulus(const BoundarySamples& u) {
  std::vector<double> lu(u.values.size());
  for (std::size_t j = 0; j < lu.size(); ++j) {
    const double x = u.values[j].real();
    require(x > 0.0, ErrorKind::divergent_log_integral, "not log-integrable: modulus sample <= 0");
    lu[j] = std::log(x);
  }
  return outer_from_log_modulus(u.grid, std::move(lu));
}

}  // namespace hardylab
