#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardylab {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class ErrorKind {
  invalid_argument,
  resolution,
  divergent_log_integral,
  divergent_staircase,
  not_compactifiable,
  norm_below_one,
  config,
  io
};

class LabError : public std::runtime_error {
 public:
  LabError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw LabError(kind, what);
}

// Neumaier compensated sum; fixed order, so results are reproducible bit for bit.
template <class T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    if constexpr (std::is_same_v<T, double>) {
      if (std::abs(sum_) >= std::abs(x))
        comp_ += (sum_ - t) + x;
      else
        comp_ += (x - t) + sum_;
    } else {
      comp_ += part(sum_.real(), x.real(), t.real()) +
               T(0, 1) * part(sum_.imag(), x.imag(), t.imag());
    }
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  static double part(double s, double x, double t) {
    return std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
  }
  T sum_{};
  T comp_{};
};

inline double compensated_total(const std::vector<double>& v) {
  CompensatedSum<double> s;
  for (double x : v) s.add(x);
  return s.value();
}

inline bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

inline int ilog2(long n) {
  int k = 0;
  while ((1L << (k + 1)) <= n) ++k;
  return k;
}

// angle reduced to (-pi, pi]
inline double wrap_angle(double t) {
  double r = std::remainder(t, two_pi);
  if (r <= -pi) r += two_pi;
  return r;
}

// fraction of a turn in [0, 1)
inline double turn_of(double angle) {
  double a = angle / two_pi;
  a -= std::floor(a);
  if (a >= 1.0) a = 0.0;
  return a;
}

}  // namespace hardylab
