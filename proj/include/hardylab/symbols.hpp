#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "herglotz.hpp"

namespace hardylab {

// boundary value together with 1 - |value| computed without cancellation
struct BoundaryPoint {
  cplx value;
  double gap = 0.0;
  // argument as arg_hi + arg_lo when the caller needs it beyond double precision
  double arg_hi = std::numeric_limits<double>::quiet_NaN();
  double arg_lo = 0.0;
  double modulus() const { return 1.0 - gap; }
};

struct SymbolTrace {
  BoundarySamples values;
  BoundarySamples modulus;
  std::vector<double> gap;
  GridPtr grid() const { return values.grid; }
  int size() const { return values.size(); }
};

enum class SymbolKind { lens, half, beta_exp, extreme_not_exposed, hs_extremal, custom_outer, constant, dilation, power };

inline constexpr int reference_grid_size = 1 << 14;

class Symbol {
 public:
  SymbolKind kind = SymbolKind::constant;
  std::string name;
  std::vector<double> params;
  double sup_norm = 1.0;           // sup |phi| over the disk
  std::vector<double> contacts;    // angles where 1 - |phi*| -> 0

  cplx operator()(cplx z) const { return eval_(z); }
  BoundaryPoint boundary(double t) const { return boundary_(wrap_angle(t)); }
  double gap(double t) const { return gap_(wrap_angle(t)); }
  // boundary value at angle c + s for a small offset s, without rounding c + s first
  BoundaryPoint boundary_near(double c, double s) const {
    if (near_) return near_(c, s);
    return boundary(c + s);
  }
  // log |phi*(e^{it})|, finite whenever the gap is positive
  double log_modulus(double t) const { return log_modulus_(wrap_angle(t)); }
  // log (1 - |phi*(e^{it})|), may be -inf
  double log_gap(double t) const { return log_gap_(wrap_angle(t)); }

  SymbolTrace trace(const GridPtr& g) const {
    if (grid_trace_) return grid_trace_(g);
    std::vector<cplx> v(g->size), m(g->size);
    std::vector<double> gp(g->size);
    for (int j = 0; j < g->size; ++j) {
      auto b = boundary(g->angles[j]);
      v[j] = b.value;
      gp[j] = b.gap;
      m[j] = b.modulus();
    }
    return {{g, std::move(v)}, {g, std::move(m)}, std::move(gp)};
  }

  std::function<cplx(cplx)> eval_;
  std::function<BoundaryPoint(double)> boundary_;
  std::function<double(double)> gap_;
  std::function<double(double)> log_modulus_;
  std::function<double(double)> log_gap_;
  std::function<SymbolTrace(const GridPtr&)> grid_trace_;
  std::function<BoundaryPoint(double, double)> near_;
};

inline SymbolTrace boundary_trace(const Symbol& phi, const GridPtr& grid) { return phi.trace(grid); }

namespace detail {

inline void finish_closed(Symbol& s) {
  auto b = s.boundary_;
  s.gap_ = [b](double t) { return b(t).gap; };
  s.log_modulus_ = [b](double t) { return std::log1p(-b(t).gap); };
  s.log_gap_ = [b](double t) { return std::log(b(t).gap); };
}

// outer-type symbol exp(sign * H[f]) with f given at arbitrary angles and closed-form gap
inline void finish_outer(Symbol& s, std::function<double(double)> f, double sign,
                         std::function<double(double)> gap, std::function<double(double)> log_gap) {
  auto ref = std::make_shared<HerglotzTransform>([&] {
    auto g = make_grid(reference_grid_size);
    std::vector<double> v(g->size);
    for (int j = 0; j < g->size; ++j) v[j] = f(g->angles[j]);
    return HerglotzTransform(g, std::move(v));
  }());
  s.eval_ = [ref, sign](cplx z) { return std::exp(sign * (*ref)(z)); };
  s.gap_ = gap;
  s.log_gap_ = log_gap;
  s.log_modulus_ = [gap](double t) { return std::log1p(-gap(t)); };
  s.boundary_ = [ref, sign, gap](double t) {
    const double arg = sign * ref->conjugate(t);
    const double gp = gap(t);
    return BoundaryPoint{std::polar(1.0 - gp, arg), gp};
  };
  s.grid_trace_ = [f, sign, gap](const GridPtr& g) {
    std::vector<double> v(g->size);
    for (int j = 0; j < g->size; ++j) v[j] = f(g->angles[j]);
    HerglotzTransform h(g, v);
    auto tr = h.trace();
    std::vector<cplx> val(g->size), mod(g->size);
    std::vector<double> gp(g->size);
    for (int j = 0; j < g->size; ++j) {
      gp[j] = gap(g->angles[j]);
      mod[j] = 1.0 - gp[j];
      val[j] = std::polar(1.0 - gp[j], sign * tr[j].imag());
    }
    return SymbolTrace{{g, std::move(val)}, {g, std::move(mod)}, std::move(gp)};
  };
}

inline std::string fmt_param(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace detail

inline Symbol lens(double theta) {
  require(theta > 0.0 && theta < 1.0, ErrorKind::invalid_argument, "lens: theta must lie in (0,1)");
  Symbol s;
  s.kind = SymbolKind::lens;
  s.name = "lens:" + detail::fmt_param(theta);
  s.params = {theta};
  s.contacts = {0.0, pi};
  s.eval_ = [theta](cplx z) {
    const cplx a = std::pow(1.0 + z, theta), b = std::pow(1.0 - z, theta);
    return (a - b) / (a + b);
  };
  s.boundary_ = [theta](double t) {
    const double c = std::cos(t / 2), sn = std::sin(t / 2);
    if (sn == 0.0) return BoundaryPoint{1.0, 0.0};
    if (c <= 0.0) return BoundaryPoint{-1.0, 0.0};
    const double sg = t > 0 ? 1.0 : -1.0;
    const cplx a = std::polar(std::pow(2 * c, theta), theta * t / 2);
    const cplx b = std::polar(std::pow(2 * std::abs(sn), theta), theta * (t / 2 - sg * pi / 2));
    const cplx lam = (a - b) / (a + b);
    // 1 - |lam|^2 = 4 Re(a conj b) / |a + b|^2, and Re(a conj b) = (2|sin t|)^theta cos(theta pi/2)
    const double one_minus_sq =
        4.0 * std::pow(2 * std::abs(std::sin(t)), theta) * std::cos(theta * pi / 2) / std::norm(a + b);
    const double gap = one_minus_sq / (1.0 + std::abs(lam));
    return BoundaryPoint{lam, gap};
  };
  detail::finish_closed(s);
  // lambda_theta is odd: near -1 use lambda(-xi) = -lambda(xi) with the offset kept exact
  auto b = s.boundary_;
  s.near_ = [b](double c, double off) {
    if (std::abs(wrap_angle(c - pi)) < 1e-12) {
      BoundaryPoint p = b(off);
      p.value = -p.value;
      p.arg_hi = pi;
      p.arg_lo = std::arg(-p.value);
      return p;
    }
    return b(c + off);
  };
  return s;
}

inline Symbol half() {
  Symbol s;
  s.kind = SymbolKind::half;
  s.name = "half";
  s.contacts = {0.0};
  s.eval_ = [](cplx z) { return (1.0 + z) / 2.0; };
  s.boundary_ = [](double t) {
    const double q = std::sin(t / 4);
    return BoundaryPoint{(1.0 + std::polar(1.0, t)) / 2.0, 2 * q * q};
  };
  detail::finish_closed(s);
  return s;
}

// phi = exp(-U), U the Herglotz integral of u(t) = |sin(t/2)|^beta
inline Symbol beta_exp(double beta) {
  require(beta > 0.0 && beta <= 2.0, ErrorKind::invalid_argument, "beta_exp: beta must lie in (0,2]");
  Symbol s;
  s.kind = SymbolKind::beta_exp;
  s.name = "betaexp:" + detail::fmt_param(beta);
  s.params = {beta};
  s.contacts = {0.0};
  auto u = [beta](double t) { return std::pow(std::abs(std::sin(t / 2)), beta); };
  auto gap = [u](double t) { return -std::expm1(-u(t)); };
  auto log_gap = [u](double t) { return std::log(-std::expm1(-u(t))); };
  detail::finish_outer(s, u, -1.0, gap, log_gap);
  return s;
}

// outer symbol with |phi*| = 1 - e^{-1/|t|}
inline Symbol extreme_not_exposed() {
  Symbol s;
  s.kind = SymbolKind::extreme_not_exposed;
  s.name = "extreme";
  s.contacts = {0.0};
  auto gap = [](double t) { return std::exp(-1.0 / std::abs(t)); };
  auto logmod = [gap](double t) { return std::log1p(-gap(t)); };
  auto log_gap = [](double t) { return -1.0 / std::abs(t); };
  detail::finish_outer(s, logmod, 1.0, gap, log_gap);
  return s;
}

// outer symbol with |phi*| = 1 - exp(-e^{1/|t|})
inline Symbol hs_extremal() {
  Symbol s;
  s.kind = SymbolKind::hs_extremal;
  s.name = "hsx";
  s.contacts = {0.0};
  auto gap = [](double t) { return std::exp(-std::exp(1.0 / std::abs(t))); };
  auto logmod = [gap](double t) { return std::log1p(-gap(t)); };
  auto log_gap = [](double t) { return -std::exp(1.0 / std::abs(t)); };
  detail::finish_outer(s, logmod, 1.0, gap, log_gap);
  return s;
}

// outer symbol with a tabulated boundary modulus, periodic linear interpolation in angle
inline Symbol custom_outer(std::vector<double> angles, std::vector<double> modulus, std::string label = "custom") {
  require(angles.size() == modulus.size() && angles.size() >= 2, ErrorKind::invalid_argument,
          "custom_outer: need at least two (angle, modulus) pairs");
  std::vector<std::pair<double, double>> tab;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    require(modulus[i] > 0.0 && modulus[i] <= 1.0, ErrorKind::invalid_argument,
            "custom_outer: modulus values must lie in (0,1]");
    tab.emplace_back(turn_of(angles[i]), modulus[i]);
  }
  std::sort(tab.begin(), tab.end());
  auto data = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(tab));
  auto mod = [data](double t) {
    const auto& d = *data;
    const double a = turn_of(t);
    auto it = std::upper_bound(d.begin(), d.end(), std::make_pair(a, 2.0));
    const auto& hi = it == d.end() ? d.front() : *it;
    const auto& lo = it == d.begin() ? d.back() : *(it - 1);
    double span = hi.first - lo.first, off = a - lo.first;
    if (span <= 0) span += 1.0;
    if (off < 0) off += 1.0;
    const double w = span > 0 ? off / span : 0.0;
    return lo.second + w * (hi.second - lo.second);
  };
  Symbol s;
  s.kind = SymbolKind::custom_outer;
  s.name = "outer:" + label;
  double mx = 0;
  for (const auto& p : *data) mx = std::max(mx, p.second);
  s.sup_norm = mx;
  for (const auto& p : *data)
    if (p.second == 1.0) s.contacts.push_back(two_pi * p.first);
  auto gap = [mod](double t) { return 1.0 - mod(t); };
  auto logmod = [mod](double t) { return std::log(mod(t)); };
  auto log_gap = [mod](double t) { return std::log(1.0 - mod(t)); };
  detail::finish_outer(s, logmod, 1.0, gap, log_gap);
  return s;
}

inline Symbol custom_outer_from_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open symbol file " + path);
  std::vector<double> a, m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) continue;  // header or junk
    a.push_back(x);
    m.push_back(y);
  }
  return custom_outer(std::move(a), std::move(m), path);
}

inline Symbol constant_symbol(cplx c) {
  require(std::abs(c) < 1.0, ErrorKind::invalid_argument, "constant symbol must satisfy |c| < 1");
  Symbol s;
  s.kind = SymbolKind::constant;
  s.name = "const:" + detail::fmt_param(c.real());
  s.params = {c.real(), c.imag()};
  s.sup_norm = std::abs(c);
  s.eval_ = [c](cplx) { return c; };
  const double gp = 1.0 - std::abs(c);
  s.boundary_ = [c, gp](double) { return BoundaryPoint{c, gp}; };
  detail::finish_closed(s);
  return s;
}

// phi(z) = c z with 0 < c <= 1
inline Symbol dilation(double c) {
  require(c > 0.0 && c <= 1.0, ErrorKind::invalid_argument, "dilation factor must lie in (0,1]");
  Symbol s;
  s.kind = SymbolKind::dilation;
  s.name = "dilate:" + detail::fmt_param(c);
  s.params = {c};
  s.sup_norm = c;
  s.eval_ = [c](cplx z) { return c * z; };
  s.boundary_ = [c](double t) { return BoundaryPoint{std::polar(c, t), 1.0 - c}; };
  detail::finish_closed(s);
  return s;
}

inline Symbol power_symbol(int k) {
  require(k >= 1, ErrorKind::invalid_argument, "power symbol needs k >= 1");
  Symbol s;
  s.kind = SymbolKind::power;
  s.name = "power:" + std::to_string(k);
  s.params = {double(k)};
  s.eval_ = [k](cplx z) { return std::pow(z, k); };
  s.boundary_ = [k](double t) { return BoundaryPoint{std::polar(1.0, k * t), 0.0}; };
  detail::finish_closed(s);
  return s;
}

// deterministic 10 x 100 lattice of radius R
inline std::vector<cplx> disk_lattice(double R) {
  std::vector<cplx> z;
  z.reserve(1000);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 100; ++j) z.push_back(std::polar(R * (i + 1) / 10.0, two_pi * (j + 0.5) / 100.0));
  return z;
}

inline double self_map_sup(const Symbol& phi, double R = 0.999) {
  double m = 0;
  for (cplx z : disk_lattice(R)) m = std::max(m, std::abs(phi(z)));
  return m;
}

struct LevelSets {
  GridPtr grid;
  int kMax = 0;
  std::vector<double> masses;                      // c_k, k = 0..kMax
  std::vector<std::vector<unsigned char>> masks;   // F_k = { 1 - |phi*| <= 2^{-k} }
};

inline LevelSets level_sets(const SymbolTrace& tr, int kMax) {
  const int N = tr.size();
  require(kMax >= 0 && kMax <= ilog2(N) - 2, ErrorKind::resolution,
          "level_sets: kMax must be <= log2(N) - 2");
  LevelSets L;
  L.grid = tr.grid();
  L.kMax = kMax;
  for (int k = 0; k <= kMax; ++k) {
    const double h = std::ldexp(1.0, -k);
    std::vector<unsigned char> mask(N);
    long count = 0;
    for (int j = 0; j < N; ++j) {
      mask[j] = tr.gap[j] <= h;
      count += mask[j];
    }
    L.masses.push_back(double(count) / N);
    L.masks.push_back(std::move(mask));
  }
  return L;
}

inline LevelSets level_sets(const Symbol& phi, const GridPtr& grid, int kMax) {
  return level_sets(phi.trace(grid), kMax);
}

inline int default_kmax(int N) { return ilog2(N) - 2; }

inline Symbol parse_symbol(const std::string& spec) {
  auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto num = [&](const char* what) {
    require(!arg.empty(), ErrorKind::config, std::string("symbol ") + what + " needs a parameter");
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(arg, &pos);
    } catch (...) {
      pos = 0;
    }
    require(pos == arg.size(), ErrorKind::config, "bad numeric parameter in symbol spec '" + spec + "'");
    return v;
  };
  if (head == "lens") return lens(num("lens"));
  if (head == "half" && arg.empty()) return half();
  if (head == "betaexp") return beta_exp(num("betaexp"));
  if (head == "extreme" && arg.empty()) return extreme_not_exposed();
  if (head == "hsx" && arg.empty()) return hs_extremal();
  if (head == "outer") {
    require(!arg.empty(), ErrorKind::config, "outer: needs a file");
    return custom_outer_from_csv(arg);
  }
  if (head == "const") return constant_symbol(num("const"));
  if (head == "dilate") return dilation(num("dilate"));
  if (head == "power") return power_symbol(static_cast<int>(num("power")));
  throw LabError(ErrorKind::config, "unknown symbol spec '" + spec + "'");
}

}  // namespace hardylab
