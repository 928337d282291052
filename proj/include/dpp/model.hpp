#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "dpp/error.hpp"
#include "dpp/special.hpp"

namespace dpp {

// Points and frequencies live in R^d with d <= 2; for d = 1 the second
// component is ignored.
using Vec = std::array<double, 2>;

inline double norm(const Vec& v, int dim) {
  return dim == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]);
}

enum class Family {
  Gaussian,
  WhittleMatern,
  Cauchy,
  Circular,
  PowerExponentialSpectral,
  GeneralizedGammaSpectral,
  JincLike,  // indicator spectral density: the most repulsive stationary DPP
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::WhittleMatern: return "whittlematern";
    case Family::Cauchy: return "cauchy";
    case Family::Circular: return "circular";
    case Family::PowerExponentialSpectral: return "powerexp";
    case Family::GeneralizedGammaSpectral: return "gengamma";
    case Family::JincLike: return "jinc";
  }
  return "unknown";
}

inline std::optional<Family> family_from_name(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::erase(s, '-');
  std::erase(s, '_');
  if (s == "gaussian" || s == "gauss") return Family::Gaussian;
  if (s == "whittlematern" || s == "matern" || s == "wm") return Family::WhittleMatern;
  if (s == "cauchy") return Family::Cauchy;
  if (s == "circular") return Family::Circular;
  if (s == "powerexp" || s == "powerexponential" || s == "powerexponentialspectral")
    return Family::PowerExponentialSpectral;
  if (s == "gengamma" || s == "generalizedgamma" || s == "generalizedgammaspectral")
    return Family::GeneralizedGammaSpectral;
  if (s == "jinc" || s == "jinclike" || s == "sinc") return Family::JincLike;
  return std::nullopt;
}

inline bool uses_alpha(Family f) { return f != Family::Circular && f != Family::JincLike; }
inline bool uses_nu(Family f) {
  return f == Family::WhittleMatern || f == Family::Cauchy ||
         f == Family::PowerExponentialSpectral || f == Family::GeneralizedGammaSpectral;
}
inline bool uses_delta(Family f) { return f == Family::Circular; }
inline bool uses_gamma(Family f) { return f == Family::GeneralizedGammaSpectral; }

// C0 in closed form (PowerExponential only at nu = 2, where it is Gaussian).
inline bool has_closed_form_kernel(Family f, double nu = 0.0) {
  if (f == Family::GeneralizedGammaSpectral) return false;
  if (f == Family::PowerExponentialSpectral) return nu == 2.0;
  return true;
}

// Fields a family does not use stay empty; validate() rejects them if set.
struct KernelModel {
  Family family = Family::Gaussian;
  double rho = 0.0;
  std::optional<double> alpha;
  std::optional<double> nu;
  std::optional<double> delta;
  std::optional<double> gamma;  // extra shape of the generalized gamma spectral family
  int dim = 2;

  double a() const { return alpha.value_or(std::numeric_limits<double>::quiet_NaN()); }
  double n() const { return nu.value_or(std::numeric_limits<double>::quiet_NaN()); }
  double del() const { return delta.value_or(std::numeric_limits<double>::quiet_NaN()); }
  double g() const { return gamma.value_or(std::numeric_limits<double>::quiet_NaN()); }

  KernelModel with_rho(double r) const { KernelModel m = *this; m.rho = r; return m; }
  KernelModel with_alpha(double v) const { KernelModel m = *this; m.alpha = v; return m; }
  KernelModel with_nu(double v) const { KernelModel m = *this; m.nu = v; return m; }

  static KernelModel gaussian(double rho, double alpha, int dim = 2) {
    return {Family::Gaussian, rho, alpha, {}, {}, {}, dim};
  }
  static KernelModel whittle_matern(double rho, double alpha, double nu, int dim = 2) {
    return {Family::WhittleMatern, rho, alpha, nu, {}, {}, dim};
  }
  static KernelModel cauchy(double rho, double alpha, double nu, int dim = 2) {
    return {Family::Cauchy, rho, alpha, nu, {}, {}, dim};
  }
  static KernelModel circular(double rho, double delta) {
    return {Family::Circular, rho, {}, {}, delta, {}, 2};
  }
  static KernelModel power_exponential(double rho, double alpha, double nu, int dim = 2) {
    return {Family::PowerExponentialSpectral, rho, alpha, nu, {}, {}, dim};
  }
  static KernelModel generalized_gamma(double rho, double alpha, double nu, double gamma,
                                       int dim = 2) {
    return {Family::GeneralizedGammaSpectral, rho, alpha, nu, {}, gamma, dim};
  }
  static KernelModel jinc_like(double rho, int dim = 2) {
    return {Family::JincLike, rho, {}, {}, {}, {}, dim};
  }
};

// Text form that parses back to the same model; numbers use the shortest
// round-trip representation.
inline std::string describe(const KernelModel& m) {
  auto num = [](double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  std::string s = std::string("family=") + family_name(m.family) + " rho=" + num(m.rho);
  if (m.alpha) s += " alpha=" + num(*m.alpha);
  if (m.nu) s += " nu=" + num(*m.nu);
  if (m.delta) s += " delta=" + num(*m.delta);
  if (m.gamma) s += " gamma=" + num(*m.gamma);
  return s + " dim=" + std::to_string(m.dim);
}

namespace detail {

inline constexpr double pi = std::numbers::pi;

// log of the volume of the unit ball, d pi^{d/2} / Gamma(d/2+1) divided by d
inline double log_unit_ball(int d) { return 0.5 * d * std::log(pi) - std::lgamma(0.5 * d + 1.0); }

// rho_max at alpha = 1; every family with a scale has rho_max proportional to alpha^{-d}.
inline double unit_rho_max(Family f, double nu, double gamma, int d) {
  switch (f) {
    case Family::Gaussian:
      return std::pow(std::sqrt(pi), -d);
    case Family::WhittleMatern:
      return std::exp(std::lgamma(nu) - std::lgamma(nu + 0.5 * d) - d * std::log(2.0 * std::sqrt(pi)));
    case Family::Cauchy:
      return std::exp(std::lgamma(nu + 0.5 * d) - std::lgamma(nu) - 0.5 * d * std::log(pi));
    case Family::PowerExponentialSpectral:
      return std::exp(std::log(static_cast<double>(d)) + log_unit_ball(d) + std::lgamma(d / nu) -
                      std::log(nu));
    case Family::GeneralizedGammaSpectral: {
      if (gamma * nu < 1.0) return 0.0;
      const double s = gamma - 1.0 / nu;
      const double spow = s > 0.0 ? s * std::log(s) : 0.0;
      return std::exp(std::log(static_cast<double>(d)) + log_unit_ball(d) +
                      std::lgamma(gamma + (d - 1.0) / nu) + s - std::log(nu) - spow);
    }
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

inline double rho_max(const KernelModel& m) {
  switch (m.family) {
    case Family::Circular:
      return 4.0 / (detail::pi * m.del() * m.del());
    case Family::JincLike:
      return std::numeric_limits<double>::infinity();
    default:
      return detail::unit_rho_max(m.family, m.n(), m.g(), m.dim) * std::pow(m.a(), -m.dim);
  }
}

inline double alpha_max(Family f, double rho, double nu, int dim = 2, double gamma = 0.0) {
  if (!(rho > 0.0)) fail(ErrorKind::Domain, "alpha_max requires rho > 0");
  if (f == Family::Circular || f == Family::JincLike)
    fail(ErrorKind::UnsupportedFamily, std::string("alpha_max undefined for ") + family_name(f));
  if (f == Family::GeneralizedGammaSpectral && gamma * nu < 1.0) return 0.0;
  return std::pow(detail::unit_rho_max(f, nu, gamma, dim) / rho, 1.0 / dim);
}

inline double alpha_max(const KernelModel& m) {
  return alpha_max(m.family, m.rho, m.n(), m.dim, m.gamma.value_or(0.0));
}

// Largest finite range of the circular kernel at intensity rho.
inline double delta_max(double rho) { return std::sqrt(4.0 / (detail::pi * rho)); }

struct Validation {
  bool ok = true;
  std::string violated;  // name of the bound or field
  double lower = 0.0;    // admissible interval for that quantity
  double upper = 0.0;
  std::string message;
  explicit operator bool() const { return ok; }
};

inline Validation validate(const KernelModel& m) {
  const double inf = std::numeric_limits<double>::infinity();
  auto bad = [](std::string what, double lo, double hi, std::string msg) {
    return Validation{false, std::move(what), lo, hi, std::move(msg)};
  };
  if (m.dim != 1 && m.dim != 2) return bad("dim", 1, 2, "dimension must be 1 or 2");
  if (m.family == Family::Circular && m.dim != 2)
    return bad("dim", 2, 2, "circular family is defined for d = 2 only");
  if (!(m.rho >= 0.0) || !std::isfinite(m.rho)) return bad("rho", 0, inf, "rho must be finite and >= 0");
  auto check_field = [&](const std::optional<double>& v, bool used, const char* name) -> Validation {
    if (!used && v) return bad(name, 0, 0, std::string(name) + " is not a parameter of " + family_name(m.family));
    if (used && !v) return bad(name, 0, inf, std::string(name) + " is required by " + family_name(m.family));
    if (used && !(*v > 0.0 && std::isfinite(*v))) return bad(name, 0, inf, std::string(name) + " must be > 0");
    return {};
  };
  for (auto r : {check_field(m.alpha, uses_alpha(m.family), "alpha"),
                 check_field(m.nu, uses_nu(m.family), "nu"),
                 check_field(m.delta, uses_delta(m.family), "delta"),
                 check_field(m.gamma, uses_gamma(m.family), "gamma")})
    if (!r.ok) return r;
  const double rmax = rho_max(m);
  if (m.rho > rmax * (1.0 + 1e-12)) {
    std::ostringstream os;
    os.precision(10);
    os << "rho = " << m.rho << " exceeds rho_max = " << rmax << " (spectral density above 1)";
    return bad("rho_max", 0.0, rmax, os.str());
  }
  return {};
}

// Likelihood work needs phi < 1 everywhere.
inline bool strictly_valid(const KernelModel& m) { return validate(m).ok && m.rho < rho_max(m); }

inline void require_valid(const KernelModel& m) {
  auto v = validate(m);
  if (!v.ok) fail(ErrorKind::InvalidModel, v.message);
}

// Spectral density as a function of the frequency radius s = |x|.
inline double spectral_density_radial(const KernelModel& m, double s) {
  using detail::pi;
  const int d = m.dim;
  if (m.rho == 0.0) return 0.0;
  switch (m.family) {
    case Family::Gaussian: {
      const double a = m.a();
      return m.rho * std::pow(std::sqrt(pi) * a, d) * std::exp(-std::pow(pi * a * s, 2));
    }
    case Family::WhittleMatern: {
      const double a = m.a(), nu = m.n();
      const double z = 2.0 * pi * a * s;
      return m.rho * std::exp(std::lgamma(nu + 0.5 * d) - std::lgamma(nu) +
                              d * std::log(2.0 * std::sqrt(pi) * a) -
                              (nu + 0.5 * d) * std::log1p(z * z));
    }
    case Family::Cauchy: {
      const double a = m.a(), nu = m.n();
      const double z = 2.0 * pi * a * s;
      return m.rho * std::exp(d * std::log(std::sqrt(pi) * a) + (1.0 - nu) * std::numbers::ln2 -
                              std::lgamma(nu + 0.5 * d) + log_xnu_bessel_k(nu, z));
    }
    case Family::Circular: {
      const double delta = m.del();
      if (s == 0.0) return m.rho * pi * delta * delta / 4.0;
      const double j = bessel_j1(pi * delta * s) / s;
      return m.rho / pi * j * j;
    }
    case Family::PowerExponentialSpectral: {
      const double a = m.a(), nu = m.n();
      const double c = std::exp(std::lgamma(0.5 * d + 1.0) + std::log(nu) + d * std::log(a) -
                                std::log(static_cast<double>(d)) - 0.5 * d * std::log(pi) -
                                std::lgamma(d / nu));
      return m.rho * c * std::exp(-std::pow(a * s, nu));
    }
    case Family::GeneralizedGammaSpectral: {
      const double a = m.a(), nu = m.n(), g = m.g();
      const double c = std::exp(std::lgamma(0.5 * d + 1.0) + std::log(nu) + d * std::log(a) -
                                std::log(static_cast<double>(d)) - 0.5 * d * std::log(pi) -
                                std::lgamma(g + (d - 1.0) / nu));
      const double t = a * s;
      return m.rho * c * std::pow(t, g * nu - 1.0) * std::exp(-std::pow(t, nu));
    }
    case Family::JincLike: {
      // indicator of the ball of volume rho
      const double radius = d == 1 ? 0.5 * m.rho : std::sqrt(m.rho / pi);
      return s <= radius ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

inline double spectral_density(const KernelModel& m, const Vec& x) {
  return spectral_density_radial(m, norm(x, m.dim));
}

// Frequency radius beyond which a radially nonincreasing phi stays below
// tol * phi(0); infinity when phi is not monotone.
inline double spectral_cutoff(const KernelModel& m, double tol) {
  const double inf = std::numeric_limits<double>::infinity();
  if (m.rho == 0.0) return 0.0;
  if (m.family == Family::Circular || m.family == Family::GeneralizedGammaSpectral) return inf;
  if (m.family == Family::JincLike) return m.dim == 1 ? 0.5 * m.rho : std::sqrt(m.rho / detail::pi);
  const double f0 = spectral_density_radial(m, 0.0);
  double hi = 1.0 / m.a();
  while (spectral_density_radial(m, hi) > tol * f0) {
    hi *= 2.0;
    if (hi > 1e12 / m.a()) return inf;
  }
  double lo = 0.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (spectral_density_radial(m, mid) > tol * f0 ? lo : hi) = mid;
  }
  return hi;
}

// C0 as a function of r = |u|.
inline double kernel_value_radial(const KernelModel& m, double r) {
  using detail::pi;
  const int d = m.dim;
  if (m.rho == 0.0) return 0.0;
  if (r == 0.0) return m.rho;
  switch (m.family) {
    case Family::Gaussian:
      return m.rho * std::exp(-std::pow(r / m.a(), 2));
    case Family::WhittleMatern: {
      const double nu = m.n();
      return m.rho * std::exp((1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) +
                              log_xnu_bessel_k(nu, r / m.a()));
    }
    case Family::Cauchy: {
      const double t = r / m.a();
      return m.rho * std::pow(1.0 + t * t, -(m.n() + 0.5 * d));
    }
    case Family::Circular: {
      const double t = r / m.del();
      if (t >= 1.0) return 0.0;
      return m.rho * (2.0 / pi) * (std::acos(t) - t * std::sqrt(1.0 - t * t));
    }
    case Family::PowerExponentialSpectral:
      if (m.n() == 2.0) return m.rho * std::exp(-std::pow(pi * r / m.a(), 2));
      break;
    case Family::GeneralizedGammaSpectral:
      break;
    case Family::JincLike:
      if (d == 1) return std::sin(pi * m.rho * r) / (pi * r);
      return std::sqrt(m.rho / pi) * bessel_j1(2.0 * std::sqrt(pi * m.rho) * r) / r;
  }
  fail(ErrorKind::UnsupportedClosedForm,
       std::string("no closed-form kernel for ") + family_name(m.family) + "; use the spectral lattice");
}

inline double kernel_value(const KernelModel& m, const Vec& u) { return kernel_value_radial(m, norm(u, m.dim)); }

// Pair correlation g0(r) = 1 - (C0(r)/rho)^2.
inline double pcf(const KernelModel& m, double r) {
  if (!(r >= 0.0)) fail(ErrorKind::Domain, "pcf requires r >= 0");
  if (!has_closed_form_kernel(m.family, m.nu.value_or(0.0)))
    fail(ErrorKind::UnsupportedClosedForm, std::string("no closed-form pcf for ") + family_name(m.family));
  if (r == 0.0) return 0.0;
  switch (m.family) {
    case Family::Gaussian:
      return -std::expm1(-2.0 * std::pow(r / m.a(), 2));
    case Family::Cauchy: {
      const double t = r / m.a();
      return 1.0 - std::pow(1.0 + t * t, -(2.0 * m.n() + m.dim));
    }
    default: {
      if (m.rho == 0.0) fail(ErrorKind::ZeroIntensity, "pcf of a kernel with rho = 0");
      const double R = kernel_value_radial(m, r) / m.rho;
      return 1.0 - R * R;
    }
  }
}

// g0 with rho factored out; works for rho = 0 as the shape limit.
inline double pcf_shape(const KernelModel& m, double r) {
  return pcf(m.rho > 0.0 ? m : m.with_rho(1.0), r);
}

// K(r) = |ball_r| - int_{ball_r} R0^2, the second term by quadrature where no
// closed form is available.
inline double K_function(const KernelModel& m, double r) {
  using detail::pi;
  if (!(r >= 0.0)) fail(ErrorKind::Domain, "K_function requires r >= 0");
  if (r == 0.0) return 0.0;
  if (m.family == Family::Gaussian) {
    const double a = m.a();
    if (m.dim == 2) return pi * r * r + 0.5 * pi * a * a * std::expm1(-2.0 * r * r / (a * a));
    return 2.0 * r - a * std::sqrt(pi / 2.0) * std::erf(std::sqrt(2.0) * r / a);
  }
  if (m.family == Family::Cauchy && m.dim == 2) {
    const double a = m.a(), e = 2.0 * m.n() + 1.0;
    return pi * r * r - pi * a * a / e * (1.0 - std::pow(a * a / (a * a + r * r), e));
  }
  if (!has_closed_form_kernel(m.family, m.nu.value_or(0.0)))
    fail(ErrorKind::UnsupportedClosedForm, std::string("no closed-form K for ") + family_name(m.family));
  const KernelModel mm = m.rho > 0.0 ? m : m.with_rho(1.0);
  auto r2 = [&](double t) {
    const double R = kernel_value_radial(mm, t) / mm.rho;
    return R * R;
  };
  double upper = r;
  if (m.family == Family::Circular) upper = std::min(r, m.del());
  double integral;
  if (m.dim == 2) {
    integral = 2.0 * pi * integrate([&](double t) { return t * r2(t); }, 0.0, upper, 1e-11);
    return pi * r * r - integral;
  }
  integral = 2.0 * integrate(r2, 0.0, upper, 1e-11);
  return 2.0 * r - integral;
}

inline double L_function(const KernelModel& m, double r) {
  const double k = K_function(m, r);
  return m.dim == 2 ? std::sqrt(std::max(k, 0.0) / detail::pi) : 0.5 * k;
}

// Distance where g0 reaches this value.
inline constexpr double kRangeOfCorrelationLevel = 0.99;

inline double range_of_correlation(const KernelModel& m) {
  const double a = m.a();
  switch (m.family) {
    case Family::Gaussian:
      return a * std::sqrt(-0.5 * std::log(1.0 - kRangeOfCorrelationLevel));
    case Family::WhittleMatern:
      return a * std::sqrt(8.0 * m.n());
    case Family::Cauchy:
      return a * std::sqrt(std::pow(1.0 - kRangeOfCorrelationLevel, -1.0 / (2.0 * m.n() + m.dim)) - 1.0);
    default:
      fail(ErrorKind::UnsupportedFamily,
           std::string("range of correlation is defined for gaussian, whittlematern, cauchy; got ") +
               family_name(m.family));
  }
}

// mu = (1/rho) int phi^2, by radial quadrature of phi^2.
inline double repulsiveness_mu(const KernelModel& m) {
  using detail::pi;
  if (m.rho == 0.0) return 0.0;
  const int d = m.dim;
  auto radial = [&](double s) {
    const double f = spectral_density_radial(m, s);
    return (d == 2 ? 2.0 * pi * s : 2.0) * f * f;
  };
  if (m.family == Family::JincLike) {
    const double R = spectral_cutoff(m, 0.0);
    return integrate(radial, 0.0, R, 1e-10) / m.rho;
  }
  if (m.family == Family::Circular) {
    // Parseval on the kernel side: the kernel has compact support
    auto kr = [&](double t) {
      const double c = kernel_value_radial(m, t);
      return 2.0 * pi * t * c * c;
    };
    return integrate(kr, 0.0, m.del(), 1e-10) / m.rho;
  }
  const double scale = 1.0 / m.a();
  double total = 0.0;
  double lo = 0.0;
  for (double hi : {scale, 4.0 * scale, 16.0 * scale}) {
    total += integrate(radial, lo, hi, 1e-10);
    lo = hi;
  }
  total += integrate(radial, lo, std::numeric_limits<double>::infinity(), 1e-10);
  return total / m.rho;
}

// First order reduced Palm kernel det[C](u,x; v,x) / C(x,x).
inline double palm_kernel(const KernelModel& m, const Vec& x, const Vec& u, const Vec& v) {
  if (m.rho == 0.0) fail(ErrorKind::ZeroIntensity, "palm kernel needs C(x,x) > 0");
  auto diff = [](const Vec& p, const Vec& q) { return Vec{p[0] - q[0], p[1] - q[1]}; };
  const double cuv = kernel_value(m, diff(u, v));
  const double cux = kernel_value(m, diff(u, x));
  const double cxv = kernel_value(m, diff(x, v));
  return cuv - cux * cxv / m.rho;
}

}  // namespace dpp
