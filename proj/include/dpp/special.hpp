#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dpp/error.hpp"

namespace dpp {

// Neumaier variant of compensated summation; lattice sums run over up to a
// few million terms of very different magnitude.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

namespace detail {

// Temme's gamma helpers: gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),
// gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2, for |mu| <= 1/2.
inline void temme_gammas(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
  gampl = 1.0 / std::tgamma(1.0 + mu);
  gammi = 1.0 / std::tgamma(1.0 - mu);
  gam2 = 0.5 * (gammi + gampl);
  if (std::abs(mu) < 1e-2) {
    // odd Taylor coefficients of 1/G(1+z)
    const double m2 = mu * mu;
    gam1 = -(0.5772156649015329 +
             m2 * (-0.0420026350340952 +
                   m2 * (-0.0421977345555443 +
                         m2 * (0.0072189432466630 +
                               m2 * (-0.0002152416741149 + m2 * -0.0000201348547807)))));
  } else {
    gam1 = (gammi - gampl) / (2.0 * mu);
  }
}

// log K_mu(x) and the ratio K_{mu+1}(x)/K_mu(x) for |mu| <= 1/2.
inline void bessel_k_base(double mu, double x, double& log_kmu, double& ratio) {
  constexpr double eps = 1e-16;
  constexpr int max_iter = 100000;
  const double mu2 = mu * mu;
  if (x < 2.0) {
    // Temme's series
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
    double gam1, gam2, gampl, gammi;
    temme_gammas(mu, gam1, gam2, gampl, gammi);
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= max_iter; ++i) {
      ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
      c *= d / i;
      p /= (i - mu);
      q /= (i + mu);
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * eps) break;
    }
    log_kmu = std::log(sum);
    ratio = sum1 * (2.0 / x) / sum;
  } else {
    // Steed's method on Temme's continued fraction
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1, c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= max_iter; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < eps) break;
    }
    h *= a1;
    log_kmu = 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x - std::log(s);
    ratio = (mu + x + 0.5 - h) / x;
  }
}

}  // namespace detail

// log K_nu(x); stays finite where K itself under- or overflows.
inline double log_bessel_k(double nu, double x) {
  if (!(x > 0.0)) fail(ErrorKind::Domain, "bessel_k requires x > 0");
  nu = std::abs(nu);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  double logk, ratio;
  detail::bessel_k_base(mu, x, logk, ratio);
  // upward recurrence carried on ratios r_i = K_{mu+i+1}/K_{mu+i}
  for (int i = 1; i <= nl; ++i) {
    logk += std::log(ratio);
    ratio = 2.0 * (mu + i) / x + 1.0 / ratio;
  }
  return logk;
}

inline double bessel_k(double nu, double x) { return std::exp(log_bessel_k(nu, x)); }

// log of x^nu K_nu(x); the x -> 0 limit is log(2^{nu-1} Gamma(nu)).
inline double log_xnu_bessel_k(double nu, double x) {
  if (x == 0.0) {
    if (nu <= 0.0) return std::numeric_limits<double>::infinity();
    return (nu - 1.0) * std::numbers::ln2 + std::lgamma(nu);
  }
  return nu * std::log(x) + log_bessel_k(nu, x);
}

inline double bessel_j1(double x) { return std::cyl_bessel_j(1.0, x); }
inline double bessel_j0(double x) { return std::cyl_bessel_j(0.0, x); }

// Adaptive Gauss-Kronrod (15 point) on [a, b]; b may be +infinity.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10, double* error = nullptr,
                 unsigned max_depth = 12) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, max_depth, rel_tol, &err);
  if (error) *error = err;
  return v;
}

}  // namespace dpp
