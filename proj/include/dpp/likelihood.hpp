#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpp/error.hpp"
#include "dpp/model.hpp"
#include "dpp/optimize.hpp"
#include "dpp/spectral.hpp"
#include "dpp/window.hpp"

namespace dpp {

// Pieces of the periodic log density; value = |R| - n log|R| - D + log_det.
struct DensityTerms {
  double log_det = 0.0;
  double D = 0.0;
  double value = 0.0;
  int M = 0;          // effective lattice half-width used
  bool grid = false;  // Gram entries read from the FFT grid
  double ell() const { return log_det - D; }
};

inline constexpr int kDirectSumMaxN = 256;

namespace detail {

inline double chol_log_det(const Eigen::MatrixXd& G, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::NonPositiveDefinite,
         std::string(what) + " Gram matrix is not positive definite (N too small or near-duplicate points)");
  const auto& Lm = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < G.rows(); ++i) s += std::log(Lm(i, i));
  return 2.0 * s;
}

}  // namespace detail

inline DensityTerms log_density_periodic_terms(const KernelModel& model, const PointPattern& pattern, int N) {
  check_pattern(pattern);
  if (pattern.dim() != model.dim) fail(ErrorKind::Domain, "pattern and model dimensions differ");
  const SpectralLattice L = build_lattice(model, pattern.window, N, LatticeMode::Likelihood, WindowMethod::Periodic);
  DensityTerms t;
  t.D = log_det_normalizer(L);
  t.M = std::max(L.M[0], L.M[1]);
  const std::size_t n = pattern.size();
  std::vector<Vec> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = L.window_map.apply(pattern.points[i]);

  if (n > 0) {
    Eigen::MatrixXd G(n, n);
    std::vector<Vec> diffs;
    diffs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) diffs.push_back(Vec{y[i][0] - y[j][0], y[i][1] - y[j][1]});
    Eigen::VectorXd vals;
    double diag;
    if (t.M <= kDirectSumMaxN) {
      CosineSum cs(L, CosineSum::Weights::PhiTilde);
      vals = cs.evaluate(diffs);
      diag = cs.at_zero();
    } else {
      t.grid = true;
      CTildeGrid grid(L, fft_friendly_size(2 * t.M + 1));
      vals.resize(static_cast<Eigen::Index>(diffs.size()));
      for (std::size_t p = 0; p < diffs.size(); ++p) vals[static_cast<Eigen::Index>(p)] = grid.lookup(diffs[p]);
      diag = grid.at_index(0, 0);
    }
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      G(i, i) = diag;
      for (std::size_t j = i + 1; j < n; ++j, ++p) G(i, j) = G(j, i) = vals[static_cast<Eigen::Index>(p)];
    }
    t.log_det = detail::chol_log_det(G, "C-tilde");
  }
  const double area = pattern.window.volume();
  t.value = area - static_cast<double>(n) * std::log(area) - t.D + t.log_det;
  return t;
}

// log of the periodic approximation of the density of X_R with respect to the
// unit-rate Poisson process on R.
inline double log_density_periodic(const KernelModel& model, const PointPattern& pattern, int N = 512) {
  return log_density_periodic_terms(model, pattern, N).value;
}

// k-fold self convolution of the normalized kernel, at distance r.
inline double convolution_power(const KernelModel& m, int k, double r) {
  const int d = m.dim;
  const double a = m.a();
  const double pi = std::numbers::pi;
  if (m.family == Family::Gaussian)
    return std::pow(k * pi * a * a, -0.5 * d) * std::exp(-(r / a) * (r / a) / k);
  if (m.family == Family::WhittleMatern) {
    const double nup = k * (m.n() + 0.5 * d) - 0.5 * d;
    return std::exp(log_xnu_bessel_k(nup, r / a) - (nup + d - 1.0) * std::numbers::ln2 -
                    d * std::log(std::sqrt(pi) * a) - std::lgamma(nup + 0.5 * d));
  }
  fail(ErrorKind::UnsupportedFamily, std::string("no closed-form convolution powers for ") + family_name(m.family));
}

// Terms k = 1..K of the series for C-tilde_app and D_app; K = 0 picks K so the
// neglected terms fall below 1e-13 of the first.
inline int convolution_terms(const KernelModel& m, int K) {
  if (K > 0) return K;
  const double ratio = m.rho / rho_max(m);
  const double first = ratio * convolution_power(m, 1, 0.0);
  for (int k = 2; k < 1000000; ++k)
    if (std::pow(ratio, k) * convolution_power(m, k, 0.0) < 1e-13 * first * (1.0 - ratio)) return k;
  return 1000000;
}

inline double c_tilde_convolution(const KernelModel& m, double r, int K) {
  const double ratio = m.rho / rho_max(m);
  double s = 0.0, rk = 1.0;
  for (int k = 1; k <= K; ++k) {
    rk *= ratio;
    s += rk * convolution_power(m, k, r);
  }
  return s;
}

inline double D_convolution(const KernelModel& m, double volume, int K) {
  const double ratio = m.rho / rho_max(m);
  CompensatedSum s;
  double rk = 1.0;
  for (int k = 1; k <= K; ++k) {
    rk *= ratio;
    s.add(rk * convolution_power(m, k, 0.0) / k);
  }
  return volume * s.value();
}

inline double log_density_convolution(const KernelModel& model, const PointPattern& pattern, int K_terms = 0) {
  if (model.family != Family::Gaussian && model.family != Family::WhittleMatern)
    fail(ErrorKind::UnsupportedFamily, "convolution approximation needs gaussian or whittlematern");
  if (!strictly_valid(model)) fail(ErrorKind::NonStrictEigenvalue, "convolution approximation needs rho < rho_max");
  check_pattern(pattern);
  const int K = convolution_terms(model, K_terms);
  const double area = pattern.window.volume();
  const double D = D_convolution(model, area, K);
  const std::size_t n = pattern.size();
  double log_det = 0.0;
  if (n > 0) {
    Eigen::MatrixXd G(n, n);
    const double diag = c_tilde_convolution(model, 0.0, K);
    for (std::size_t i = 0; i < n; ++i) {
      G(i, i) = diag;
      for (std::size_t j = i + 1; j < n; ++j) {
        const Vec& a = pattern.points[i];
        const Vec& b = pattern.points[j];
        G(i, j) = G(j, i) = c_tilde_convolution(model, norm(Vec{a[0] - b[0], a[1] - b[1]}, model.dim), K);
      }
    }
    log_det = detail::chol_log_det(G, "convolution C-tilde");
  }
  return area - D + log_det;
}

enum class FitMethod { MlePeriodic, MleConvolution, MceK, MceG };
enum class RhoSource { Empirical, Mle };

inline const char* fit_method_name(FitMethod m) {
  switch (m) {
    case FitMethod::MlePeriodic: return "mle_periodic";
    case FitMethod::MleConvolution: return "mle_convolution";
    case FitMethod::MceK: return "mce_K";
    case FitMethod::MceG: return "mce_g";
  }
  return "unknown";
}

struct FitResult {
  KernelModel model;
  double objective = 0.0;  // log density for MLE, contrast for MCE
  FitMethod method = FitMethod::MlePeriodic;
  int N_used = 0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = true;
  RhoSource rho_source = RhoSource::Empirical;
  int free_parameters = 1;
  std::size_t n_points = 0;
  Window window;
  std::vector<std::string> warnings;
};

inline bool likelihood_based(FitMethod m) { return m == FitMethod::MlePeriodic || m == FitMethod::MleConvolution; }

struct FitOptions {
  bool fit_rho = false;
  int N_start = 512;
  int N_max = 1024;
  std::optional<double> nu_fixed;  // families with a shape parameter; free when empty
  int max_iter = 200;
  double stable_tol = 1e-3;  // relative parameter movement that ends N doubling
  bool escalate = true;
  int scan_points = 16;
  double alpha_tol = 1e-5;  // golden-section tolerance in log alpha
  bool use_convolution = false;
  int K_terms = 0;
  // The convolution density grows without bound as rho approaches rho_max (the
  // diagonal of C-tilde_app diverges while D_app stays finite), so its search
  // stops at this fraction of alpha_max.
  double convolution_alpha_cap = 0.95;
};

namespace detail {

inline double default_nu(Family f) { return f == Family::PowerExponentialSpectral ? 2.0 : 1.0; }

inline KernelModel make_model(Family f, double rho, double alpha, std::optional<double> nu, int dim) {
  KernelModel m;
  m.family = f;
  m.rho = rho;
  m.alpha = alpha;
  if (uses_nu(f)) m.nu = nu.value_or(default_nu(f));
  m.dim = dim;
  return m;
}

struct SearchOutcome {
  KernelModel model;
  double score = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = true;
  std::vector<std::string> warnings;
};

// Maximizes score(model) over alpha in (0, cap * alpha_max], plus nu and/or
// rho by Nelder-Mead when they are free. score returns -inf where undefined.
inline SearchOutcome search_parameters(Family family, int dim, double rho, std::optional<double> nu_fixed,
                                       bool free_rho, const std::function<double(const KernelModel&)>& score,
                                       const FitOptions& opt, std::optional<double> alpha_hint = {}) {
  if (family == Family::Circular || family == Family::JincLike || family == Family::GeneralizedGammaSpectral)
    fail(ErrorKind::UnsupportedFamily, std::string("fitting is not available for ") + family_name(family));
  const bool free_nu = uses_nu(family) && !nu_fixed;
  const double nu0 = nu_fixed.value_or(default_nu(family));
  SearchOutcome out;
  if (free_nu) out.warnings.push_back("nu and alpha are both free; they are hard to identify jointly");

  auto safe_score = [&](const KernelModel& m) {
    ++out.evaluations;
    try {
      const double v = score(m);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NonPositiveDefinite || e.kind() == ErrorKind::NonStrictEigenvalue)
        return -std::numeric_limits<double>::infinity();
      throw;
    }
  };

  // one-dimensional search in log alpha
  const double cap = opt.use_convolution ? opt.convolution_alpha_cap : 0.999;
  const double a_hi = cap * alpha_max(family, rho, nu0, dim);
  double best_la = 0.0, best_v = -std::numeric_limits<double>::infinity();
  double lo_la, hi_la;
  auto f1 = [&](double la) { return safe_score(make_model(family, rho, std::exp(la), nu0, dim)); };
  if (alpha_hint && *alpha_hint > 0.0 && *alpha_hint < a_hi) {
    lo_la = std::log(*alpha_hint) - std::log(1.5);
    hi_la = std::min(std::log(*alpha_hint) + std::log(1.5), std::log(a_hi));
  } else {
    const int K = std::max(opt.scan_points, 4);
    double floor_la = std::log(a_hi * 1e-2);
    std::vector<double> grid, vals;
    for (int extend = 0; extend < 3; ++extend) {
      grid.clear();
      vals.clear();
      for (int i = 0; i < K; ++i) {
        const double la = floor_la + (std::log(a_hi) - floor_la) * i / (K - 1);
        grid.push_back(la);
        vals.push_back(f1(la));
      }
      const auto idx = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
      if (idx > 0 || extend == 2) break;
      floor_la -= std::log(10.0);
    }
    const auto idx = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    best_la = grid[idx];
    best_v = vals[idx];
    lo_la = grid[idx == 0 ? 0 : idx - 1];
    hi_la = grid[std::min(idx + 1, grid.size() - 1)];
  }
  const auto g = golden_section_max(f1, lo_la, hi_la, opt.alpha_tol);
  if (g.value >= best_v) {
    best_la = g.x;
    best_v = g.value;
  }
  out.iterations = g.evaluations;
  out.model = make_model(family, rho, std::exp(best_la), nu0, dim);
  if (opt.use_convolution && std::exp(best_la) > 0.999 * a_hi)
    out.warnings.push_back("alpha estimate sits at the convolution search cap");
  out.score = best_v;
  if (!free_nu && !free_rho) return out;

  // Nelder-Mead on (log alpha [, log nu] [, log rho])
  std::vector<double> x0{best_la}, step{0.1};
  if (free_nu) {
    x0.push_back(std::log(nu0));
    step.push_back(0.3);
  }
  if (free_rho) {
    x0.push_back(std::log(rho));
    step.push_back(0.05);
  }
  auto unpack = [&](const std::vector<double>& x) {
    const double nu = free_nu ? std::exp(x[1]) : nu0;
    const double r = free_rho ? std::exp(x.back()) : rho;
    return make_model(family, r, std::exp(x[0]), nu, dim);
  };
  // keep the starting simplex feasible
  if (std::exp(best_la) > 0.95 * a_hi) step[0] = -0.1;
  auto neg = [&](const std::vector<double>& x) {
    const KernelModel m = unpack(x);
    if (m.nu && (*m.nu > 1e4 || *m.nu < 1e-3)) return std::numeric_limits<double>::infinity();
    if (m.a() > cap * alpha_max(m)) return std::numeric_limits<double>::infinity();
    return -safe_score(m);
  };
  NelderMeadOptions nmo;
  nmo.max_iter = opt.max_iter;
  const auto nm = nelder_mead(neg, x0, step, nmo);
  out.iterations += nm.iterations;
  out.converged = nm.converged;
  if (!nm.converged) out.warnings.push_back("Nelder-Mead stopped after " + std::to_string(nm.iterations) + " iterations");
  if (-nm.value >= out.score) {
    out.model = unpack(nm.x);
    out.score = -nm.value;
  }
  return out;
}

inline double relative_change(const KernelModel& a, const KernelModel& b) {
  double c = std::abs(a.a() - b.a()) / b.a();
  if (a.nu && b.nu) c = std::max(c, std::abs(*a.nu - *b.nu) / *b.nu);
  c = std::max(c, std::abs(a.rho - b.rho) / b.rho);
  return c;
}

}  // namespace detail

// Approximate MLE of theta (and optionally rho) with N doubled from N_start
// until the optimum moves less than stable_tol, or the lattice at the optimum
// holds every non-negligible eigenvalue.
inline FitResult fit_mle(Family family, const PointPattern& pattern, const FitOptions& opt = {}) {
  if (pattern.empty()) fail(ErrorKind::EmptyPattern, "cannot fit a model to an empty pattern");
  check_pattern(pattern);
  const int dim = pattern.dim();
  const double rho_hat = pattern.intensity();
  FitResult res;
  res.method = opt.use_convolution ? FitMethod::MleConvolution : FitMethod::MlePeriodic;
  res.rho_source = opt.fit_rho ? RhoSource::Mle : RhoSource::Empirical;
  res.n_points = pattern.size();
  res.window = pattern.window;
  res.free_parameters = 1 + (uses_nu(family) && !opt.nu_fixed ? 1 : 0) + (opt.fit_rho ? 1 : 0);

  if (opt.use_convolution) {
    auto score = [&](const KernelModel& m) { return log_density_convolution(m, pattern, opt.K_terms); };
    auto s = detail::search_parameters(family, dim, rho_hat, opt.nu_fixed, opt.fit_rho, score, opt);
    res.model = s.model;
    res.objective = s.score;
    res.iterations = s.iterations;
    res.evaluations = s.evaluations;
    res.converged = s.converged;
    res.warnings = s.warnings;
    return res;
  }

  int N = opt.N_start;
  std::optional<detail::SearchOutcome> prev;
  for (;;) {
    auto score = [&](const KernelModel& m) { return log_density_periodic_terms(m, pattern, N).value; };
    std::optional<double> hint;
    if (prev && !opt.fit_rho && !(uses_nu(family) && !opt.nu_fixed)) hint = prev->model.a();
    auto s = detail::search_parameters(family, dim, rho_hat, opt.nu_fixed, opt.fit_rho, score, opt, hint);
    res.iterations += s.iterations;
    res.evaluations += s.evaluations;
    const bool stable = prev && detail::relative_change(s.model, prev->model) < opt.stable_tol;
    const auto L = build_lattice(s.model, pattern.window, N, LatticeMode::Likelihood, WindowMethod::Periodic);
    const bool untruncated = L.M[0] < N && (dim == 1 || L.M[1] < N);
    prev = s;
    res.N_used = N;
    if (!opt.escalate || stable || untruncated) break;
    if (2 * N > opt.N_max) {
      res.warnings.push_back("N escalation stopped at N_max = " + std::to_string(N));
      break;
    }
    N *= 2;
  }
  res.model = prev->model;
  res.objective = prev->score;
  res.converged = prev->converged;
  res.warnings.insert(res.warnings.end(), prev->warnings.begin(), prev->warnings.end());
  if (!std::isfinite(res.objective)) fail(ErrorKind::NoConvergence, "no admissible parameter gave a finite likelihood");
  return res;
}

// Indices of fits in descending objective order; ties go to fewer parameters.
inline std::vector<std::size_t> compare_models(const std::vector<FitResult>& fits) {
  for (const auto& f : fits) {
    if (!likelihood_based(f.method)) fail(ErrorKind::MixedMethods, "model comparison needs likelihood-based fits");
    if (f.method != fits.front().method) fail(ErrorKind::MixedMethods, "fits use different likelihood approximations");
    const auto& w = f.window;
    const auto& w0 = fits.front().window;
    if (f.n_points != fits.front().n_points || w.lo != w0.lo || w.hi != w0.hi)
      fail(ErrorKind::MixedMethods, "fits were made on different patterns");
  }
  std::vector<std::size_t> idx(fits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    if (fits[a].objective != fits[b].objective) return fits[a].objective > fits[b].objective;
    return fits[a].free_parameters < fits[b].free_parameters;
  });
  return idx;
}

}  // namespace dpp
