#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dpp/error.hpp"
#include "dpp/likelihood.hpp"
#include "dpp/model.hpp"
#include "dpp/parallel.hpp"
#include "dpp/random.hpp"
#include "dpp/sampler.hpp"
#include "dpp/special.hpp"
#include "dpp/window.hpp"

namespace dpp {

enum class CurveKind { K, L, Pcf, F, G, J, LMinusR };

inline const char* curve_kind_name(CurveKind k) {
  switch (k) {
    case CurveKind::K: return "K";
    case CurveKind::L: return "L";
    case CurveKind::Pcf: return "g";
    case CurveKind::F: return "F";
    case CurveKind::G: return "G";
    case CurveKind::J: return "J";
    case CurveKind::LMinusR: return "L-r";
  }
  return "?";
}

inline std::optional<CurveKind> curve_kind_from_name(const std::string& s) {
  static const std::map<std::string, CurveKind> names{
      {"K", CurveKind::K}, {"L", CurveKind::L},     {"g", CurveKind::Pcf},    {"pcf", CurveKind::Pcf},
      {"F", CurveKind::F}, {"G", CurveKind::G},     {"J", CurveKind::J},      {"L-r", CurveKind::LMinusR},
      {"Lr", CurveKind::LMinusR}};
  const auto it = names.find(s);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

struct SummaryCurve {
  std::vector<double> r;
  std::vector<double> value;
  CurveKind kind = CurveKind::K;
  // estimates at r below this are known to be biased (kernel smoothing near 0)
  double reliable_from = 0.0;
};

struct EnvelopeBand {
  std::vector<double> r;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  std::size_t n_sim = 0;
  std::size_t n_dropped = 0;
  CurveKind kind = CurveKind::K;
};

// 512 equally spaced distances from 0 to a quarter of the shortest side.
inline std::vector<double> default_r_grid(const Window& w, std::size_t n = 512) {
  std::vector<double> r(n);
  const double rmax = 0.25 * w.min_side();
  for (std::size_t i = 0; i < n; ++i) r[i] = rmax * static_cast<double>(i) / static_cast<double>(n - 1);
  return r;
}

namespace detail {

inline void check_r_grid(const std::vector<double>& r, const Window& w) {
  if (r.empty()) fail(ErrorKind::Domain, "empty r grid");
  if (r.front() < 0.0) fail(ErrorKind::Domain, "r grid must be non-negative");
  for (std::size_t i = 1; i < r.size(); ++i)
    if (!(r[i] > r[i - 1])) fail(ErrorKind::Domain, "r grid must be strictly increasing");
  if (r.back() > 0.5 * w.min_side() * (1.0 + 1e-12))
    fail(ErrorKind::Domain, "r grid exceeds half the shortest window side");
}

inline Vec diff(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1]}; }

}  // namespace detail

// Translation-corrected estimate of Ripley's K.
inline SummaryCurve estimate_K(const PointPattern& pattern, const std::vector<double>& r) {
  const std::size_t n = pattern.size();
  if (n < 2) fail(ErrorKind::TooFewPoints, "K estimate needs at least two points");
  detail::check_r_grid(r, pattern.window);
  const Window& W = pattern.window;
  const double rmax = r.back();
  std::vector<double> jumps(r.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec h = detail::diff(pattern.points[i], pattern.points[j]);
      const double d = norm(h, W.dim);
      if (d > rmax) continue;
      const auto k = static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), d) - r.begin());
      jumps[k] += 2.0 / W.overlap_volume(h);
    }
  SummaryCurve c{r, std::vector<double>(r.size()), CurveKind::K, 0.0};
  const double scale = W.volume() * W.volume() / (static_cast<double>(n) * static_cast<double>(n - 1));
  CompensatedSum acc;
  for (std::size_t k = 0; k < r.size(); ++k) {
    acc.add(jumps[k]);
    c.value[k] = r[k] == 0.0 ? 0.0 : scale * acc.value();
  }
  return c;
}

inline double K_to_L(double K, int dim) {
  return dim == 2 ? std::sqrt(std::max(K, 0.0) / std::numbers::pi) : 0.5 * K;
}

inline SummaryCurve estimate_L(const PointPattern& pattern, const std::vector<double>& r) {
  SummaryCurve c = estimate_K(pattern, r);
  for (double& v : c.value) v = K_to_L(v, pattern.dim());
  c.kind = CurveKind::L;
  return c;
}

inline double default_pcf_bandwidth(const PointPattern& p) { return 0.15 / std::sqrt(p.intensity()); }

// Epanechnikov-smoothed, translation-corrected pair correlation estimate.
// bandwidth <= 0 picks 0.15 / sqrt(intensity).
inline SummaryCurve estimate_pcf(const PointPattern& pattern, const std::vector<double>& r, double bandwidth = 0.0) {
  const std::size_t n = pattern.size();
  if (n < 2) fail(ErrorKind::TooFewPoints, "pcf estimate needs at least two points");
  detail::check_r_grid(r, pattern.window);
  const double h = bandwidth > 0.0 ? bandwidth : default_pcf_bandwidth(pattern);
  const Window& W = pattern.window;
  const int dim = W.dim;
  const double reach = r.back() + h;
  std::vector<double> acc(r.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec hv = detail::diff(pattern.points[i], pattern.points[j]);
      const double d = norm(hv, dim);
      if (d > reach) continue;
      const double w = 2.0 / W.overlap_volume(hv);
      auto k = static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), d - h) - r.begin());
      for (; k < r.size() && r[k] < d + h; ++k) {
        const double t = (r[k] - d) / h;
        acc[k] += w * 0.75 / h * (1.0 - t * t);
      }
    }
  SummaryCurve c{r, std::vector<double>(r.size()), CurveKind::Pcf, h};
  const double scale = W.volume() * W.volume() / (static_cast<double>(n) * static_cast<double>(n - 1));
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] == 0.0 && dim == 2) {
      c.value[k] = 0.0;
      continue;
    }
    const double surface = dim == 2 ? 2.0 * std::numbers::pi * r[k] : 2.0;
    c.value[k] = scale * acc[k] / surface;
  }
  return c;
}

struct FGJCurves {
  SummaryCurve F, G, J;
};

namespace detail {

// Border-corrected (Hanisch-type) distribution estimate: observation i counts
// when its distance d_i is at most its boundary distance b_i, weighted by the
// inverse eroded volume; the ratio form keeps the result monotone in [0, 1].
inline std::vector<double> border_cdf(const std::vector<double>& d, const std::vector<double>& b, const Window& W,
                                      const std::vector<double>& r) {
  std::vector<std::pair<double, double>> obs;
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > b[i]) continue;
    const double v = W.eroded_volume(d[i]);
    if (!(v > 0.0)) continue;
    obs.emplace_back(d[i], 1.0 / v);
    total += 1.0 / v;
  }
  if (!(total > 0.0)) fail(ErrorKind::TooFewPoints, "no observation survives the border correction");
  std::sort(obs.begin(), obs.end());
  std::vector<double> out(r.size());
  std::size_t j = 0;
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    while (j < obs.size() && obs[j].first <= r[k]) s += obs[j++].second;
    out[k] = std::min(1.0, s / total);
  }
  return out;
}

inline double nearest_distance(const std::vector<Vec>& pts, const Vec& x, int dim, std::size_t skip) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j == skip) continue;
    const double dx = pts[j][0] - x[0];
    const double dy = dim == 2 ? pts[j][1] - x[1] : 0.0;
    best = std::min(best, dx * dx + dy * dy);
  }
  return std::sqrt(best);
}

}  // namespace detail

// Empty-space F, nearest-neighbour G and J = (1 - G)/(1 - F). F uses a regular
// grid of test points (test_points per axis). J is reported only where F < 1.
inline FGJCurves estimate_FGJ(const PointPattern& pattern, const std::vector<double>& r, int test_points = 0) {
  const std::size_t n = pattern.size();
  if (n < 2) fail(ErrorKind::TooFewPoints, "nearest-neighbour distances need at least two points");
  detail::check_r_grid(r, pattern.window);
  const Window& W = pattern.window;
  const int dim = W.dim;
  const int m = test_points > 0 ? test_points : (dim == 2 ? 100 : 1000);

  std::vector<double> d(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = detail::nearest_distance(pattern.points, pattern.points[i], dim, i);
    b[i] = W.boundary_distance(pattern.points[i]);
  }
  std::vector<double> du, bu;
  const int my = dim == 2 ? m : 1;
  for (int iy = 0; iy < my; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      Vec u{W.lo[0] + (ix + 0.5) * W.side(0) / m, 0.0};
      if (dim == 2) u[1] = W.lo[1] + (iy + 0.5) * W.side(1) / m;
      du.push_back(detail::nearest_distance(pattern.points, u, dim, n));
      bu.push_back(W.boundary_distance(u));
    }

  FGJCurves out;
  out.G = {r, detail::border_cdf(d, b, W, r), CurveKind::G, 0.0};
  out.F = {r, detail::border_cdf(du, bu, W, r), CurveKind::F, 0.0};
  out.J.kind = CurveKind::J;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!(out.F.value[k] < 1.0)) break;
    out.J.r.push_back(r[k]);
    out.J.value.push_back((1.0 - out.G.value[k]) / (1.0 - out.F.value[k]));
  }
  return out;
}

// Statistic values on the full grid; NaN where undefined (J beyond F = 1).
inline std::vector<double> statistic_values(const PointPattern& pattern, CurveKind kind, const std::vector<double>& r,
                                            double bandwidth = 0.0) {
  switch (kind) {
    case CurveKind::K: return estimate_K(pattern, r).value;
    case CurveKind::L: return estimate_L(pattern, r).value;
    case CurveKind::LMinusR: {
      auto v = estimate_L(pattern, r).value;
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= r[k];
      return v;
    }
    case CurveKind::Pcf: return estimate_pcf(pattern, r, bandwidth).value;
    case CurveKind::F: return estimate_FGJ(pattern, r).F.value;
    case CurveKind::G: return estimate_FGJ(pattern, r).G.value;
    case CurveKind::J: {
      auto c = estimate_FGJ(pattern, r).J.value;
      c.resize(r.size(), std::numeric_limits<double>::quiet_NaN());
      return c;
    }
  }
  return {};
}

// Model K on a grid; closed forms where they exist, otherwise the integral of
// R0^2 accumulated interval by interval.
inline std::vector<double> K_curve(const KernelModel& m, const std::vector<double>& r) {
  std::vector<double> out(r.size());
  const bool closed = m.family == Family::Gaussian || (m.family == Family::Cauchy && m.dim == 2);
  if (closed) {
    for (std::size_t k = 0; k < r.size(); ++k) out[k] = K_function(m, r[k]);
    return out;
  }
  if (!has_closed_form_kernel(m.family, m.nu.value_or(0.0)))
    fail(ErrorKind::UnsupportedClosedForm, std::string("no closed-form K for ") + family_name(m.family));
  const KernelModel mm = m.rho > 0.0 ? m : m.with_rho(1.0);
  const double pi = std::numbers::pi;
  auto integrand = [&](double t) {
    const double R = kernel_value_radial(mm, t) / mm.rho;
    return (m.dim == 2 ? 2.0 * pi * t : 2.0) * R * R;
  };
  double prev = 0.0, acc = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    double hi = r[k];
    if (m.family == Family::Circular) hi = std::min(hi, m.del());
    if (hi > prev) {
      acc += integrate(integrand, prev, hi, 1e-11);
      prev = hi;
    }
    const double ball = m.dim == 2 ? pi * r[k] * r[k] : 2.0 * r[k];
    out[k] = ball - acc;
  }
  return out;
}

inline std::vector<double> pcf_curve(const KernelModel& m, const std::vector<double>& r) {
  std::vector<double> out(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) out[k] = pcf_shape(m, r[k]);
  return out;
}

// ---------------------------------------------------------------------------
// minimum contrast

struct McOptions {
  CurveKind statistic = CurveKind::K;  // K or Pcf
  double q = 0.5;
  double p = 2.0;
  std::optional<double> r_lower;  // default 0 for K, 1% of the shortest side for g
  std::optional<double> r_upper;  // default a quarter of the shortest side
  std::size_t n_r = 512;
  double bandwidth = 0.0;
  std::optional<double> nu_fixed;
  int max_iter = 200;
};

// Contrast between an empirical curve and the model curve, by the trapezoid rule.
inline double contrast(const std::vector<double>& r, const std::vector<double>& s_hat, const std::vector<double>& s,
                       double q, double p) {
  double D = 0.0;
  auto term = [&](std::size_t k) {
    return std::pow(std::abs(std::pow(std::max(s_hat[k], 0.0), q) - std::pow(std::max(s[k], 0.0), q)), p);
  };
  double prev = term(0);
  for (std::size_t k = 1; k < r.size(); ++k) {
    const double cur = term(k);
    D += 0.5 * (r[k] - r[k - 1]) * (prev + cur);
    prev = cur;
  }
  return D;
}

// Minimum contrast fit to a given empirical curve at intensity rho.
inline FitResult fit_minimum_contrast_curve(Family family, const SummaryCurve& curve, double rho, int dim,
                                            const McOptions& opt = {}) {
  if (curve.kind != CurveKind::K && curve.kind != CurveKind::Pcf)
    fail(ErrorKind::Domain, "minimum contrast uses K or g");
  if (family != Family::Gaussian && family != Family::WhittleMatern && family != Family::Cauchy)
    fail(ErrorKind::UnsupportedFamily, std::string("no closed-form summary curve for ") + family_name(family));
  const bool useK = curve.kind == CurveKind::K;
  FitOptions fo;
  fo.nu_fixed = opt.nu_fixed;
  fo.max_iter = opt.max_iter;
  auto score = [&](const KernelModel& m) {
    const auto s = useK ? K_curve(m, curve.r) : pcf_curve(m, curve.r);
    return -contrast(curve.r, curve.value, s, opt.q, opt.p);
  };
  auto s = detail::search_parameters(family, dim, rho, opt.nu_fixed, false, score, fo);
  FitResult res;
  res.model = s.model;
  res.objective = -s.score;
  res.method = useK ? FitMethod::MceK : FitMethod::MceG;
  res.iterations = s.iterations;
  res.evaluations = s.evaluations;
  res.converged = s.converged;
  res.free_parameters = 1 + (uses_nu(family) && !opt.nu_fixed ? 1 : 0);
  res.warnings = s.warnings;
  return res;
}

inline FitResult fit_minimum_contrast(Family family, const PointPattern& pattern, const McOptions& opt = {}) {
  if (pattern.size() < 2) fail(ErrorKind::TooFewPoints, "minimum contrast needs at least two points");
  check_pattern(pattern);
  const Window& W = pattern.window;
  const bool useK = opt.statistic == CurveKind::K;
  if (!useK && opt.statistic != CurveKind::Pcf) fail(ErrorKind::Domain, "minimum contrast uses K or g");
  const double rl = opt.r_lower.value_or(useK ? 0.0 : 0.01 * W.min_side());
  const double ru = opt.r_upper.value_or(0.25 * W.min_side());
  if (!(ru > rl && rl >= 0.0)) fail(ErrorKind::Domain, "need 0 <= r_lower < r_upper");
  const std::size_t nr = std::max<std::size_t>(opt.n_r, 2);
  std::vector<double> r(nr);
  for (std::size_t k = 0; k < nr; ++k) r[k] = rl + (ru - rl) * static_cast<double>(k) / static_cast<double>(nr - 1);
  const SummaryCurve c = useK ? estimate_K(pattern, r) : estimate_pcf(pattern, r, opt.bandwidth);
  FitResult res = fit_minimum_contrast_curve(family, c, pattern.intensity(), pattern.dim(), opt);
  res.n_points = pattern.size();
  res.window = W;
  return res;
}

// ---------------------------------------------------------------------------
// simulation-based diagnostics

struct EnvelopeOptions {
  std::vector<double> r;  // default grid when empty
  WindowMethod method = WindowMethod::Periodic;
  int threads = 1;
  double bandwidth = 0.0;
};

namespace detail {

inline void band_quantiles(std::vector<double> v, double& lo, double& hi, double& mean) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) {
    lo = hi = mean = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  const auto il = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(m)));
  const auto iu = static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(m)));
  lo = v[std::min(il, m - 1)];
  hi = v[std::clamp<std::size_t>(iu, 1, m) - 1];
  CompensatedSum s;
  for (double x : v) s.add(x);
  mean = s.value() / static_cast<double>(m);
}

}  // namespace detail

// Pointwise 2.5% and 97.5% quantiles of the statistic over n_sim simulations.
inline EnvelopeBand envelopes(const KernelModel& model, CurveKind kind, const Window& window, std::size_t n_sim,
                              const RngStream& rng, const EnvelopeOptions& opt = {}) {
  require_valid(model);
  window.check();
  if (n_sim == 0) fail(ErrorKind::Domain, "envelopes need n_sim >= 1");
  EnvelopeBand band;
  band.kind = kind;
  band.r = opt.r.empty() ? default_r_grid(window) : opt.r;
  SimulationOptions so;
  so.method = opt.method;
  const Simulator sim(model, window, so);
  std::vector<std::vector<double>> values(n_sim);
  parallel_for(n_sim, opt.threads, [&](std::size_t i) {
    RngStream s = rng.substream(i);
    const PointPattern x = sim(s);
    try {
      values[i] = statistic_values(x, kind, band.r, opt.bandwidth);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TooFewPoints) throw;
    }
  });
  const std::size_t nr = band.r.size();
  band.lower.resize(nr);
  band.upper.resize(nr);
  band.mean.resize(nr);
  for (const auto& v : values) band.n_sim += v.empty() ? 0 : 1;
  band.n_dropped = n_sim - band.n_sim;
  if (band.n_sim == 0) fail(ErrorKind::TooFewPoints, "every simulated pattern was too small for the statistic");
  std::vector<double> col;
  for (std::size_t k = 0; k < nr; ++k) {
    col.clear();
    for (const auto& v : values)
      if (!v.empty()) col.push_back(v[k]);
    detail::band_quantiles(col, band.lower[k], band.upper[k], band.mean[k]);
  }
  return band;
}

struct TestResult {
  std::string statistic;
  double observed = 0.0;
  double p_value = 1.0;
  std::size_t n_sim = 0;
  std::size_t n_dropped = 0;
  std::uint64_t seed = 0;
  std::vector<double> simulated;  // statistic per kept replicate, in replicate order
  std::vector<FitResult> fits;    // fits to the data
  std::vector<std::string> warnings;
};

namespace detail {

inline double exceedance(const std::vector<double>& sims, double observed) {
  std::size_t c = 0;
  for (double v : sims) c += v >= observed ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(sims.size());
}

inline void finish_test(TestResult& t, std::vector<std::optional<double>>& reps) {
  for (auto& v : reps)
    if (v) t.simulated.push_back(*v);
  t.n_sim = reps.size();
  t.n_dropped = reps.size() - t.simulated.size();
  if (t.simulated.empty()) fail(ErrorKind::NoConvergence, "every simulated replicate failed");
  if (static_cast<double>(t.n_dropped) > 0.05 * static_cast<double>(t.n_sim))
    t.warnings.push_back(std::to_string(t.n_dropped) + " of " + std::to_string(t.n_sim) + " replicates dropped");
  t.p_value = exceedance(t.simulated, t.observed);
}

inline bool recoverable(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::UnsupportedFamily:
    case ErrorKind::MixedMethods: return false;
    default: return true;
  }
}

}  // namespace detail

struct LrtOptions {
  FitOptions null_fit;
  FitOptions alt_fit;
  int threads = 1;
};

// Parametric-bootstrap likelihood ratio test of a nested null family.
inline TestResult lr_test(Family null_family, Family alt_family, const PointPattern& pattern, std::size_t n_sim,
                          const RngStream& rng, const LrtOptions& opt = {}) {
  if (n_sim == 0) fail(ErrorKind::Domain, "the likelihood ratio test needs n_sim >= 1");
  if (null_family != Family::Gaussian ||
      (alt_family != Family::WhittleMatern && alt_family != Family::Cauchy &&
       alt_family != Family::PowerExponentialSpectral))
    fail(ErrorKind::UnsupportedFamily, "the null must be gaussian and the alternative a family containing it");
  TestResult t;
  t.statistic = "lr";
  t.seed = rng.seed();
  auto D = [&](const PointPattern& x, std::vector<FitResult>* keep) {
    const FitResult f0 = fit_mle(null_family, x, opt.null_fit);
    const FitResult f1 = fit_mle(alt_family, x, opt.alt_fit);
    if (keep) *keep = {f0, f1};
    return 2.0 * (f1.objective - f0.objective);
  };
  t.observed = D(pattern, &t.fits);
  const KernelModel null_model = t.fits.front().model;
  SimulationOptions so;
  const Simulator sim(null_model, pattern.window, so);
  std::vector<std::optional<double>> reps(n_sim);
  parallel_for(n_sim, opt.threads, [&](std::size_t i) {
    RngStream s = rng.substream(i);
    try {
      reps[i] = D(sim(s), nullptr);
    } catch (const Error& e) {
      if (!detail::recoverable(e)) throw;
    }
  });
  detail::finish_test(t, reps);
  return t;
}

struct RltOptions {
  FitOptions fit;
  int threads = 1;
  std::size_t min_class_size = 10;
};

// Random labelling test for a two-type pattern with Pi = |a - a1| |a - a2|.
inline TestResult random_labelling_test(const PointPattern& pattern, Family family, std::size_t n_sim,
                                        const RngStream& rng, const RltOptions& opt = {}) {
  if (n_sim == 0) fail(ErrorKind::Domain, "the random labelling test needs n_sim >= 1");
  if (!pattern.marked()) fail(ErrorKind::TooFewPoints, "random labelling needs a marked pattern");
  std::vector<int> levels(pattern.marks);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() != 2) fail(ErrorKind::TooFewPoints, "random labelling needs exactly two mark levels");
  const PointPattern x1 = pattern.with_mark(levels[0]);
  const PointPattern x2 = pattern.with_mark(levels[1]);
  if (x1.size() < opt.min_class_size || x2.size() < opt.min_class_size)
    fail(ErrorKind::TooFewPoints, "each mark class needs at least " + std::to_string(opt.min_class_size) + " points");

  TestResult t;
  t.statistic = "random_labelling";
  t.seed = rng.seed();
  const FitResult full = fit_mle(family, PointPattern{pattern.window, pattern.points, {}}, opt.fit);
  FitOptions sub = opt.fit;
  if (uses_nu(family) && !sub.nu_fixed) sub.nu_fixed = full.model.nu;
  auto pi_stat = [&](double a, const PointPattern& p1, const PointPattern& p2, std::vector<FitResult>* keep) {
    const FitResult f1 = fit_mle(family, p1, sub);
    const FitResult f2 = fit_mle(family, p2, sub);
    if (keep) keep->insert(keep->end(), {f1, f2});
    return std::abs(a - f1.model.a()) * std::abs(a - f2.model.a());
  };
  t.fits.push_back(full);
  t.observed = pi_stat(full.model.a(), x1, x2, &t.fits);

  const double keep = static_cast<double>(x1.size()) / static_cast<double>(pattern.size());
  const Simulator sim(full.model, pattern.window);
  std::vector<std::optional<double>> reps(n_sim);
  parallel_for(n_sim, opt.threads, [&](std::size_t i) {
    RngStream s = rng.substream(i);
    const PointPattern x = sim(s);
    PointPattern y1{x.window, {}, {}}, y2{x.window, {}, {}};
    for (const Vec& p : x.points) (s.uniform() < keep ? y1 : y2).points.push_back(p);
    if (y1.size() < opt.min_class_size || y2.size() < opt.min_class_size) return;
    try {
      const double a = fit_mle(family, x, sub).model.a();
      reps[i] = pi_stat(a, y1, y2, nullptr);
    } catch (const Error& e) {
      if (!detail::recoverable(e)) throw;
    }
  });
  detail::finish_test(t, reps);
  return t;
}

// ---------------------------------------------------------------------------
// separable inhomogeneous workflow

struct InhomogeneousFit {
  int homogeneous_axis = 0;
  Window window;
  double rho1 = 0.0;               // constant intensity factor along the homogeneous axis
  std::vector<double> bin_edges;   // along the other axis
  std::vector<std::size_t> counts;
  std::vector<double> rho2;        // piecewise-constant factor per bin
  double scale = 0.0;              // sqrt(n), the side of T(W)
  PointPattern transformed;
  FitResult fit;
  std::vector<std::string> warnings;

  int free_axis() const { return 1 - homogeneous_axis; }

  std::size_t bin_of(double v) const {
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
    const auto b = static_cast<std::ptrdiff_t>(it - bin_edges.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bin_edges.size()) - 2));
  }

  double intensity(const Vec& x) const { return rho1 * rho2[bin_of(x[free_axis()])]; }

  Vec T(const Vec& x) const {
    const int h = homogeneous_axis, v = free_axis();
    Vec y{};
    y[h] = rho1 * (x[h] - window.lo[h]);
    const std::size_t b = bin_of(x[v]);
    double acc = 0.0;
    for (std::size_t k = 0; k < b; ++k) acc += rho2[k] * (bin_edges[k + 1] - bin_edges[k]);
    y[v] = acc + rho2[b] * (x[v] - bin_edges[b]);
    return y;
  }

  // C(x, y) = sqrt(rho(x)) C_Y0(T(y) - T(x)) sqrt(rho(y)), with C_Y0(0) = 1
  double kernel(const Vec& x, const Vec& y) const {
    const Vec tx = T(x), ty = T(y);
    return std::sqrt(intensity(x) * intensity(y)) * kernel_value(fit.model, Vec{ty[0] - tx[0], ty[1] - tx[1]});
  }

  double pcf(const Vec& x, const Vec& y) const {
    const Vec tx = T(x), ty = T(y);
    const double c = kernel_value(fit.model, Vec{ty[0] - tx[0], ty[1] - tx[1]}) / fit.model.rho;
    return 1.0 - c * c;
  }

  std::string describe() const {
    std::string s = "C(x,y) = sqrt(rho(x)) C_Y0(T(y) - T(x)) sqrt(rho(y)); rho(x) = " + std::to_string(rho1) +
                    " * rho2(x" + std::to_string(free_axis() + 1) + "); C_Y0: " + dpp::describe(fit.model);
    return s;
  }
};

// Fits a DPP with intensity rho1 * rho2(x_v), rho2 piecewise constant on n_bins
// equal bins along the non-homogeneous axis, by mapping the pattern onto
// [0, sqrt(n)]^2 and fitting a unit-intensity stationary model there.
inline InhomogeneousFit fit_inhomogeneous_separable(const PointPattern& pattern, int n_bins, Family family,
                                                    int homogeneous_axis = 0, const FitOptions& opt = {}) {
  if (pattern.dim() != 2) fail(ErrorKind::Domain, "the separable workflow needs a planar pattern");
  if (homogeneous_axis != 0 && homogeneous_axis != 1) fail(ErrorKind::Domain, "homogeneous axis must be 0 or 1");
  if (n_bins < 1) fail(ErrorKind::Domain, "need at least one bin");
  if (pattern.size() < 2) fail(ErrorKind::TooFewPoints, "the separable workflow needs at least two points");
  check_pattern(pattern);
  InhomogeneousFit out;
  out.homogeneous_axis = homogeneous_axis;
  out.window = pattern.window;
  const int h = homogeneous_axis, v = 1 - h;
  const Window& W = pattern.window;
  const double n = static_cast<double>(pattern.size());
  out.scale = std::sqrt(n);
  out.rho1 = out.scale / W.side(h);
  const double width = W.side(v) / n_bins;
  out.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int k = 0; k <= n_bins; ++k) out.bin_edges[static_cast<std::size_t>(k)] = W.lo[v] + k * width;
  out.bin_edges.back() = W.hi[v];
  out.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (const Vec& x : pattern.points) ++out.counts[out.bin_of(x[v])];
  out.rho2.resize(out.counts.size());
  for (std::size_t k = 0; k < out.counts.size(); ++k) {
    out.rho2[k] = static_cast<double>(out.counts[k]) / (width * out.scale);
    if (out.counts[k] == 0) {
      out.rho2[k] = 1e-9;
      out.warnings.push_back("bin " + std::to_string(k) + " is empty; intensity floored at 1e-9");
    }
  }
  out.transformed.window = Window::rect(0.0, out.scale, 0.0, out.scale);
  for (const Vec& x : pattern.points) {
    Vec y = out.T(x);
    for (int q = 0; q < 2; ++q) y[q] = std::clamp(y[q], 0.0, out.scale);
    out.transformed.points.push_back(y);
  }
  out.fit = fit_mle(family, out.transformed, opt);
  return out;
}

}  // namespace dpp
