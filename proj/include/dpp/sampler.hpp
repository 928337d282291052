#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpp/error.hpp"
#include "dpp/fft.hpp"
#include "dpp/model.hpp"
#include "dpp/random.hpp"
#include "dpp/spectral.hpp"
#include "dpp/window.hpp"

namespace dpp {

// Active Fourier indices of the random projection kernel.
struct ProjectionBasis {
  int dim = 2;
  std::vector<std::array<int, 2>> indices;
  std::size_t size() const { return indices.size(); }
};

// Includes every lattice index k independently with probability phi(k), by
// inversion for M = max{k : B_k = 1} over decreasingly ordered eigenvalues.
// The ordering and the law of M are computed once; each draw is then linear in M.
class BernoulliSelector {
 public:
  explicit BernoulliSelector(const SpectralLattice& L) : dim_(L.dim) {
    L.for_each([&](int k1, int k2, double v) {
      if (v > 1.0 + 1e-9 || v < 0.0) fail(ErrorKind::Domain, "eigenvalues must lie in [0,1]");
      if (v > 0.0) eig_.push_back({std::min(v, 1.0), {k1, k2}});
    });
    std::sort(eig_.begin(), eig_.end(), [](const Eig& a, const Eig& b) {
      if (a.lambda != b.lambda) return a.lambda > b.lambda;
      return a.k < b.k;
    });
    // drop the tail whose total mass is below 1e-14: with probability above
    // 1 - 1e-14 none of those indices is selected
    double tail = 0.0;
    std::size_t keep = eig_.size();
    while (keep > 0 && tail + eig_[keep - 1].lambda < 1e-14) tail += eig_[--keep].lambda;
    eig_.resize(keep);
    eig_.shrink_to_fit();
    const std::size_t K = eig_.size();
    if (K == 0) return;

    std::size_t m_prime = 0;
    while (m_prime < K && eig_[m_prime].lambda >= 1.0) ++m_prime;
    std::vector<double> logp(K + 1, -std::numeric_limits<double>::infinity());
    CompensatedSum lp;
    for (std::size_t m = m_prime + 1; m <= K; ++m) lp.add(std::log1p(-lam(m)));
    logp[m_prime] = lp.value();
    for (std::size_t m = m_prime; m < K; ++m)
      logp[m + 1] = logp[m] + std::log(lam(m + 1)) - std::log(lam(m)) - std::log1p(-lam(m + 1));
    const double top = *std::max_element(logp.begin(), logp.end());
    cdf_.resize(K + 1);
    double acc = 0.0;
    for (std::size_t m = 0; m <= K; ++m) {
      acc += std::exp(logp[m] - top);
      cdf_[m] = acc;
    }
  }

  ProjectionBasis operator()(RngStream& rng) const {
    ProjectionBasis basis;
    basis.dim = dim_;
    const std::size_t K = eig_.size();
    if (K == 0) return basis;
    const double u = rng.uniform() * cdf_.back();
    const std::size_t M = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    const std::size_t Mc = std::min(M, K);
    for (std::size_t m = 1; m < Mc; ++m)
      if (lam(m) >= 1.0 || rng.uniform() < lam(m)) basis.indices.push_back(eig_[m - 1].k);
    if (Mc >= 1) basis.indices.push_back(eig_[Mc - 1].k);
    return basis;
  }

 private:
  struct Eig {
    double lambda;
    std::array<int, 2> k;
  };
  // lambda_m for m = 1..K (1-based), lambda_0 = 1
  double lam(std::size_t m) const { return m == 0 ? 1.0 : eig_[m - 1].lambda; }

  int dim_;
  std::vector<Eig> eig_;
  std::vector<double> cdf_;
};

inline ProjectionBasis sample_bernoulli_set(const SpectralLattice& L, RngStream& rng) {
  return BernoulliSelector(L)(rng);
}

enum class BoundMode { Uniform, Local };

struct ProjectionOptions {
  BoundMode bound = BoundMode::Uniform;
  double safety = 1.2;
  int min_grid = 64;
  std::function<void(const std::string&)> log;  // receives envelope-violation notes
};

struct ProjectionStats {
  std::size_t proposals = 0;
  std::size_t expensive_evaluations = 0;
  std::size_t envelope_violations = 0;
  std::size_t breakdown_retries = 0;
};

// Rejection sampling from a density p on S with a constant envelope `bound`
// under a uniform proposal. A proposal with p > bound raises the envelope and
// restarts the draw. `screen`, when given, is an upper bound of p used to
// reject without evaluating p.
template <class Density, class Screen>
Vec rejection_draw(Density&& p, double& bound, double hard_bound, int dim, RngStream& rng, ProjectionStats& stats,
                   double safety, Screen&& screen, const std::function<void(const std::string&)>& log = {}) {
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt > 100000000) fail(ErrorKind::NumericalBreakdown, "rejection sampler failed to accept");
    Vec x{rng.uniform() - 0.5, dim == 2 ? rng.uniform() - 0.5 : 0.0};
    const double u = rng.uniform() * bound;
    ++stats.proposals;
    if (u > screen(x)) continue;
    ++stats.expensive_evaluations;
    const double px = p(x);
    if (px > bound) {
      ++stats.envelope_violations;
      const double old = bound;
      bound = std::min(hard_bound, std::max(bound, px) * safety);
      if (log) log("envelope violation: p = " + std::to_string(px) + " > " + std::to_string(old) +
                   ", envelope raised to " + std::to_string(bound));
      continue;
    }
    if (u <= px) return x;
  }
}

template <class Density>
Vec rejection_draw(Density&& p, double& bound, double hard_bound, int dim, RngStream& rng, ProjectionStats& stats,
                   double safety = 1.2) {
  return rejection_draw(std::forward<Density>(p), bound, hard_bound, dim, rng, stats, safety,
                        [](const Vec&) { return std::numeric_limits<double>::infinity(); });
}

namespace detail {

// e^{2 pi i k x} for k = lo..hi, re-anchored periodically.
inline void exp_table(double x, int lo, int hi, std::vector<std::complex<double>>& out) {
  const double theta = 2.0 * std::numbers::pi * x;
  out.resize(static_cast<std::size_t>(hi - lo + 1));
  const std::complex<double> step = std::polar(1.0, theta);
  for (int k = lo; k <= hi; ++k) {
    const std::size_t j = static_cast<std::size_t>(k - lo);
    out[j] = (j % 32 == 0) ? std::polar(1.0, k * theta) : out[j - 1] * step;
  }
}

}  // namespace detail

// Algorithm 1 for the Fourier projection kernel K(x,y) = sum_l e^{2 pi i k_l.(x-y)}
// on S = [-1/2,1/2]^d, with Gram-Schmidt on the vectors v(x).
class ProjectionSampler {
 public:
  ProjectionSampler(const ProjectionBasis& basis, ProjectionOptions opts = {})
      : basis_(basis), opts_(std::move(opts)), dim_(basis.dim), n_(basis.size()) {
    for (int q = 0; q < 2; ++q) {
      lo_[q] = 0;
      hi_[q] = 0;
    }
    for (const auto& k : basis_.indices)
      for (int q = 0; q < dim_; ++q) {
        lo_[q] = std::min(lo_[q], k[q]);
        hi_[q] = std::max(hi_[q], k[q]);
      }
  }

  std::vector<Vec> sample(RngStream& rng) {
    std::vector<Vec> pts;
    if (n_ == 0) return pts;
    const Eigen::Index n = static_cast<Eigen::Index>(n_);
    E_.setZero(n, n);
    pts.reserve(n_);

    if (opts_.bound == BoundMode::Uniform) init_grid();
    else init_local();

    Eigen::VectorXcd v(n), w(n);
    for (std::size_t j = 0; j < n_; ++j) {
      const std::size_t i = n_ - j;  // density p_i
      const double hard = static_cast<double>(n_) / static_cast<double>(i);
      Vec x;
      double wn = 0.0;
      for (int retry = 0;; ++retry) {
        if (j == 0) {
          x = Vec{rng.uniform() - 0.5, dim_ == 2 ? rng.uniform() - 0.5 : 0.0};
          ++stats_.proposals;
        } else {
          auto dens = [&](const Vec& y) { return density(y, j, i); };
          double bound;
          if (opts_.bound == BoundMode::Uniform) {
            bound = std::min(hard, opts_.safety * std::max(grid_max_density(i), 1.0));
            x = rejection_draw(dens, bound, hard, dim_, rng, stats_, opts_.safety,
                               [](const Vec&) { return std::numeric_limits<double>::infinity(); }, opts_.log);
          } else {
            bound = hard;
            x = rejection_draw(dens, bound, hard, dim_, rng, stats_, opts_.safety,
                               [&](const Vec& y) { return local_bound(y, pts, i); }, opts_.log);
          }
        }
        fill_v(x, v);
        w = v;
        if (j > 0) {
          // two passes of classical Gram-Schmidt
          for (int pass = 0; pass < 2; ++pass) w -= E_.leftCols(j) * (E_.leftCols(j).adjoint() * w);
        }
        wn = w.norm();
        if (wn >= 1e-12) break;
        ++stats_.breakdown_retries;
        if (retry >= 1) fail(ErrorKind::NumericalBreakdown, "Gram-Schmidt vector norm below 1e-12");
      }
      E_.col(static_cast<Eigen::Index>(j)) = w / wn;
      pts.push_back(x);
      if (opts_.bound == BoundMode::Uniform && j + 1 < n_) update_grid(static_cast<Eigen::Index>(j));
    }
    return pts;
  }

  // p_i(x) = (n - sum_{first j vectors} |e^* v(x)|^2) / i
  double density(const Vec& x, std::size_t j, std::size_t i) {
    fill_v(x, vtmp_);
    double s = 0.0;
    if (j > 0) s = (E_.leftCols(static_cast<Eigen::Index>(j)).adjoint() * vtmp_).squaredNorm();
    return std::max(static_cast<double>(n_) - s, 0.0) / static_cast<double>(i);
  }

  // Upper bound (n/i)(1 - max_k (1 - 2 pi a_k/n)_+), a_k^2 = u^T Q u with
  // u = x - x_k and Q = n sum k k^T - s s^T; reduces to the one-axis bound for d = 1.
  double local_bound(const Vec& x, const std::vector<Vec>& pts, std::size_t i) const {
    const double n = static_cast<double>(n_);
    double best = 0.0;
    for (const Vec& p : pts) {
      double u0 = x[0] - p[0], u1 = dim_ == 2 ? x[1] - p[1] : 0.0;
      u0 -= std::round(u0);
      u1 -= std::round(u1);
      const double a2 = Q_[0] * u0 * u0 + 2.0 * Q_[1] * u0 * u1 + Q_[2] * u1 * u1;
      best = std::max(best, 1.0 - 2.0 * std::numbers::pi * std::sqrt(std::max(a2, 0.0)) / n);
    }
    return n / static_cast<double>(i) * (1.0 - best);
  }

  const ProjectionStats& stats() const { return stats_; }
  const Eigen::MatrixXcd& vectors() const { return E_; }

 private:
  void fill_v(const Vec& x, Eigen::VectorXcd& v) {
    detail::exp_table(x[0], lo_[0], hi_[0], t0_);
    if (dim_ == 2) detail::exp_table(x[1], lo_[1], hi_[1], t1_);
    v.resize(static_cast<Eigen::Index>(n_));
    for (std::size_t l = 0; l < n_; ++l) {
      const auto& k = basis_.indices[l];
      std::complex<double> e = t0_[static_cast<std::size_t>(k[0] - lo_[0])];
      if (dim_ == 2) e *= t1_[static_cast<std::size_t>(k[1] - lo_[1])];
      v[static_cast<Eigen::Index>(l)] = e;
    }
  }

  void init_grid() {
    int g = opts_.min_grid;
    const double per_axis = dim_ == 2 ? std::sqrt(static_cast<double>(n_)) : static_cast<double>(n_);
    while (g < 4.0 * per_axis) g *= 2;
    grid_ = g;
    acc_.assign(static_cast<std::size_t>(g) * (dim_ == 2 ? g : 1), 0.0);
  }

  // adds |e_j^* v(x_g)|^2 on the grid x_g = -1/2 + g/G by one FFT
  void update_grid(Eigen::Index j) {
    const int g = grid_;
    const int g1 = dim_ == 2 ? g : 1;
    buf_.assign(static_cast<std::size_t>(g) * g1, 0.0);
    for (std::size_t l = 0; l < n_; ++l) {
      const auto& k = basis_.indices[l];
      const int ksum = k[0] + (dim_ == 2 ? k[1] : 0);
      std::complex<double> c = std::conj(E_(static_cast<Eigen::Index>(l), j));
      if (ksum & 1) c = -c;
      const int i0 = ((k[0] % g) + g) % g;
      const int i1 = dim_ == 2 ? ((k[1] % g) + g) % g : 0;
      buf_[static_cast<std::size_t>(i0) * g1 + i1] += c;
    }
    fft_backward_inplace(buf_, g, g1);
    for (std::size_t t = 0; t < acc_.size(); ++t) acc_[t] += std::norm(buf_[t]);
  }

  double grid_max_density(std::size_t i) const {
    double lowest = std::numeric_limits<double>::infinity();
    for (double a : acc_) lowest = std::min(lowest, a);
    return std::max(static_cast<double>(n_) - lowest, 0.0) / static_cast<double>(i);
  }

  void init_local() {
    const double n = static_cast<double>(n_);
    double s0 = 0, s1 = 0, q00 = 0, q01 = 0, q11 = 0;
    for (const auto& k : basis_.indices) {
      s0 += k[0];
      q00 += static_cast<double>(k[0]) * k[0];
      if (dim_ == 2) {
        s1 += k[1];
        q01 += static_cast<double>(k[0]) * k[1];
        q11 += static_cast<double>(k[1]) * k[1];
      }
    }
    Q_ = {n * q00 - s0 * s0, n * q01 - s0 * s1, n * q11 - s1 * s1};
  }

  ProjectionBasis basis_;
  ProjectionOptions opts_;
  int dim_;
  std::size_t n_;
  std::array<int, 2> lo_{}, hi_{};
  Eigen::MatrixXcd E_;
  Eigen::VectorXcd vtmp_;
  std::vector<std::complex<double>> t0_, t1_, buf_;
  std::vector<double> acc_;
  int grid_ = 64;
  std::array<double, 3> Q_{};
  ProjectionStats stats_;
};

inline std::vector<Vec> sample_projection(const ProjectionBasis& basis, RngStream& rng, ProjectionOptions opts = {},
                                          ProjectionStats* stats = nullptr) {
  ProjectionSampler s(basis, std::move(opts));
  auto pts = s.sample(rng);
  if (stats) *stats = s.stats();
  return pts;
}

struct SimulationOptions {
  WindowMethod method = WindowMethod::Periodic;
  int N = 0;  // 0 picks N automatically, doubling from 64
  int N_max = 1024;
  ProjectionOptions projection;
};

// Doubles N from 64 until the lattice carries 99% of the expected mass.
inline SpectralLattice simulation_lattice(const KernelModel& model, const Window& window, WindowMethod method,
                                          int N = 0, int N_max = 1024) {
  if (N > 0) return build_lattice(model, window, N, LatticeMode::Simulate, method);
  int n = 64;
  for (;;) {
    auto L = build_lattice(model, window, n, LatticeMode::Simulate, method);
    const double target = lattice_target_mass(model, L);
    if (target == 0.0 || truncated_mass(L) >= 0.99 * target || n >= N_max) return L;
    n *= 2;
  }
}

// Reusable simulator: the lattice is built once for many replicates.
class Simulator {
 public:
  Simulator(const KernelModel& model, const Window& window, SimulationOptions opts = {})
      : model_(model), window_(window), opts_(std::move(opts)) {
    require_valid(model);
    lattice_ = simulation_lattice(model, window, opts_.method, opts_.N, opts_.N_max);
    selector_ = std::make_shared<const BernoulliSelector>(lattice_);
  }

  PointPattern operator()(RngStream& rng, ProjectionStats* stats = nullptr) const {
    PointPattern out{window_, {}, {}};
    if (model_.rho == 0.0) return out;
    const ProjectionBasis basis = (*selector_)(rng);
    const auto pts = sample_projection(basis, rng, opts_.projection, stats);
    const double keep = opts_.method == WindowMethod::Border ? 0.25 : 0.5;
    for (const Vec& y : pts) {
      if (std::abs(y[0]) > keep || (lattice_.dim == 2 && std::abs(y[1]) > keep)) continue;
      Vec x = lattice_.window_map.inverse(y);
      // guard against round-off at the window edge
      for (int q = 0; q < window_.dim; ++q) x[q] = std::clamp(x[q], window_.lo[q], window_.hi[q]);
      out.points.push_back(x);
    }
    return out;
  }

  const SpectralLattice& lattice() const { return lattice_; }
  const KernelModel& model() const { return model_; }
  const Window& window() const { return window_; }
  WindowMethod method() const { return opts_.method; }

 private:
  KernelModel model_;
  Window window_;
  SimulationOptions opts_;
  SpectralLattice lattice_;
  std::shared_ptr<const BernoulliSelector> selector_;
};

inline PointPattern simulate(const KernelModel& model, const Window& window, RngStream& rng,
                             WindowMethod method = WindowMethod::Periodic, int N = 0) {
  SimulationOptions o;
  o.method = method;
  o.N = N;
  return Simulator(model, window, o)(rng);
}

// Independent thinning; the result is a DPP with kernel sqrt(p) C sqrt(p).
inline PointPattern thin(const PointPattern& pattern, const std::function<double(const Vec&)>& retention,
                         RngStream& rng) {
  PointPattern out{pattern.window, {}, {}};
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const double p = retention(pattern.points[i]);
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Domain, "retention probability outside [0,1]");
    if (rng.uniform() < p) {
      out.points.push_back(pattern.points[i]);
      if (pattern.marked()) out.marks.push_back(pattern.marks[i]);
    }
  }
  return out;
}

// Pointwise image under a bijection T with inverse and Jacobian determinant.
// The image of DPP(C) has kernel |J_{T^-1}(x)|^{1/2} C(T^-1 x, T^-1 y) |J_{T^-1}(y)|^{1/2}.
struct PointMap {
  std::function<Vec(const Vec&)> forward;
  std::function<Vec(const Vec&)> inverse;
  std::function<double(const Vec&)> jacobian;  // det DT at x
  Window image;                                 // T(window)

  static PointMap affine(const AffineMap& A, const Window& domain) {
    return {[A](const Vec& x) { return A.apply(x); }, [A](const Vec& y) { return A.inverse(y); },
            [A](const Vec&) { return A.jacobian(); }, A.apply(domain)};
  }
};

inline PointPattern transform(const PointPattern& pattern, const PointMap& T) {
  PointPattern out{T.image, {}, pattern.marks};
  out.points.reserve(pattern.size());
  for (const Vec& x : pattern.points) {
    const double J = T.jacobian(x);
    if (!(std::abs(J) > 0.0) || !std::isfinite(J)) fail(ErrorKind::NonInvertibleMap, "zero Jacobian determinant");
    const Vec y = T.forward(x);
    const Vec back = T.inverse(y);
    const double scale = 1.0 + std::abs(x[0]) + std::abs(x[1]);
    if (norm(Vec{back[0] - x[0], back[1] - x[1]}, pattern.dim()) > 1e-9 * scale)
      fail(ErrorKind::NonInvertibleMap, "supplied inverse does not invert the map");
    out.points.push_back(y);
  }
  return out;
}

}  // namespace dpp
