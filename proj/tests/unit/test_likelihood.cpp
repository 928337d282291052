#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpp/likelihood.hpp"
#include "dpp/random.hpp"
#include "dpp/sampler.hpp"
#include "dpp/special.hpp"

using namespace dpp;

namespace {

constexpr double kPi = std::numbers::pi;

PointPattern uniform_pattern(const Window& W, int n, std::uint64_t seed) {
  RngStream rng(seed);
  PointPattern p{W, {}, {}};
  for (int i = 0; i < n; ++i) p.points.push_back(Vec{W.lo[0] + W.side(0) * rng.uniform(), W.lo[1] + W.side(1) * rng.uniform()});
  return p;
}

Vec sub(const Vec& a, const Vec& b) { return Vec{a[0] - b[0], a[1] - b[1]}; }

double naive_c_tilde(const SpectralLattice& L, const Vec& u) {
  double s = 0.0;
  L.for_each([&](int k1, int k2, double v) { s += v / (1 - v) * std::cos(2 * kPi * (k1 * u[0] + k2 * u[1])); });
  return s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // nothing thrown; never expected below
}

}  // namespace

TEST(PeriodicDensity, EmptyPatternIsVolumeMinusD) {
  const auto m = KernelModel::gaussian(100, 0.04);
  for (const Window& W : {Window::unit(), Window::rect(0, 2, 0, 1.5)}) {
    const PointPattern empty{W, {}, {}};
    const auto L = build_lattice(m, W, 512, LatticeMode::Likelihood);
    EXPECT_NEAR(log_density_periodic(m, empty), W.volume() - log_det_normalizer(L), 1e-12);
  }
}

TEST(PeriodicDensity, OneAndTwoPoints) {
  const auto m = KernelModel::whittle_matern(60, 0.03, 1.0);
  const Window W = Window::rect(0, 2, 0, 1);
  const auto L = build_lattice(m, W, 200, LatticeMode::Likelihood);
  const double D = log_det_normalizer(L), c0 = naive_c_tilde(L, Vec{0, 0});
  const PointPattern one{W, {{0.3, 0.4}}, {}};
  // N = 200 keeps the exact cosine-sum path
  EXPECT_FALSE(log_density_periodic_terms(m, one, 200).grid);
  EXPECT_NEAR(log_density_periodic(m, one, 200), 2.0 - std::log(2.0) - D + std::log(c0), 1e-9);
  const PointPattern two{W, {{0.3, 0.4}, {0.35, 0.42}}, {}};
  const double c1 = naive_c_tilde(L, sub(L.window_map.apply(Vec{0.3, 0.4}), L.window_map.apply(Vec{0.35, 0.42})));
  EXPECT_NEAR(log_density_periodic(m, two, 200), 2.0 - 2 * std::log(2.0) - D + std::log(c0 * c0 - c1 * c1), 1e-9);
}

TEST(PeriodicDensity, RejectsBadInput) {
  const auto m = KernelModel::gaussian(100, 0.04);
  const PointPattern dup{Window::unit(), {{0.1, 0.2}, {0.5, 0.5}, {0.1, 0.2}}, {}};
  EXPECT_EQ(kind_of([&] { log_density_periodic(m, dup); }), ErrorKind::NonPositiveDefinite);
  const PointPattern outside{Window::unit(), {{1.5, 0.2}}, {}};
  EXPECT_EQ(kind_of([&] { log_density_periodic(m, outside); }), ErrorKind::Domain);
  const PointPattern none{Window::unit(), {}, {}};
  EXPECT_EQ(kind_of([&] { log_density_periodic(KernelModel::gaussian(1 / (kPi * 0.04 * 0.04), 0.04), none); }),
            ErrorKind::NonStrictEigenvalue);
}

TEST(PeriodicDensity, InvariantUnderTorusShiftAndRelabel) {
  const auto m = KernelModel::gaussian(100, 0.04);
  RngStream rng(3);
  const auto x = simulate(m, Window::unit(), rng);
  auto y = x;
  for (auto& p : y.points) {
    p[0] = std::fmod(p[0] + 0.37, 1.0);
    p[1] = std::fmod(p[1] + 0.81, 1.0);
  }
  std::reverse(y.points.begin(), y.points.end());
  const double a = log_density_periodic(m, x), b = log_density_periodic(m, y);
  EXPECT_NEAR(a, b, 1e-9 * std::abs(a));
}

TEST(PeriodicDensity, GridPathAgreesWithDirectSum) {
  // a wide window forces the lattice past the direct-sum limit
  const auto m = KernelModel::gaussian(100, 0.01);
  const auto x = uniform_pattern(Window::rect(0, 4, 0, 1), 30, 5);
  const auto big = log_density_periodic_terms(m, x, 512);
  EXPECT_TRUE(big.grid);
  const auto L = build_lattice(m, x.window, 512, LatticeMode::Likelihood);
  Eigen::MatrixXd G(30, 30);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      G(i, j) = naive_c_tilde(L, sub(L.window_map.apply(x.points[i]), L.window_map.apply(x.points[j])));
  const double ref = 4.0 - 30 * std::log(4.0) - log_det_normalizer(L) + std::log(G.determinant());
  EXPECT_NEAR(big.value, ref, 1e-6 * std::abs(ref));
}

TEST(PeriodicDensity, LocalStabilityAndMonotoneConditionalIntensity) {
  // log f(x u {u}) - log f(x) + log|R| = log of a Schur complement, bounded by
  // log c~(0) and decreasing along nested patterns
  const auto m = KernelModel::gaussian(80, 0.04);
  const auto L = build_lattice(m, Window::unit(), 512, LatticeMode::Likelihood);
  const double c0 = naive_c_tilde(L, Vec{0, 0});
  RngStream rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto y = uniform_pattern(Window::unit(), 6, 100 + trial);
    PointPattern x = y;
    x.points.resize(3);
    const Vec u{rng.uniform(), rng.uniform()};
    auto with_u = [&](PointPattern p) {
      p.points.push_back(u);
      return p;
    };
    const double gx = log_density_periodic(m, with_u(x)) - log_density_periodic(m, x);
    const double gy = log_density_periodic(m, with_u(y)) - log_density_periodic(m, y);
    EXPECT_LE(gx, std::log(c0) + 1e-10);
    EXPECT_LE(gy, gx + 1e-10);
  }
}

TEST(Convolution, FirstPowerIsTheKernel) {
  for (const auto& m : {KernelModel::gaussian(100, 0.04), KernelModel::whittle_matern(100, 0.02, 0.7),
                        KernelModel::whittle_matern(50, 0.03, 2.5, 1)}) {
    const double ratio = m.rho / rho_max(m);
    for (double r : {0.0, 0.01, 0.05, 0.1})
      EXPECT_NEAR(ratio * convolution_power(m, 1, r), kernel_value_radial(m, r), 1e-10 * m.rho) << describe(m) << r;
  }
}

TEST(Convolution, SecondPowerMatchesFourierInversion) {
  // the Fourier transform of the k-th power is (phi / phi(0))^k; invert radially in the plane
  const auto m = KernelModel::whittle_matern(100, 0.02, 1.0);
  const double phi0 = spectral_density_radial(m, 0.0);
  for (double r : {0.0, 0.02, 0.05}) {
    auto f = [&](double w) {
      const double p = spectral_density_radial(m, w) / phi0;
      return 2 * kPi * w * bessel_j0(2 * kPi * r * w) * p * p;
    };
    double ref = 0.0;
    const double step = 10.0;
    for (double w = 0; w < 1000; w += step) ref += integrate(f, w, w + step, 1e-10);
    EXPECT_NEAR(convolution_power(m, 2, r), ref, 1e-6 * convolution_power(m, 2, 0.0)) << r;
  }
}

TEST(Convolution, AgreesWithPeriodicAwayFromEdges) {
  const auto m = KernelModel::gaussian(100, 0.03);
  auto x = uniform_pattern(Window::rect(0.3, 0.7, 0.3, 0.7), 12, 2);
  x.window = Window::unit();
  const auto L = build_lattice(m, Window::unit(), 512, LatticeMode::Likelihood);
  const int K = convolution_terms(m, 0);
  EXPECT_NEAR(D_convolution(m, 1.0, K), log_det_normalizer(L), 1e-9 * log_det_normalizer(L));
  EXPECT_NEAR(log_density_convolution(m, x), log_density_periodic(m, x), 1e-6);
  EXPECT_EQ(kind_of([&] { log_density_convolution(KernelModel::cauchy(50, 0.02, 1.0), x); }),
            ErrorKind::UnsupportedFamily);
}

TEST(Fit, MatchesProfileGridMaximum) {
  RngStream rng(21);
  const auto x = simulate(KernelModel::gaussian(150, 0.03), Window::unit(), rng);
  const auto fit = fit_mle(Family::Gaussian, x);
  EXPECT_EQ(fit.method, FitMethod::MlePeriodic);
  EXPECT_EQ(fit.rho_source, RhoSource::Empirical);
  EXPECT_DOUBLE_EQ(fit.model.rho, x.intensity());
  const double amax = alpha_max(Family::Gaussian, x.intensity(), 1.0);
  const int G = 50;
  const double h = 0.999 * amax / G;
  double best_a = 0.0, best_v = -1e300;
  for (int i = 1; i <= G; ++i) {
    const double v = log_density_periodic(KernelModel::gaussian(x.intensity(), i * h), x, fit.N_used);
    if (v > best_v) {
      best_v = v;
      best_a = i * h;
    }
  }
  EXPECT_NEAR(fit.model.a(), best_a, h);
  EXPECT_GE(fit.objective, best_v - 1e-9);

  FitOptions o;
  o.fit_rho = true;
  const auto both = fit_mle(Family::Gaussian, x, o);
  EXPECT_EQ(both.free_parameters, 2);
  EXPECT_EQ(both.rho_source, RhoSource::Mle);
  EXPECT_NEAR(both.model.rho / x.intensity(), 1.0, 0.05);
  EXPECT_GE(both.objective, fit.objective - 1e-6);
}

TEST(Fit, RecoversScaleOnAverage) {
  const auto truth = KernelModel::gaussian(150, 0.03);
  const Simulator sim(truth, Window::unit());
  RngStream rng(22);
  const int reps = 6;
  double s = 0.0;
  for (int r = 0; r < reps; ++r) {
    RngStream sub = rng.substream(r);
    s += fit_mle(Family::Gaussian, sim(sub)).model.a();
  }
  EXPECT_NEAR(s / reps, 0.03, 0.005);
}

TEST(Fit, ErrorsAndComparison) {
  const PointPattern empty{Window::unit(), {}, {}};
  EXPECT_EQ(kind_of([&] { fit_mle(Family::Gaussian, empty); }), ErrorKind::EmptyPattern);

  RngStream rng(4);
  const auto x = simulate(KernelModel::gaussian(100, 0.04), Window::unit(), rng);
  FitOptions o;
  o.nu_fixed = 1.0;
  const auto g = fit_mle(Family::Gaussian, x);
  const auto c = fit_mle(Family::Cauchy, x, o);
  const auto order = compare_models({c, g});
  ASSERT_EQ(order.size(), 2u);
  EXPECT_GE((order[0] == 0 ? c : g).objective, (order[0] == 0 ? g : c).objective);

  FitResult mce = g;
  mce.method = FitMethod::MceK;
  EXPECT_EQ(kind_of([&] { compare_models({g, mce}); }), ErrorKind::MixedMethods);
  FitOptions conv;
  conv.use_convolution = true;
  const auto gc = fit_mle(Family::Gaussian, x, conv);
  EXPECT_EQ(gc.method, FitMethod::MleConvolution);
  EXPECT_NEAR(gc.model.a(), g.model.a(), 0.003);
  EXPECT_EQ(kind_of([&] { compare_models({g, gc}); }), ErrorKind::MixedMethods);
}
