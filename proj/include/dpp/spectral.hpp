#pragma once

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpp/error.hpp"
#include "dpp/fft.hpp"
#include "dpp/model.hpp"
#include "dpp/special.hpp"
#include "dpp/window.hpp"

namespace dpp {

enum class LatticeMode { Simulate, Likelihood };
enum class WindowMethod { Periodic, Border };

inline const char* method_name(WindowMethod m) { return m == WindowMethod::Periodic ? "periodic" : "border"; }

// Truncated grid of phi_Y(k) = phi(A^T k), k in {-N..N}^d. Entries whose
// value is below kLatticeCutoff * phi(0) for a radially nonincreasing phi are
// not stored: only the box {-M..M} (M <= N per axis) is kept and the rest is
// treated as exactly zero.
struct SpectralLattice {
  int N = 0;
  int dim = 2;
  std::array<int, 2> M{0, 0};
  AffineMap window_map;
  WindowMethod method = WindowMethod::Periodic;
  LatticeMode mode = LatticeMode::Simulate;
  std::vector<double> phi;
  double origin_value = 0.0;

  int width(int axis) const { return 2 * M[axis] + 1; }
  std::size_t index(int k1, int k2) const {
    return dim == 1 ? static_cast<std::size_t>(k1 + M[0])
                    : static_cast<std::size_t>(k1 + M[0]) * width(1) + static_cast<std::size_t>(k2 + M[1]);
  }
  double at(int k1, int k2 = 0) const {
    if (std::abs(k1) > M[0] || (dim == 2 && std::abs(k2) > M[1])) return 0.0;
    return phi[index(k1, dim == 2 ? k2 : 0)];
  }
  // calls f(k1, k2, value) for every stored entry
  template <class F>
  void for_each(F&& f) const {
    if (dim == 1) {
      for (int k1 = -M[0]; k1 <= M[0]; ++k1) f(k1, 0, phi[index(k1, 0)]);
      return;
    }
    for (int k1 = -M[0]; k1 <= M[0]; ++k1)
      for (int k2 = -M[1]; k2 <= M[1]; ++k2) f(k1, k2, phi[index(k1, k2)]);
  }
  double max_value() const {
    double m = 0.0;
    for (double v : phi) m = std::max(m, v);
    return m;
  }
};

inline constexpr double kLatticeCutoff = 1e-17;

inline SpectralLattice build_lattice(const KernelModel& model, const Window& window, int N,
                                     LatticeMode mode = LatticeMode::Simulate,
                                     WindowMethod method = WindowMethod::Periodic) {
  auto v = validate(model);
  if (!v.ok) fail(ErrorKind::InvalidModel, v.message);
  if (N < 0) fail(ErrorKind::Domain, "truncation order N must be >= 0");
  window.check();
  if (window.dim != model.dim) fail(ErrorKind::Domain, "window and model dimensions differ");

  SpectralLattice L;
  L.N = N;
  L.dim = model.dim;
  L.mode = mode;
  L.method = method;
  L.window_map = map_to_centred(window, method == WindowMethod::Periodic ? 1.0 : 0.5);
  const Vec a = L.window_map.scale;

  const double cutoff = spectral_cutoff(model, kLatticeCutoff);
  for (int i = 0; i < 2; ++i) {
    if (i >= L.dim) { L.M[i] = 0; continue; }
    const double m = std::isfinite(cutoff) ? std::ceil(cutoff / a[i]) : static_cast<double>(N);
    L.M[i] = static_cast<int>(std::min<double>(N, m));
  }
  L.phi.assign(static_cast<std::size_t>(L.width(0)) * (L.dim == 2 ? L.width(1) : 1), 0.0);

  // isotropic phi: fill one quadrant and mirror
  for (int k1 = 0; k1 <= L.M[0]; ++k1)
    for (int k2 = 0; k2 <= (L.dim == 2 ? L.M[1] : 0); ++k2) {
      double f = spectral_density(model, Vec{k1 * a[0], k2 * a[1]});
      if (mode == LatticeMode::Simulate && f > 1.0) f = 1.0;  // round-off at rho = rho_max
      for (int s1 : {-1, 1})
        for (int s2 : {-1, 1}) {
          if ((k1 == 0 && s1 < 0) || (k2 == 0 && s2 < 0)) continue;
          L.phi[L.index(s1 * k1, s2 * k2)] = f;
        }
    }
  L.origin_value = L.at(0, 0);
  if (mode == LatticeMode::Likelihood && L.max_value() >= 1.0)
    fail(ErrorKind::NonStrictEigenvalue, "spectral lattice has an eigenvalue equal to 1; "
                                         "likelihood needs rho < rho_max");
  return L;
}

// S_N = sum of phi over the lattice.
inline double truncated_mass(const SpectralLattice& L) {
  CompensatedSum s;
  for (double v : L.phi) s.add(v);
  return s.value();
}

// Expected mass of the untruncated lattice: intensity of Y times |S|.
inline double lattice_target_mass(const KernelModel& model, const SpectralLattice& L) {
  return model.rho / std::abs(L.window_map.jacobian());
}

inline double phi_tilde(double phi) { return phi / (1.0 - phi); }

// D_N = -sum log(1 - phi).
inline double log_det_normalizer(const SpectralLattice& L) {
  CompensatedSum s;
  for (double v : L.phi) {
    if (v >= 1.0) fail(ErrorKind::NonStrictEigenvalue, "D_N needs all eigenvalues < 1");
    s.add(-std::log1p(-v));
  }
  return s.value();
}

// Sum of w(k) cos(2 pi k.u) for weights w even in each coordinate, folded to
// the quadrant k >= 0. Batch evaluation reduces to one matrix product.
class CosineSum {
 public:
  enum class Weights { Phi, PhiTilde };

  CosineSum(const SpectralLattice& L, Weights which) : dim_(L.dim), m1_(L.M[0]), m2_(L.dim == 2 ? L.M[1] : 0) {
    W_.resize(m1_ + 1, m2_ + 1);
    for (int k1 = 0; k1 <= m1_; ++k1)
      for (int k2 = 0; k2 <= m2_; ++k2) {
        double v = L.at(k1, k2);
        if (which == Weights::PhiTilde) {
          if (v >= 1.0) fail(ErrorKind::NonStrictEigenvalue, "C-tilde needs all eigenvalues < 1");
          v = phi_tilde(v);
        }
        W_(k1, k2) = (k1 == 0 ? 1.0 : 2.0) * (k2 == 0 ? 1.0 : 2.0) * v;
      }
    CompensatedSum s;
    for (int k1 = 0; k1 <= m1_; ++k1)
      for (int k2 = 0; k2 <= m2_; ++k2) s.add(W_(k1, k2));
    at_zero_ = s.value();
  }

  double at_zero() const { return at_zero_; }

  double operator()(const Vec& u) const {
    std::vector<Vec> one{u};
    return evaluate(one)[0];
  }

  Eigen::VectorXd evaluate(const std::vector<Vec>& us) const {
    const Eigen::Index P = static_cast<Eigen::Index>(us.size());
    Eigen::VectorXd out(P);
    constexpr Eigen::Index block = 2048;
    Eigen::MatrixXd cx, cy;
    for (Eigen::Index start = 0; start < P; start += block) {
      const Eigen::Index b = std::min(block, P - start);
      fill_cos(us, start, b, 0, m1_, cx);
      if (dim_ == 1) {
        out.segment(start, b) = cx * W_.col(0);
      } else {
        fill_cos(us, start, b, 1, m2_, cy);
        out.segment(start, b) = (cx * W_).cwiseProduct(cy).rowwise().sum();
      }
    }
    for (Eigen::Index p = 0; p < P; ++p)
      if (us[p][0] == 0.0 && (dim_ == 1 || us[p][1] == 0.0)) out[p] = at_zero_;
    return out;
  }

 private:
  // cos(2 pi k u) for k = 0..m via the Chebyshev recurrence. Every 64 steps
  // both terms of the pair are recomputed; anchoring only one of them makes
  // the error grow geometrically from block to block.
  static void fill_cos(const std::vector<Vec>& us, Eigen::Index start, Eigen::Index b, int axis, int m,
                       Eigen::MatrixXd& c) {
    c.resize(b, m + 1);
    for (Eigen::Index p = 0; p < b; ++p) {
      const double theta = 2.0 * std::numbers::pi * us[start + p][axis];
      const double two_cos = 2.0 * std::cos(theta);
      c(p, 0) = 1.0;
      if (m >= 1) c(p, 1) = std::cos(theta);
      for (int k = 2; k <= m; ++k) {
        if (k % 64 <= 1)
          c(p, k) = std::cos(k * theta);
        else
          c(p, k) = two_cos * c(p, k - 1) - c(p, k - 2);
      }
    }
  }

  int dim_;
  int m1_, m2_;
  Eigen::MatrixXd W_;
  double at_zero_ = 0.0;
};

// C-tilde_N(u) = sum phi~(k) e^{2 pi i k.u}.
inline double c_tilde_direct(const SpectralLattice& L, const Vec& u) {
  return CosineSum(L, CosineSum::Weights::PhiTilde)(u);
}

// C-tilde_N on the grid u = j/m, j in {0..m-1}^d, by one FFT of phi~.
class CTildeGrid {
 public:
  CTildeGrid(const SpectralLattice& L, int m) : dim_(L.dim), m_(m) {
    const int need = 2 * std::max(L.M[0], L.dim == 2 ? L.M[1] : 0) + 1;
    if (m < need)
      fail(ErrorKind::GridTooCoarse, "grid size " + std::to_string(m) + " below 2N+1 = " + std::to_string(need));
    const int n1 = dim_ == 2 ? m : 1;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(m) * n1, 0.0);
    L.for_each([&](int k1, int k2, double v) {
      if (v >= 1.0) fail(ErrorKind::NonStrictEigenvalue, "C-tilde needs all eigenvalues < 1");
      const int i1 = ((k1 % m) + m) % m;
      const int i2 = dim_ == 2 ? ((k2 % m) + m) % m : 0;
      buf[static_cast<std::size_t>(i1) * n1 + i2] += phi_tilde(v);
    });
    fft_backward_inplace(buf, m, n1);
    values_.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) values_[i] = buf[i].real();
  }

  int size() const { return m_; }
  double at_index(int j1, int j2 = 0) const {
    return values_[static_cast<std::size_t>(j1) * (dim_ == 2 ? m_ : 1) + (dim_ == 2 ? j2 : 0)];
  }
  // nearest grid value; C-tilde_N has period 1 in every coordinate
  double lookup(const Vec& u) const {
    auto idx = [&](double x) {
      long j = std::lround(x * m_) % m_;
      if (j < 0) j += m_;
      return static_cast<int>(j);
    };
    return at_index(idx(u[0]), dim_ == 2 ? idx(u[1]) : 0);
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int dim_;
  int m_;
  std::vector<double> values_;
};

inline CTildeGrid c_tilde_grid(const SpectralLattice& L, int m) { return CTildeGrid(L, m); }

// C_app^per(x, y) = sum phi(k) e^{2 pi i k.(x - y)} on S.
inline double periodic_kernel(const SpectralLattice& L, const Vec& x, const Vec& y) {
  return CosineSum(L, CosineSum::Weights::Phi)(Vec{x[0] - y[0], x[1] - y[1]});
}

// Upper bound on int_S |C0 - C_app,0|^2 for the Whittle-Matern kernel.
inline double wm_error_bound(double rho, double nu, double alpha, int d) {
  const double pi = std::numbers::pi;
  const double g = std::pow(std::tgamma(1.0 + 2.0 * nu), 1.0 / (2.0 * nu));
  const double beta = 1.0 / (alpha * std::sqrt(static_cast<double>(d)) * std::max(g, 1.0));
  double c;
  if (nu <= 0.5)
    c = std::pow(4.0 * alpha, 1.0 - 2.0 * nu) * rho * rho * pi * d / std::pow(std::tgamma(nu), 2);
  else
    c = 4.0 * nu * nu * rho * rho * d;
  const double q = std::exp(-beta);
  const double om = -std::expm1(-beta);  // 1 - e^{-beta}
  double eps;
  if (d == 1) {
    eps = q / beta + 2.0 * q / om * (q / beta + 1.0 / om - 1.0);
  } else {
    const double first = q * (1.0 / beta + 2.0 / (om * om) - 0.5);
    const double second = 1.0 / beta + 2.0 * q / om * (1.0 / beta + 1.0 / om);
    eps = first * std::pow(second, d - 1);
  }
  return c * eps;
}

// Debug dump: one row per stored lattice entry.
inline void write_lattice_csv(const SpectralLattice& L, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write lattice dump " + path);
  out.precision(17);
  out << (L.dim == 2 ? "k1,k2,phi\n" : "k1,phi\n");
  L.for_each([&](int k1, int k2, double v) {
    out << k1 << ',';
    if (L.dim == 2) out << k2 << ',';
    out << v << '\n';
  });
}

}  // namespace dpp
