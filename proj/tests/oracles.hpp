#pragma once

// Independent reference computations used by the tests. Nothing in here calls
// into the library's numeric kernels.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// I_nu(z) by direct power series in long double. Fine for z up to ~700.
inline long double bessel_i_series(int nu, long double z) {
  const long double half = z / 2.0L;
  long double term = std::pow(half, static_cast<long double>(nu)) / std::tgamma(static_cast<long double>(nu) + 1.0L);
  long double sum = term;
  const int cap = 5000 + static_cast<int>(2.0L * z);
  for (int k = 1; k < cap; ++k) {
    term *= half * half / (static_cast<long double>(k) * static_cast<long double>(k + nu));
    sum += term;
    if (term < sum * 1e-21L && k > z) break;
  }
  return sum;
}

inline double log_bessel_i_series(int nu, double z) {
  return static_cast<double>(std::log(bessel_i_series(nu, z)));
}

/// ln I_nu(z): the power series below z = 2000, the large-argument
/// expansion above it (terms fall below 1e-25 within a dozen steps there).
inline long double log_bessel_i(int nu, long double z) {
  if (z < 2000.0L) return std::log(bessel_i_series(nu, z));
  const long double m = 4.0L * nu * nu;
  long double term = 1.0L, sum = 1.0L;
  for (int k = 1; k < 40; ++k) {
    term *= -(m - (2.0L * k - 1.0L) * (2.0L * k - 1.0L)) / (k * 8.0L * z);
    sum += term;
    if (std::abs(term) < 1e-25L) break;
  }
  return z - 0.5L * std::log(2.0L * 3.14159265358979323846264338327950288L * z) + std::log(sum);
}

/// Rice log-density written out from its textbook form.
inline double rice_log_density(double y, double mu, double phi) {
  const long double z = static_cast<long double>(y) * mu / phi;
  return static_cast<double>(std::log(static_cast<long double>(y) / phi) -
                             (static_cast<long double>(y) * y + static_cast<long double>(mu) * mu) / (2.0L * phi) +
                             log_bessel_i(0, z));
}

/// NC-chi density with 2L degrees of freedom, direct form.
inline double ncchi_density(double y, double mu, double phi, int L) {
  const long double z = static_cast<long double>(y) * mu / phi;
  const long double logp = L * std::log(static_cast<long double>(y)) - std::log(static_cast<long double>(phi)) -
                           (L - 1) * std::log(static_cast<long double>(mu)) -
                           (static_cast<long double>(y) * y + static_cast<long double>(mu) * mu) / (2.0L * phi) +
                           std::log(bessel_i_series(L - 1, z));
  return static_cast<double>(std::exp(logp));
}

/// Richardson-extrapolated central difference.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  const auto central = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline double second_derivative(const std::function<double(double)>& f, double x, double h) {
  const auto central = [&](double step) { return (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

/// Adaptive Gauss-Kronrod integral over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14, &error);
}

inline double rel_err(double got, double want, double floor = 1e-300) {
  return std::abs(got - want) / std::max({std::abs(want), std::abs(got), floor});
}

/// Posterior of (b, a) = (ln mu, ln phi) for an intercept-only Rician model
/// with independent normal priors, tabulated by the midpoint rule on a
/// regular nb x na grid. mass is normalized and row-major in b.
struct RiceGrid {
  std::vector<double> b, a, mass;

  double mean_b() const { return moment([](double x, double) { return x; }); }
  double mean_a() const { return moment([](double, double y) { return y; }); }
  double var_b() const {
    const double m = mean_b();
    return moment([m](double x, double) { return (x - m) * (x - m); });
  }
  double var_a() const {
    const double m = mean_a();
    return moment([m](double, double y) { return (y - m) * (y - m); });
  }
  template <class F>
  double moment(F f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) s += mass[i * a.size() + j] * f(b[i], a[j]);
    return s;
  }
};

/// Midpoint nodes and cell widths along one grid axis.
struct GridAxis {
  std::vector<double> x, w;

  void add(double lo, double hi, int cells) {
    const double h = (hi - lo) / cells;
    for (int i = 0; i < cells; ++i) {
      x.push_back(lo + (i + 0.5) * h);
      w.push_back(h);
    }
  }
  static GridAxis uniform(double lo, double hi, int cells) {
    GridAxis g;
    g.add(lo, hi, cells);
    return g;
  }
  /// Fine cells on [core_lo, core_hi], coarser ones out to lo and hi.
  static GridAxis composite(double lo, double core_lo, double core_hi, double hi, int tail_cells, int core_cells) {
    GridAxis g;
    g.add(lo, core_lo, tail_cells);
    g.add(core_lo, core_hi, core_cells);
    g.add(core_hi, hi, tail_cells);
    return g;
  }
};

inline RiceGrid rice_intercept_grid(const std::vector<double>& y, double mb, double vb, double ma, double va,
                                    const GridAxis& bx, const GridAxis& ax) {
  RiceGrid g;
  g.b = bx.x;
  g.a = ax.x;
  const std::size_t nb = g.b.size(), na = g.a.size();
  std::vector<double> lp(nb * na);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const double mu = std::exp(g.b[i]), phi = std::exp(g.a[j]);
      double s = -0.5 * (g.b[i] - mb) * (g.b[i] - mb) / vb - 0.5 * (g.a[j] - ma) * (g.a[j] - ma) / va;
      for (double yi : y) s += rice_log_density(yi, mu, phi);
      lp[i * na + j] = s;
      top = std::max(top, s);
    }
  }
  double total = 0.0;
  g.mass.resize(lp.size());
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < na; ++j) total += g.mass[i * na + j] = std::exp(lp[i * na + j] - top) * bx.w[i] * ax.w[j];
  for (double& m : g.mass) m /= total;
  return g;
}

inline RiceGrid rice_intercept_grid(const std::vector<double>& y, double mb, double vb, double ma, double va,
                                    double b_lo, double b_hi, double a_lo, double a_hi, int nb, int na) {
  return rice_intercept_grid(y, mb, vb, ma, va, GridAxis::uniform(b_lo, b_hi, nb), GridAxis::uniform(a_lo, a_hi, na));
}

}  // namespace oracle
