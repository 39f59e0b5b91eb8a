#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nlheat/convolution.hpp"
#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/heat_kernel.hpp"
#include "nlheat/kernels.hpp"

namespace nlheat {

enum class SolveMethod { Representation, March };

inline const char* to_string(SolveMethod m) {
  return m == SolveMethod::Representation ? "repr" : "march";
}

struct SolveDiagnostics {
  double mass_in = 0.0;
  double mass = 0.0;  // integrate(u)
  double sup_norm = 0.0;
  int order_or_steps = 0;  // series order K (repr) or RK4 step count (march)
  double error_budget = 0.0;
  double trusted_radius = 0.0;  // |x| <= trusted_radius is free of zero-extension effects
};

struct SolveResult {
  GridFunction u;
  SolveMethod method = SolveMethod::Representation;
  double t = 0.0;
  SolveDiagnostics diagnostics;
};

/// omega falls below this value outside its effective width.
inline constexpr double kCollarThreshold = 1e-10;

inline double trusted_radius_for(const OmegaExpansion& w) {
  return std::max(0.0, w.grid.half_extent() - support_radius(w.values, kCollarThreshold));
}

namespace detail {

inline void fill_diagnostics(SolveResult& r, const GridFunction& u0) {
  r.diagnostics.mass_in = integrate(u0);
  r.diagnostics.mass = integrate(r.u);
  r.diagnostics.sup_norm = sup_norm(r.u);
}

inline double ell1(const GridFunction& g) {
  double s = 0.0;
  for (double v : g.values()) s += std::abs(v);
  return s * g.grid().spacing();
}

inline double ell2(const GridFunction& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return std::sqrt(s);
}

/// Heuristic bound on the absolute round-off of one FFT convolution h (a * b):
/// the error scales with eps log2(M) h |a|_2 |b|_2, not with the result, so
/// rapidly growing data can swamp small values of the solution.
inline double fft_roundoff(const GridFunction& a, const GridFunction& b) {
  const double m = static_cast<double>(padded_length(a.size()));
  return 4.0 * std::numeric_limits<double>::epsilon() * std::log2(m) * a.grid().spacing() *
         ell2(a) * ell2(b);
}

}  // namespace detail

/// u(t) = e^{-t} u0 + omega(t) * u0 with a precomputed expansion.
inline SolveResult solve_representation(const OmegaExpansion& w, const GridFunction& u0) {
  if (!(w.grid == u0.grid())) throw IncompatibleGrids("omega and data live on different grids");
  SolveResult r;
  r.method = SolveMethod::Representation;
  r.t = w.t;
  r.u = std::exp(-w.t) * u0;
  if (w.t > 0.0) r.u += convolve_fft(u0, w.values);
  r.diagnostics.order_or_steps = w.order;
  r.diagnostics.error_budget =
      w.remainder_bound * detail::ell1(u0) + w.truncation_loss * sup_norm(u0);
  if (w.t > 0.0) r.diagnostics.error_budget += detail::fft_roundoff(u0, w.values);
  r.diagnostics.trusted_radius = trusted_radius_for(w);
  detail::fill_diagnostics(r, u0);
  return r;
}

inline SolveResult solve_representation(const KernelSpec& spec, const GridFunction& u0, double t,
                                        double tol) {
  if (!(t >= 0.0)) throw InvalidArgument("solve_representation: t must be >= 0");
  return solve_representation(omega(spec, u0.grid(), t, tol), u0);
}

/// RK4 on v' = J*v for v = e^t u, returning u = e^{-t} v.
inline SolveResult solve_march(const KernelSpec& spec, const GridFunction& u0, double t_end,
                               double dt) {
  if (!(t_end >= 0.0)) throw InvalidArgument("solve_march: t_end must be >= 0");
  if (!(dt > 0.0)) throw InvalidArgument("solve_march: dt must be positive");
  const DiscreteKernel k = discretize(spec, u0.grid());
  const int steps = t_end == 0.0 ? 0 : static_cast<int>(std::ceil(t_end / dt - 1e-9));
  SolveResult r;
  r.method = SolveMethod::March;
  r.t = t_end;
  GridFunction v = u0;
  if (steps > 0) {
    const double tau = t_end / steps;
    FftConvolver J(k.density);
    for (int s = 0; s < steps; ++s) {
      const GridFunction k1 = J.apply(v);
      const GridFunction k2 = J.apply(v + (0.5 * tau) * k1);
      const GridFunction k3 = J.apply(v + (0.5 * tau) * k2);
      const GridFunction k4 = J.apply(v + tau * k3);
      const auto vv = v.values();
      for (std::size_t i = 0; i < vv.size(); ++i) {
        vv[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    }
    r.diagnostics.error_budget = t_end * std::pow(tau, 4) / 120.0 * sup_norm(u0) +
                                 4.0 * steps * detail::fft_roundoff(u0, k.density);
  }
  r.u = std::exp(-t_end) * v;
  r.diagnostics.order_or_steps = steps;
  r.diagnostics.trusted_radius =
      t_end == 0.0 ? u0.grid().half_extent()
                   : trusted_radius_for(omega(spec, u0.grid(), t_end, kCollarThreshold));
  detail::fill_diagnostics(r, u0);
  return r;
}

/// Solutions for the truncated data u0 * chi_{R_k}, R_1 < R_2 < ...
struct TruncationSequence {
  std::vector<double> radii;
  std::vector<SolveResult> results;
  std::vector<bool> monotone;  // monotone[k]: results[k] >= results[k-1] (true for k = 0)
};

inline GridFunction truncate_to_ball(const GridFunction& f, double R) {
  GridFunction g = f;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g.x(i)) > R * (1.0 + 1e-12)) g[i] = 0.0;
  }
  return g;
}

inline constexpr double kMonotoneTolerance = 1e-12;

inline TruncationSequence minimal_solution(const OmegaExpansion& w, const GridFunction& u0,
                                           const std::vector<double>& radii) {
  if (!(w.grid == u0.grid())) throw IncompatibleGrids();
  for (double v : u0.values()) {
    if (v < 0.0) throw InvalidArgument("minimal_solution: data must be nonnegative");
  }
  if (radii.empty()) throw InvalidArgument("minimal_solution: no radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw InvalidArgument("minimal_solution: radii must be positive and increasing");
    }
    if (radii[k] > u0.grid().half_extent() * (1.0 + 1e-12)) {
      throw DomainTooSmall("minimal_solution: radius beyond grid", radii[k]);
    }
  }
  TruncationSequence seq;
  seq.radii = radii;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    seq.results.push_back(solve_representation(w, truncate_to_ball(u0, radii[k])));
    if (k == 0) {
      seq.monotone.push_back(true);
      continue;
    }
    const GridFunction& cur = seq.results[k].u;
    const GridFunction& prev = seq.results[k - 1].u;
    const double tol = kMonotoneTolerance * std::max(1.0, sup_norm(cur));
    double worst = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) worst = std::min(worst, cur[i] - prev[i]);
    const bool ok = worst >= -tol;
    seq.monotone.push_back(ok);
    if (!ok) {
      throw InternalConsistency("truncated solutions not monotone in R: drop " +
                                format_double(worst) + " at R = " + format_double(radii[k]));
    }
  }
  return seq;
}

inline TruncationSequence minimal_solution(const KernelSpec& spec, const GridFunction& u0,
                                           double t, const std::vector<double>& radii,
                                           double tol = 1e-10) {
  return minimal_solution(omega(spec, u0.grid(), t, tol), u0, radii);
}

struct OrderingReport {
  double min_gap = 0.0;  // min (v - u) over the collar
  double argmin = 0.0;
  double radius = 0.0;  // collar radius used
  std::vector<double> violations;  // nodes with v - u < -tolerance
  bool ordered() const { return violations.empty(); }
};

inline OrderingReport compare(const SolveResult& u, const SolveResult& v, double tolerance = 1e-10) {
  u.u.require_same(v.u);
  if (u.t != v.t) throw InvalidArgument("compare: results at different times");
  OrderingReport rep;
  rep.radius = std::min(u.diagnostics.trusted_radius, v.diagnostics.trusted_radius);
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.u.size(); ++i) {
    const double x = u.u.x(i);
    if (std::abs(x) > rep.radius) continue;
    const double gap = v.u[i] - u.u[i];
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.argmin = x;
    }
    if (gap < -tolerance) rep.violations.push_back(x);
  }
  return rep;
}

}  // namespace nlheat
