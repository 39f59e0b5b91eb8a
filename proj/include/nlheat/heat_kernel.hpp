#pragma once

#include <cmath>
#include <limits>

#include "nlheat/convolution.hpp"
#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/kernels.hpp"

namespace nlheat {

/// log(t^K / K!) for t > 0.
inline double log_poisson_term(double t, int K) {
  return K * std::log(t) - std::lgamma(K + 1.0);
}

/// Upper bound e^t t^K / K! on the Taylor tail sum_{n>=K} t^n/n!.
inline double taylor_tail_bound(double t, int K) {
  if (t == 0.0) return K == 0 ? 1.0 : 0.0;
  return std::exp(t + log_poisson_term(t, K));
}

/// Smallest K >= 1 with J_sup * t^K / K! <= tol.
inline int truncation_order(double t, double tol, double J_sup) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("truncation_order: t must be >= 0");
  if (!(tol > 0.0)) throw InvalidArgument("truncation_order: tol must be positive");
  if (t == 0.0 || !(J_sup > 0.0)) return 1;
  const double target = std::log(tol) - std::log(J_sup);
  for (int K = 1; K < 1000000; ++K) {
    if (log_poisson_term(t, K) <= target) return K;
  }
  throw InvalidArgument("truncation_order: t too large");
}

/// omega_K(., t) = e^{-t} sum_{n=1}^K t^n J^{*n} / n! on a grid.
struct OmegaExpansion {
  Grid grid;
  double t = 0.0;
  int order = 1;  // K
  GridFunction values;
  double remainder_bound = 0.0;  // sup-norm bound on the dropped tail
  double truncation_loss = 0.0;  // accumulated convolution mass deficit
  double kernel_sup = 0.0;

  double mass() const { return integrate(values); }
  double mass_expected() const { return -std::expm1(-t); }
};

/// Discretized kernel plus its iterates, shared between times.
struct HeatKernelContext {
  KernelSpec spec;
  DiscreteKernel kernel;
  IteratedConvolutions iterates;

  double kernel_sup() const { return sup_norm(kernel.density); }
};

inline HeatKernelContext make_heat_kernel_context(const KernelSpec& spec, const Grid& grid,
                                                  int n_max,
                                                  ConvolutionMethod method = ConvolutionMethod::Fft,
                                                  double max_loss = kMaxTruncationLoss) {
  HeatKernelContext ctx{spec, discretize(spec, grid), {}};
  ctx.iterates = iterate(ctx.kernel.density, n_max, method, max_loss);
  return ctx;
}

inline OmegaExpansion omega_from_iterates(const IteratedConvolutions& its, double t, int K,
                                          double kernel_sup) {
  if (!(t >= 0.0)) throw InvalidArgument("omega: t must be >= 0");
  if (K < 1) throw InvalidArgument("omega: order must be >= 1");
  if (K > its.n_max()) throw InvalidArgument("omega: not enough iterates for the requested order");
  OmegaExpansion w;
  w.grid = its.grid;
  w.t = t;
  w.order = K;
  w.kernel_sup = kernel_sup;
  w.values = GridFunction(its.grid);
  if (t == 0.0) return w;
  auto out = w.values.values();
  for (int n = 1; n <= K; ++n) {
    const double weight = std::exp(log_poisson_term(t, n) - t);
    if (weight == 0.0) continue;
    const auto term = its[n].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * term[i];
    w.truncation_loss += weight * its.mass_deficits[n];
  }
  w.remainder_bound = kernel_sup * std::exp(log_poisson_term(t, K));
  return w;
}

inline OmegaExpansion omega(const HeatKernelContext& ctx, double t, double tol) {
  const double sup = ctx.kernel_sup();
  const int K = truncation_order(t, tol, sup);
  return omega_from_iterates(ctx.iterates, t, K, sup);
}

inline OmegaExpansion omega(const KernelSpec& spec, const Grid& grid, double t, double tol,
                            ConvolutionMethod method = ConvolutionMethod::Fft) {
  if (!(t >= 0.0)) throw InvalidArgument("omega: t must be >= 0");
  DiscreteKernel k = discretize(spec, grid);
  const double sup = sup_norm(k.density);
  const int K = truncation_order(t, tol, sup);
  const IteratedConvolutions its = iterate(k.density, K, method);
  return omega_from_iterates(its, t, K, sup);
}

/// Sup over the collar |x| <= L - support(J) of the residual of
///   omega_t = J*omega - omega + e^{-t} J
/// with a central difference in time.
inline double omega_residual(const KernelSpec& spec, const Grid& grid, double t, double dt,
                             double tol = 1e-12) {
  if (!(dt > 0.0) || !(t > dt)) throw InvalidArgument("omega_residual: need t > dt > 0");
  const DiscreteKernel k = discretize(spec, grid);
  const double sup = sup_norm(k.density);
  const int K = truncation_order(t + dt, tol, sup);
  const IteratedConvolutions its = iterate(k.density, K);
  const OmegaExpansion minus = omega_from_iterates(its, t - dt, K, sup);
  const OmegaExpansion mid = omega_from_iterates(its, t, K, sup);
  const OmegaExpansion plus = omega_from_iterates(its, t + dt, K, sup);
  const GridFunction Jw = convolve_fft(mid.values, k.density);
  const double collar = grid.half_extent() - support_radius(k.density, kSupportThreshold);
  if (collar < 0.0) throw DomainTooSmall("omega_residual: empty collar", 2.0 * grid.half_extent());
  const double decay = std::exp(-t);
  double r = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid.node(i)) > collar) continue;
    const double dwdt = (plus.values[i] - minus.values[i]) / (2.0 * dt);
    const double rhs = Jw[i] - mid.values[i] + decay * k.density[i];
    r = std::max(r, std::abs(dwdt - rhs));
  }
  return r;
}

}  // namespace nlheat
