#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nlheat/convolution.hpp"
#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"
#include "nlheat/growth.hpp"
#include "nlheat/heat_kernel.hpp"
#include "nlheat/kernels.hpp"

namespace nlheat {

// ---------------------------------------------------------------------------
// Barriers: positive even f with J*f - f <= lambda f.

struct PowerBarrier {
  double gamma;  // 1 + |x|^gamma
};
struct ExpBarrier {
  double gamma;  // e^{gamma |x|}
};
struct TemperedBarrier {
  double gamma0;  // e^{gamma0 |x|} (1+|x|)^{N+alpha}
  double alpha;
  int dimension = 1;
};

using Barrier = std::variant<PowerBarrier, ExpBarrier, TemperedBarrier>;

inline double log_evaluate(const Barrier& b, double x) {
  const double s = std::abs(x);
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerBarrier>) {
          return std::log1p(std::pow(s, f.gamma));
        } else if constexpr (std::is_same_v<T, ExpBarrier>) {
          return f.gamma * s;
        } else {
          return f.gamma0 * s + (f.dimension + f.alpha) * std::log1p(s);
        }
      },
      b);
}

inline double evaluate(const Barrier& b, double x) { return std::exp(log_evaluate(b, x)); }

inline std::string barrier_name(const Barrier& b) {
  static constexpr const char* names[] = {"power", "exp", "tempered"};
  return names[b.index()];
}

inline std::string to_string(const Barrier& b) {
  std::ostringstream os;
  os << "barrier=" << barrier_name(b);
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, TemperedBarrier>) {
          os << " gamma0=" << format_double(f.gamma0) << " alpha=" << format_double(f.alpha)
             << " N=" << f.dimension;
        } else {
          os << " gamma=" << format_double(f.gamma);
        }
      },
      b);
  return os.str();
}

/// The lambda obtained in the barrier lemmas:
///   power     2^gamma max{1, \int J |y|^gamma}
///   exp       \int J e^{gamma |y|}
///   tempered  2^{N+alpha} \int J e^{gamma0 |y|} (1+|y|)^{N+alpha}
inline double analytic_lambda(const KernelSpec& spec, const Barrier& b) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerBarrier>) {
          if (!(f.gamma > 0.0)) throw InvalidArgument("power barrier needs gamma > 0");
          return std::pow(2.0, f.gamma) * std::max(1.0, abs_moment(spec, f.gamma));
        } else if constexpr (std::is_same_v<T, ExpBarrier>) {
          if (!(f.gamma > 0.0)) throw InvalidArgument("exponential barrier needs gamma > 0");
          return exp_moment(spec, f.gamma);
        } else {
          if (f.dimension != spec.dimension) {
            throw InvalidArgument("tempered barrier dimension differs from the kernel's");
          }
          const double power = f.dimension + f.alpha;
          // tempered_moment weights with (1+|y|)^{1+alpha'}
          return std::pow(2.0, power) * tempered_moment(spec, f.gamma0, power - 1.0);
        }
      },
      b);
}

struct BarrierMeasurement {
  double lambda_hat = 0.0;  // max over the collar of (J*f - f)/f
  double argmax = 0.0;
  double collar = 0.0;
};

/// Collar used for barrier ratios: |x| <= L - supp(J) for a kernel that fits
/// inside the grid, |x| <= L/2 otherwise.
inline double barrier_collar(const GridFunction& J) {
  const double L = J.grid().half_extent();
  const double r = support_radius(J, kSupportThreshold);
  return r < L - 0.5 * J.grid().spacing() ? L - r : 0.5 * L;
}

/// Measures (J*f - f)/f on the collar. f is evaluated in closed form at
/// x_i - x_j, so points outside the grid carry no zero-extension error; the
/// kernel sum uses trapezoid weights, matching its unit-mass normalization.
inline BarrierMeasurement numeric_lambda(const GridFunction& J, const Barrier& b) {
  const Grid& grid = J.grid();
  const double collar = barrier_collar(J);
  if (!(collar > 0.0)) {
    throw DomainTooSmall("barrier check: empty collar",
                         2.0 * support_radius(J, kSupportThreshold));
  }
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) w[j] = h * J[j] * (j == 0 || j + 1 == n ? 0.5 : 1.0);
  BarrierMeasurement m;
  m.collar = collar;
  m.lambda_hat = -std::numeric_limits<double>::infinity();
  // f and J are even, so x >= 0 suffices
  for (std::size_t i = grid.center(); i < n; ++i) {
    const double x = grid.node(i);
    if (x > collar) break;
    const double lf = log_evaluate(b, x);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (w[j] == 0.0) continue;
      s += w[j] * std::exp(log_evaluate(b, x - grid.node(j)) - lf);
    }
    const double ratio = s - 1.0;
    if (ratio > m.lambda_hat) {
      m.lambda_hat = ratio;
      m.argmax = x;
    }
  }
  return m;
}

inline constexpr double kBarrierSlack = 1e-6;

struct BarrierCheck {
  double lambda_analytic = 0.0;
  BarrierMeasurement measured;
  bool passed = false;  // lambda_hat <= lambda_analytic + slack
};

inline BarrierCheck verify_barrier(const KernelSpec& spec, const Barrier& b, const Grid& grid,
                                   double slack = kBarrierSlack) {
  BarrierCheck c;
  c.lambda_analytic = analytic_lambda(spec, b);
  c.measured = numeric_lambda(discretize(spec, grid).density, b);
  c.passed = c.measured.lambda_hat <= c.lambda_analytic + slack;
  return c;
}

// ---------------------------------------------------------------------------
// Symbolic classification

enum class Outcome { Exists, NotExists, BlowsUpFiniteTime, OutsideTheory };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Exists: return "Exists";
    case Outcome::NotExists: return "NotExists";
    case Outcome::BlowsUpFiniteTime: return "BlowsUpFiniteTime";
    case Outcome::OutsideTheory: return "OutsideTheory";
  }
  return "?";
}

struct Verdict {
  Outcome outcome = Outcome::OutsideTheory;
  std::string citation;  // which rule of the theory table applied
  std::string reason;
  std::optional<Barrier> barrier;
  std::optional<double> lambda;
  std::optional<std::string> divergent_functional;
  bool barrier_verified = false;
};

namespace detail {

inline int compare_to_critical(double value, double critical) {
  if (std::abs(value - critical) <= 1e-12 * std::max(1.0, std::abs(critical))) return 0;
  return value < critical ? -1 : 1;
}

inline Verdict exists(std::string citation, std::string reason) {
  return {Outcome::Exists, std::move(citation), std::move(reason), {}, {}, {}, false};
}

inline Verdict not_exists(std::string citation, std::string reason, std::string functional) {
  return {Outcome::NotExists, std::move(citation), std::move(reason), {}, {}, std::move(functional),
          false};
}

inline Verdict outside(std::string reason) {
  return {Outcome::OutsideTheory, "none", std::move(reason), {}, {}, {}, false};
}

inline Verdict with_barrier(Verdict v, const KernelSpec& spec, Barrier b) {
  v.lambda = analytic_lambda(spec, b);
  v.barrier = std::move(b);
  return v;
}

inline Verdict classify_nonneg(const KernelSpec& spec, const GrowthSpec& g) {
  const auto& k = spec.family;
  const auto& d = g.family;
  const std::string minimal = "omega(t)*(u0 chi_R)(0) as R -> infinity";

  if (spec.is_compact()) {
    if (auto* f = std::get_if<XLogXGrowth>(&d)) {
      const double crit = 1.0 / spec.support();
      switch (compare_to_critical(f->alpha, crit)) {
        case -1:
          return exists("compact-kernel-xlogx", "alpha < 1/rho: the tail of omega beats the data");
        case 1:
          return not_exists("compact-kernel-xlogx", "alpha > 1/rho", minimal);
        default:
          return outside("alpha = 1/rho is the unresolved critical case for compact kernels");
      }
    }
    return outside("growth class not covered for compactly supported kernels");
  }

  if (auto* gk = std::get_if<Gaussian>(&k)) {
    if (auto* f = std::get_if<XSqrtLogXGrowth>(&d)) {
      switch (compare_to_critical(f->alpha, gk->gamma)) {
        case -1: return exists("gaussian-xsqrtlogx", "alpha < gamma");
        case 1: return not_exists("gaussian-xsqrtlogx", "alpha > gamma", minimal);
        default:
          return {Outcome::BlowsUpFiniteTime, "gaussian-critical",
                  "alpha = gamma: f = 0 lies in every perturbation band", {}, {}, {}, false};
      }
    }
    if (auto* f = std::get_if<CriticalPerturbedGrowth>(&d)) {
      // the linear perturbation is lower order than |x| (ln|x|)^{1/2}
      switch (compare_to_critical(f->gamma, gk->gamma)) {
        case -1: return exists("gaussian-xsqrtlogx", "perturbed data with gamma below the kernel's");
        case 1:
          return not_exists("gaussian-xsqrtlogx", "perturbed data with gamma above the kernel's",
                            minimal);
        default:
          return {Outcome::BlowsUpFiniteTime, "gaussian-critical",
                  "critical growth with linear perturbation band", {}, {}, {}, false};
      }
    }
    return outside("growth class not covered for the Gaussian kernel");
  }

  if (auto* pk = std::get_if<PowerTail>(&k)) {
    if (auto* f = std::get_if<PowerGrowth>(&d)) {
      if (f->gamma < pk->gamma0) {
        return with_barrier(exists("power-tail-power-growth", "gamma < gamma0"), spec,
                            PowerBarrier{f->gamma});
      }
      return not_exists("power-tail-power-growth", "gamma >= gamma0",
                        "moment of order gamma of J");
    }
    return outside("growth class not covered for power-tail kernels");
  }

  if (auto* ek = std::get_if<ExponentialTail>(&k)) {
    if (auto* f = std::get_if<ExpGrowth>(&d)) {
      if (f->gamma < ek->gamma0) {
        return with_barrier(exists("exp-tail-exp-growth", "gamma < gamma0"), spec,
                            ExpBarrier{f->gamma});
      }
      return not_exists("exp-tail-exp-growth", "gamma >= gamma0",
                        "exponential moment of order gamma of J");
    }
    return outside("growth class not covered for exponential-tail kernels");
  }

  if (auto* tk = std::get_if<TemperedStable>(&k)) {
    if (auto* f = std::get_if<ExpPowerGrowth>(&d)) {
      if (compare_to_critical(f->gamma, tk->gamma0) != 0) {
        return outside("tempered rule needs the data rate to equal gamma0");
      }
      if (f->alpha < tk->alpha0) {
        return with_barrier(exists("tempered-exppower", "alpha < alpha0"), spec,
                            TemperedBarrier{tk->gamma0, f->alpha, spec.dimension});
      }
      return not_exists("tempered-exppower", "alpha >= alpha0",
                        "tempered moment of order (gamma0, alpha) of J");
    }
    return outside("growth class not covered for tempered kernels");
  }
  return outside("kernel family not covered");
}

}  // namespace detail

/// Existence / nonexistence / blow-up verdict from the theory table. Pure
/// logic: the amplitude c0 never matters. Nonexistence and blow-up are stated
/// for nonnegative data only, so two-sided data in those branches falls
/// outside the theory.
inline Verdict classify(const KernelSpec& spec, const GrowthSpec& g) {
  validate(g);
  if (g.dimension != spec.dimension) {
    return detail::outside("growth and kernel dimensions differ");
  }
  Verdict v = detail::classify_nonneg(spec, g);
  if (g.sign == DataSign::TwoSided &&
      (v.outcome == Outcome::NotExists || v.outcome == Outcome::BlowsUpFiniteTime)) {
    return detail::outside("nonexistence and blow-up require nonnegative data");
  }
  return v;
}

/// classify() followed by the numeric barrier check when the verdict carries a
/// barrier. A failing check means the discrete model contradicts the lemma.
inline Verdict classify_checked(const KernelSpec& spec, const GrowthSpec& g, const Grid& grid) {
  Verdict v = classify(spec, g);
  if (v.barrier) {
    const BarrierCheck c = verify_barrier(spec, *v.barrier, grid);
    if (!c.passed) {
      throw InternalConsistency("barrier check failed: lambda_hat = " +
                                format_double(c.measured.lambda_hat) + " > lambda = " +
                                format_double(c.lambda_analytic));
    }
    v.barrier_verified = true;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Lower bound J^{*n}(x) >= c mu^n on |x| <= n sigma

struct LowerBoundCert {
  double c = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  int n_max = 0;
  std::vector<double> minima;  // minima[n] = min_{|x| <= n sigma} J^{*n}, n >= 1 (index 0 unused)
  std::vector<bool> verified;  // verified[n], index 0 unused
  bool holds() const {
    return std::all_of(verified.begin() + 1, verified.end(), [](bool b) { return b; });
  }
};

inline LowerBoundCert lower_bound_cert(const IteratedConvolutions& its, double sigma, int n_max) {
  if (!(sigma > 0.0)) throw InvalidArgument("lower_bound_cert: sigma must be positive");
  if (n_max < 1 || n_max > its.n_max()) {
    throw InvalidArgument("lower_bound_cert: n_max must be in [1, available iterates]");
  }
  const Grid& grid = its.grid;
  const double L = grid.half_extent();
  const double rho = its.support_radii.at(1);
  if (rho < L - 0.5 * grid.spacing() && sigma >= rho) {
    throw InvalidArgument("lower_bound_cert: sigma must be below the kernel support radius");
  }
  if (n_max * sigma > L) {
    throw DomainTooSmall("lower_bound_cert: n_max * sigma exceeds the grid", n_max * sigma);
  }
  LowerBoundCert cert;
  cert.sigma = sigma;
  cert.n_max = n_max;
  cert.minima.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  cert.verified.assign(static_cast<std::size_t>(n_max) + 1, false);
  const double eps = 1e-12 * grid.spacing();
  for (int n = 1; n <= n_max; ++n) {
    double m = std::numeric_limits<double>::infinity();
    const GridFunction& g = its[static_cast<std::size_t>(n)];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(g.x(i)) <= n * sigma + eps) m = std::min(m, g[i]);
    }
    cert.minima[static_cast<std::size_t>(n)] = m;
  }
  double mu = 1.0;
  for (int n = 2; n <= n_max; ++n) {
    const double prev = cert.minima[static_cast<std::size_t>(n - 1)];
    const double cur = cert.minima[static_cast<std::size_t>(n)];
    if (!(prev > 0.0) || !(cur > 0.0)) {
      throw InternalConsistency("lower_bound_cert: J^{*" + std::to_string(n) +
                                "} vanishes inside |x| <= n sigma");
    }
    mu = std::min(mu, cur / prev);
  }
  if (!(cert.minima[1] > 0.0)) throw InternalConsistency("lower_bound_cert: J vanishes on |x| <= sigma");
  if (mu >= 1.0) mu = std::nextafter(1.0, 0.0);
  cert.mu = mu;
  cert.c = cert.minima[1] / mu;
  // c mu^n = m_1 mu^{n-1}; the factor absorbs the round-off of the ratio chain
  for (int n = 1; n <= n_max; ++n) {
    const double bound = cert.c * std::pow(mu, n);
    cert.verified[static_cast<std::size_t>(n)] =
        cert.minima[static_cast<std::size_t>(n)] >= bound * (1.0 - 1e-12);
    if (!cert.verified[static_cast<std::size_t>(n)]) {
      throw InternalConsistency("lower_bound_cert: bound violated at n = " + std::to_string(n));
    }
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Envelope fits of the tail of omega

enum class TailShape { Compact, Gaussian };

struct FitPoint {
  double x, t, ln_omega, lower_env, upper_env;
};

struct FitOptions {
  double x_lo = 5.0;
  double x_hi = 15.0;
  int order = 0;  // series order K; 0 picks one from the largest time
};

struct EstimateFit {
  TailShape shape = TailShape::Compact;
  double kernel_rate = 0.0;      // rho (compact) or gamma (Gaussian)
  std::optional<double> sigma;   // compact only
  double exponent_lower = 0.0;   // 1/sigma or gamma
  double exponent_upper = 0.0;   // 1/rho or gamma
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double slope = 0.0;            // free least-squares coefficient of phi(x)
  double slope_linear = 0.0;     // free coefficient of x (after removing ln t)
  double free_rms = 0.0;
  double lower_rms = 0.0;
  double upper_rms = 0.0;
  double x_lo = 0.0, x_hi = 0.0;
  std::vector<double> times;
  int order = 0;
  std::vector<FitPoint> points;
};

inline double tail_phi(TailShape shape, double x) {
  return shape == TailShape::Compact ? x * std::log(x) : x * std::sqrt(std::log(x));
}

/// Weight t^K/K! below which dropped series terms are ignored in tail work.
inline constexpr double kTailSeriesTol = 1e-60;

namespace detail {

/// Largest order whose iterates stay exact (compact) or lossless (otherwise).
inline int tail_order(const KernelSpec& spec, const DiscreteKernel& k, double t_max, int requested) {
  if (requested > 0) return requested;
  const int want = truncation_order(t_max, kTailSeriesTol, 1.0);
  const double L = k.density.grid().half_extent();
  if (spec.is_compact()) {
    const int cap = static_cast<int>(std::floor(L / spec.support() * (1.0 - 1e-12)));
    return std::max(1, std::min(want, cap));
  }
  const double m2 = detail::second_moment(k.density);
  const double r = support_radius(k.density, kSupportThreshold);
  int K = want;
  while (K > 1 && 6.2 * std::sqrt(K * m2) + r > L) --K;
  return K;
}

/// Least squares A c = y.
inline Eigen::VectorXd lstsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  return A.colPivHouseholderQr().solve(y);
}

inline double rms(const Eigen::VectorXd& r) {
  return r.size() ? std::sqrt(r.squaredNorm() / static_cast<double>(r.size())) : 0.0;
}

}  // namespace detail

/// Fits ln omega(x,t) + t = -a phi(x) + (b + ln t) x + const on x in [x_lo, x_hi].
/// The free fit reports a; the envelopes fix a to the lower / upper exponent,
/// fit b per side, then shift the offset so each side bounds every sample.
inline EstimateFit fit_estimates(const KernelSpec& spec, const Grid& grid,
                                 const std::vector<double>& times, double sigma,
                                 const FitOptions& opt = {}) {
  EstimateFit fit;
  if (spec.is_compact()) {
    fit.shape = TailShape::Compact;
    fit.kernel_rate = spec.support();
    if (!(sigma > 0.0 && sigma < spec.support())) {
      throw InvalidArgument("fit_estimates: need 0 < sigma < rho");
    }
    fit.sigma = sigma;
    fit.exponent_lower = 1.0 / sigma;
    fit.exponent_upper = 1.0 / spec.support();
  } else if (auto* g = std::get_if<Gaussian>(&spec.family)) {
    fit.shape = TailShape::Gaussian;
    fit.kernel_rate = g->gamma;
    fit.exponent_lower = fit.exponent_upper = g->gamma;
  } else {
    throw InvalidArgument("fit_estimates: only compact and Gaussian kernels have tail estimates");
  }
  if (times.empty()) throw InvalidArgument("fit_estimates: no times");
  for (double t : times) {
    if (!(t > 0.0)) throw InvalidArgument("fit_estimates: times must be positive");
  }
  if (!(opt.x_lo > std::numbers::e) || !(opt.x_hi > opt.x_lo)) {
    throw InvalidArgument("fit_estimates: need e < x_lo < x_hi");
  }
  if (opt.x_hi > 0.5 * grid.half_extent()) {
    throw DomainTooSmall("fit_estimates: x_hi beyond the tail collar L/2", 2.0 * opt.x_hi);
  }
  fit.x_lo = opt.x_lo;
  fit.x_hi = opt.x_hi;
  fit.times = times;

  const DiscreteKernel k = discretize(spec, grid);
  const double t_max = *std::max_element(times.begin(), times.end());
  fit.order = detail::tail_order(spec, k, t_max, opt.order);
  // the tail values are far below FFT round-off, so the iterates are summed directly
  const IteratedConvolutions its = iterate(k.density, fit.order, ConvolutionMethod::Direct);
  const double sup = sup_norm(k.density);

  struct Sample {
    double x, t, ln_omega, z;
  };
  std::vector<Sample> samples;
  for (double t : times) {
    const OmegaExpansion w = omega_from_iterates(its, t, fit.order, sup);
    for (std::size_t i = grid.center(); i < grid.size(); ++i) {
      const double x = grid.node(i);
      if (x < opt.x_lo - 1e-12 || x > opt.x_hi + 1e-12) continue;
      if (!(w.values[i] > 0.0)) {
        throw FitFailure("fit_estimates: omega underflows at x = " + format_double(x) +
                         ", t = " + format_double(t));
      }
      const double lw = std::log(w.values[i]);
      samples.push_back({x, t, lw, lw + t - x * std::log(t)});
    }
  }
  const auto m = static_cast<Eigen::Index>(samples.size());
  if (m < 4) throw FitFailure("fit_estimates: fewer than four samples in the x-range");

  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd z(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    A(r, 0) = -tail_phi(fit.shape, s.x);
    A(r, 1) = s.x;
    A(r, 2) = 1.0;
    z(r) = s.z;
  }
  const Eigen::VectorXd free = detail::lstsq(A, z);
  fit.slope = free(0);
  fit.slope_linear = free(1);
  fit.free_rms = detail::rms(A * free - z);

  // one envelope side: returns (log offset, linear coefficient, rms)
  auto side = [&](double a, bool upper) {
    Eigen::MatrixXd B(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto& s = samples[static_cast<std::size_t>(r)];
      B(r, 0) = 1.0;
      B(r, 1) = s.x;
      y(r) = s.z + a * tail_phi(fit.shape, s.x);
    }
    const Eigen::VectorXd c = detail::lstsq(B, y);
    const double b = c(1);
    double off = upper ? -std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < m; ++r) {
      const double v = y(r) - b * samples[static_cast<std::size_t>(r)].x;
      off = upper ? std::max(off, v) : std::min(off, v);
    }
    return std::tuple{off, b, detail::rms(B * c - y)};
  };
  const auto [lo_off, lo_b, lo_rms] = side(fit.exponent_lower, false);
  const auto [up_off, up_b, up_rms] = side(fit.exponent_upper, true);
  fit.c1 = std::exp(lo_off);
  fit.c2 = lo_b;
  fit.c3 = std::exp(up_off);
  fit.c4 = up_b;
  fit.lower_rms = lo_rms;
  fit.upper_rms = up_rms;
  if (!(fit.c1 > 0.0) || !(fit.c3 > 0.0) || !std::isfinite(fit.c1) || !std::isfinite(fit.c3)) {
    throw FitFailure("fit_estimates: envelope constants are not positive and finite");
  }

  for (const auto& s : samples) {
    const double phi = tail_phi(fit.shape, s.x);
    const double lt = std::log(s.t);
    FitPoint p{s.x, s.t, s.ln_omega,
               lo_off - s.t - fit.exponent_lower * phi + (fit.c2 + lt) * s.x,
               up_off - s.t - fit.exponent_upper * phi + (fit.c4 + lt) * s.x};
    const double tol = 1e-9 * std::max(1.0, std::abs(s.ln_omega));
    if (p.lower_env > s.ln_omega + tol || p.upper_env < s.ln_omega - tol) {
      throw FitFailure("fit_estimates: envelope does not bracket omega at x = " +
                       format_double(s.x) + ", t = " + format_double(s.t));
    }
    fit.points.push_back(p);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Blow-up bracket for Gaussian kernels with critical data

struct BlowupBracket {
  double t_lo = 0.0;  // omega(t)*u0 is finite for t < t_lo
  double t_hi = 0.0;  // and infinite for t > t_hi
  double alpha_lo = 0.0, beta_hi = 0.0;
  double c2 = 0.0, c4 = 0.0;  // fitted constants used
};

inline BlowupBracket blowup_bracket(double gamma, double alpha_lo, double beta_hi,
                                    const EstimateFit& fit) {
  if (!(alpha_lo < 0.0 && 0.0 < beta_hi)) {
    throw InvalidArgument("blowup_bracket: need alpha_lo < 0 < beta_hi");
  }
  if (fit.shape != TailShape::Gaussian) throw InvalidArgument("blowup_bracket: needs a Gaussian fit");
  if (std::abs(gamma - fit.kernel_rate) > 1e-12 * std::max(1.0, gamma)) {
    throw InvalidArgument("blowup_bracket: data rate differs from the fitted kernel's gamma");
  }
  BlowupBracket b;
  b.alpha_lo = alpha_lo;
  b.beta_hi = beta_hi;
  b.c2 = fit.c2;
  b.c4 = fit.c4;
  b.t_lo = std::exp(-beta_hi - fit.c4);
  b.t_hi = std::exp(-alpha_lo - fit.c2);
  if (b.t_lo > b.t_hi) {
    throw FitFailure("blowup_bracket: t_lo = " + format_double(b.t_lo) + " exceeds t_hi = " +
                     format_double(b.t_hi));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Divergence probe: V_R = (omega(t) * u0 chi_R)(0)

enum class ProbeFlag { Saturating, Diverging, Undecided };

inline const char* to_string(ProbeFlag f) {
  return f == ProbeFlag::Saturating ? "Saturating"
         : f == ProbeFlag::Diverging ? "Diverging"
                                     : "Undecided";
}

struct ProbeOptions {
  double growth_factor = 10.0;  // Diverging when V grows by more than this over the last span
  double span = 10.0;           // radius span of that comparison
  double saturation_tol = 1e-6; // Saturating when the last relative increment is below this
  int order = 0;                // series order; 0 picks one from the largest time
};

struct ProbeResult {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> values;
  ProbeFlag flag = ProbeFlag::Undecided;
  double span_ratio = 0.0;      // V(R_last) / V(R_ref), R_ref <= R_last - span
  double last_increment = 0.0;  // (V_last - V_prev) / V_last
  int order = 0;
};

namespace detail {

inline ProbeResult probe_values(const OmegaExpansion& w, const GrowthSpec& g,
                                const std::vector<double>& radii, const ProbeOptions& opt) {
  ProbeResult r;
  r.t = w.t;
  r.radii = radii;
  r.order = w.order;
  const Grid& grid = w.grid;
  const double h = grid.spacing();
  std::vector<double> lp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) lp[i] = log_profile(g, grid.node(i));
  for (double R : radii) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(grid.node(i)) > R * (1.0 + 1e-12) || !(w.values[i] > 0.0)) continue;
      s += std::exp(std::log(w.values[i]) + lp[i]);  // omega is even, so omega(-y) = omega(y)
    }
    r.values.push_back(g.c0 * h * s);
  }
  const std::size_t last = r.values.size() - 1;
  std::size_t ref = 0;
  for (std::size_t k = 0; k < last; ++k) {
    if (radii[k] <= radii[last] - opt.span + 1e-12) ref = k;
  }
  const double V = r.values[last];
  r.span_ratio = r.values[ref] > 0.0 ? V / r.values[ref] : std::numeric_limits<double>::infinity();
  r.last_increment = last == 0 || V == 0.0 ? 0.0 : (V - r.values[last - 1]) / V;
  if (last > 0 && r.span_ratio > opt.growth_factor) {
    r.flag = ProbeFlag::Diverging;
  } else if (last > 0 && std::abs(r.last_increment) < opt.saturation_tol) {
    r.flag = ProbeFlag::Saturating;
  }
  return r;
}

}  // namespace detail

/// Probes at several times sharing one set of directly summed iterates.
inline std::vector<ProbeResult> divergence_scan(const KernelSpec& spec, const GrowthSpec& g,
                                                const Grid& grid, const std::vector<double>& times,
                                                const std::vector<double>& radii,
                                                const ProbeOptions& opt = {}) {
  validate(g);
  if (g.sign != DataSign::Nonnegative) throw InvalidArgument("divergence probe needs nonnegative data");
  if (times.empty() || radii.empty()) throw InvalidArgument("divergence probe: empty times or radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw InvalidArgument("divergence probe: radii must be positive and increasing");
    }
  }
  for (double t : times) {
    if (!(t > 0.0)) throw InvalidArgument("divergence probe: times must be positive");
  }
  const double limit = spec.is_compact() ? grid.half_extent() : 0.5 * grid.half_extent();
  if (radii.back() > limit * (1.0 + 1e-12)) {
    throw DomainTooSmall("divergence probe: radius beyond the trusted region",
                         spec.is_compact() ? radii.back() : 2.0 * radii.back());
  }
  const DiscreteKernel k = discretize(spec, grid);
  const double t_max = *std::max_element(times.begin(), times.end());
  const int K = detail::tail_order(spec, k, t_max, opt.order);
  const IteratedConvolutions its = iterate(k.density, K, ConvolutionMethod::Direct);
  const double sup = sup_norm(k.density);
  std::vector<ProbeResult> out;
  for (double t : times) {
    out.push_back(detail::probe_values(omega_from_iterates(its, t, K, sup), g, radii, opt));
  }
  return out;
}

inline ProbeResult divergence_probe(const KernelSpec& spec, const GrowthSpec& g, const Grid& grid,
                                    double t, const std::vector<double>& radii,
                                    const ProbeOptions& opt = {}) {
  return divergence_scan(spec, g, grid, {t}, radii, opt).front();
}

}  // namespace nlheat
