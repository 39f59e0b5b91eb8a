#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

// Kernel families. All are even probability densities on the real line.
struct CompactUniform {
  double rho;  // support radius
};
struct CompactBump {
  double rho;  // (pi/(4 rho)) cos(pi x/(2 rho)) on [-rho, rho]
};
struct Gaussian {
  double gamma;  // J(x) = (gamma^2/pi)^{1/2} exp(-gamma^2 x^2)
};
struct PowerTail {
  double gamma0;  // J(x) = C (1+|x|)^{-(1+gamma0)}
};
struct ExponentialTail {
  double gamma0;  // J(x) = C exp(-gamma0 |x|)
};
struct TemperedStable {
  double gamma0;  // J(x) = C exp(-gamma0 |x|) (1+|x|)^{-(2+alpha0)}
  double alpha0;
};

using KernelFamily =
    std::variant<CompactUniform, CompactBump, Gaussian, PowerTail, ExponentialTail, TemperedStable>;

enum class DecayClass { Slow, Fast };

enum class MomentMethod { ClosedForm, Quadrature };

struct KernelSpec {
  KernelFamily family;
  int dimension = 1;
  double normalizer = 1.0;  // C with \int J = 1

  bool is_compact() const {
    return std::holds_alternative<CompactUniform>(family) ||
           std::holds_alternative<CompactBump>(family);
  }
  /// Support radius for compact families, +inf otherwise.
  double support() const {
    if (auto* u = std::get_if<CompactUniform>(&family)) return u->rho;
    if (auto* b = std::get_if<CompactBump>(&family)) return b->rho;
    return std::numeric_limits<double>::infinity();
  }
};

struct CriticalExponents {
  double gamma0;                 // +inf when every exponential moment is finite
  std::optional<double> alpha0;  // tempered families only
};

namespace detail {

inline constexpr double kQuadTol = 1e-12;

template <typename F>
double quad(F f, double a, double b) {
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, kQuadTol, &err);
  return v;
}

/// \int_0^inf f, split at `scale` to help the infinite-range mapping.
template <typename F>
double quad_half_line(F f, double scale) {
  return quad(f, 0.0, scale) + quad(f, scale, std::numeric_limits<double>::infinity());
}

inline double tempered_raw_mass(double gamma0, double alpha0) {
  auto f = [=](double y) { return std::exp(-gamma0 * y) * std::pow(1.0 + y, -(2.0 + alpha0)); };
  return 2.0 * quad_half_line(f, 1.0 / gamma0);
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidArgument(std::string("kernel parameter ") + name + " must be positive");
  }
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Construction

inline KernelSpec make_kernel(KernelFamily family, int dimension = 1) {
  if (dimension < 1) throw InvalidArgument("kernel dimension must be >= 1");
  KernelSpec s{family, dimension, 1.0};
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CompactUniform>) {
          detail::require_positive(f.rho, "rho");
          s.normalizer = 0.5 / f.rho;
        } else if constexpr (std::is_same_v<T, CompactBump>) {
          detail::require_positive(f.rho, "rho");
          s.normalizer = std::numbers::pi / (4.0 * f.rho);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          detail::require_positive(f.gamma, "gamma");
          s.normalizer = f.gamma / std::sqrt(std::numbers::pi);
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          detail::require_positive(f.gamma0, "gamma0");
          s.normalizer = 0.5 * f.gamma0;
        } else if constexpr (std::is_same_v<T, ExponentialTail>) {
          detail::require_positive(f.gamma0, "gamma0");
          s.normalizer = 0.5 * f.gamma0;
        } else {
          detail::require_positive(f.gamma0, "gamma0");
          detail::require_positive(f.alpha0, "alpha0");
          s.normalizer = 1.0 / detail::tempered_raw_mass(f.gamma0, f.alpha0);
        }
      },
      family);
  return s;
}

inline KernelSpec uniform_kernel(double rho) { return make_kernel(CompactUniform{rho}); }
inline KernelSpec bump_kernel(double rho) { return make_kernel(CompactBump{rho}); }
inline KernelSpec gaussian_kernel(double gamma) { return make_kernel(Gaussian{gamma}); }
inline KernelSpec power_tail_kernel(double gamma0) { return make_kernel(PowerTail{gamma0}); }
inline KernelSpec exponential_tail_kernel(double gamma0) {
  return make_kernel(ExponentialTail{gamma0});
}
inline KernelSpec tempered_stable_kernel(double gamma0, double alpha0) {
  return make_kernel(TemperedStable{gamma0, alpha0});
}

inline std::string family_name(const KernelSpec& s) {
  static constexpr const char* names[] = {"uniform", "bump",    "gaussian",
                                          "power",   "exptail", "tempered"};
  return names[s.family.index()];
}

// ---------------------------------------------------------------------------
// Pointwise evaluation

inline double evaluate(const KernelSpec& s, double x) {
  const double a = std::abs(x);
  const double C = s.normalizer;
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CompactUniform>) {
          return a <= f.rho ? C : 0.0;
        } else if constexpr (std::is_same_v<T, CompactBump>) {
          return a <= f.rho ? C * std::cos(std::numbers::pi * a / (2.0 * f.rho)) : 0.0;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return C * std::exp(-f.gamma * f.gamma * a * a);
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          return C * std::pow(1.0 + a, -(1.0 + f.gamma0));
        } else if constexpr (std::is_same_v<T, ExponentialTail>) {
          return C * std::exp(-f.gamma0 * a);
        } else {
          return C * std::exp(-f.gamma0 * a) * std::pow(1.0 + a, -(2.0 + f.alpha0));
        }
      },
      s.family);
}

// ---------------------------------------------------------------------------
// Moments

namespace detail {

/// \int J(y) w(|y|) dy for an even weight, by quadrature over the half line.
template <typename W>
double weighted_integral(const KernelSpec& s, W weight) {
  auto f = [&](double y) {
    const double j = evaluate(s, y);
    return j == 0.0 ? 0.0 : j * weight(y);
  };
  if (s.is_compact()) return 2.0 * quad(f, 0.0, s.support());
  double scale = 1.0;
  if (auto* g = std::get_if<Gaussian>(&s.family)) scale = 1.0 / g->gamma;
  if (auto* e = std::get_if<ExponentialTail>(&s.family)) scale = 1.0 / e->gamma0;
  if (auto* t = std::get_if<TemperedStable>(&s.family)) scale = 1.0 / t->gamma0;
  return 2.0 * quad_half_line(f, scale);
}

}  // namespace detail

/// \int J(y) |y|^order dy for any real order >= 0.
inline double abs_moment(const KernelSpec& s, double order) {
  if (!(order >= 0.0)) throw InvalidArgument("moment order must be >= 0");
  if (order == 0.0) return 1.0;
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CompactUniform>) {
          return std::pow(f.rho, order) / (order + 1.0);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return std::tgamma(0.5 * (order + 1.0)) /
                 (std::sqrt(std::numbers::pi) * std::pow(f.gamma, order));
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          if (order >= f.gamma0) {
            throw MomentDiverges("moment of order " + detail::fmt(order) +
                                 " diverges for power tail with gamma0 = " + detail::fmt(f.gamma0));
          }
          return f.gamma0 * boost::math::beta(order + 1.0, f.gamma0 - order);
        } else if constexpr (std::is_same_v<T, ExponentialTail>) {
          return std::tgamma(order + 1.0) / std::pow(f.gamma0, order);
        } else {
          return detail::weighted_integral(s, [=](double y) { return std::pow(y, order); });
        }
      },
      s.family);
}

/// Same integral, always by quadrature (used to cross-check the closed forms).
inline double abs_moment_quadrature(const KernelSpec& s, double order) {
  if (auto* p = std::get_if<PowerTail>(&s.family); p && order >= p->gamma0) {
    throw MomentDiverges("moment diverges");
  }
  return detail::weighted_integral(s, [=](double y) { return std::pow(y, order); });
}

inline bool moment_has_closed_form(const KernelSpec& s) {
  return !std::holds_alternative<CompactBump>(s.family) &&
         !std::holds_alternative<TemperedStable>(s.family);
}

/// Even moment m_{order}; order must be a non-negative even integer.
inline double moment(const KernelSpec& s, int order) {
  if (order < 0 || order % 2 != 0) throw InvalidArgument("moment order must be even and >= 0");
  return abs_moment(s, static_cast<double>(order));
}

/// \int J(y) e^{gamma |y|} dy.
inline double exp_moment(const KernelSpec& s, double gamma) {
  if (gamma == 0.0) return 1.0;
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CompactUniform>) {
          const double z = gamma * f.rho;
          return std::expm1(z) / z;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          const double a = gamma / (2.0 * f.gamma);
          return std::exp(a * a) * (1.0 + std::erf(a));
        } else if constexpr (std::is_same_v<T, PowerTail>) {
          if (gamma > 0.0) throw MomentDiverges("exponential moments of a power tail diverge");
          return detail::weighted_integral(s, [=](double y) { return std::exp(gamma * y); });
        } else if constexpr (std::is_same_v<T, ExponentialTail>) {
          if (gamma >= f.gamma0) {
            throw MomentDiverges("exponential moment with gamma = " + detail::fmt(gamma) +
                                 " >= gamma0 = " + detail::fmt(f.gamma0) + " diverges");
          }
          return f.gamma0 / (f.gamma0 - gamma);
        } else if constexpr (std::is_same_v<T, TemperedStable>) {
          if (gamma > f.gamma0) {
            throw MomentDiverges("exponential moment with gamma = " + detail::fmt(gamma) +
                                 " > gamma0 = " + detail::fmt(f.gamma0) + " diverges");
          }
          if (gamma == f.gamma0) return 2.0 * s.normalizer / (1.0 + f.alpha0);
          return detail::weighted_integral(s, [=](double y) { return std::exp(gamma * y); });
        } else {
          return detail::weighted_integral(s, [=](double y) { return std::exp(gamma * y); });
        }
      },
      s.family);
}

/// \int J(y) e^{gamma |y|} (1+|y|)^{1+alpha} dy (one space dimension).
inline double tempered_moment(const KernelSpec& s, double gamma, double alpha) {
  const double power = 1.0 + alpha;
  auto weight = [=](double y) { return std::exp(gamma * y) * std::pow(1.0 + y, power); };
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerTail>) {
          if (gamma > 0.0) throw MomentDiverges("exponential moments of a power tail diverge");
          if (power >= f.gamma0) throw MomentDiverges("tempered moment diverges for power tail");
          return detail::weighted_integral(s, weight);
        } else if constexpr (std::is_same_v<T, ExponentialTail>) {
          if (gamma >= f.gamma0) throw MomentDiverges("tempered moment diverges: gamma >= gamma0");
          return detail::weighted_integral(s, weight);
        } else if constexpr (std::is_same_v<T, TemperedStable>) {
          if (gamma > f.gamma0) throw MomentDiverges("tempered moment diverges: gamma > gamma0");
          if (gamma == f.gamma0) {
            if (alpha >= f.alpha0) {
              throw MomentDiverges("tempered moment with alpha = " + detail::fmt(alpha) +
                                   " >= alpha0 = " + detail::fmt(f.alpha0) + " diverges");
            }
            // e^{g0 y} e^{-g0 y} (1+y)^{1+a} (1+y)^{-(2+a0)} = (1+y)^{a-a0-1}
            return 2.0 * s.normalizer / (f.alpha0 - alpha);
          }
          return detail::weighted_integral(s, weight);
        } else {
          return detail::weighted_integral(s, weight);
        }
      },
      s.family);
}

template <typename T>
struct MomentTable {
  std::vector<T> even;  // even[k] = m_{2k}
  std::vector<MomentMethod> method;

  int max_order() const { return 2 * (static_cast<int>(even.size()) - 1); }
  const T& at(int order) const {
    if (order < 0 || order % 2 != 0 || order > max_order()) {
      throw MomentTableError("moment of order " + std::to_string(order) + " not in table");
    }
    return even[static_cast<std::size_t>(order / 2)];
  }
};

inline constexpr int kDefaultMaxMomentOrder = 16;

inline MomentTable<double> moment_table(const KernelSpec& s,
                                        int max_order = kDefaultMaxMomentOrder) {
  if (max_order < 0 || max_order % 2 != 0) throw InvalidArgument("max order must be even");
  MomentTable<double> t;
  const auto tag = moment_has_closed_form(s) ? MomentMethod::ClosedForm : MomentMethod::Quadrature;
  for (int k = 0; 2 * k <= max_order; ++k) {
    t.even.push_back(moment(s, 2 * k));
    t.method.push_back(k == 0 ? MomentMethod::ClosedForm : tag);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Classification helpers

inline DecayClass decay_class(const KernelSpec& s) {
  return std::holds_alternative<PowerTail>(s.family) ||
                 std::holds_alternative<ExponentialTail>(s.family) ||
                 std::holds_alternative<TemperedStable>(s.family)
             ? DecayClass::Slow
             : DecayClass::Fast;
}

inline CriticalExponents critical_exponents(const KernelSpec& s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (auto* p = std::get_if<PowerTail>(&s.family)) return {p->gamma0, std::nullopt};
  if (auto* e = std::get_if<ExponentialTail>(&s.family)) return {e->gamma0, std::nullopt};
  if (auto* t = std::get_if<TemperedStable>(&s.family)) return {t->gamma0, t->alpha0};
  return {inf, std::nullopt};
}

// ---------------------------------------------------------------------------
// Discretization

struct DiscreteKernel {
  GridFunction density;   // trapezoid mass exactly 1
  double rescale_factor;  // multiplier applied to the raw samples
  double raw_mass;        // trapezoid mass of the raw samples
};

/// Samples J on the grid and rescales to unit trapezoidal mass. At the jump of
/// the uniform kernel the sample is the mean of the one-sided limits.
inline DiscreteKernel discretize(const KernelSpec& s, const Grid& grid) {
  const double L = grid.half_extent();
  if (s.is_compact() && L < s.support() * (1.0 - 1e-12)) {
    throw DomainTooSmall("grid half extent is smaller than the kernel support", s.support());
  }
  GridFunction g = sample([&](double x) { return evaluate(s, x); }, grid);
  if (auto* u = std::get_if<CompactUniform>(&s.family)) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(std::abs(g.x(i)) - u->rho) <= 1e-12 * u->rho) g[i] *= 0.5;
    }
  }
  const double raw = integrate(g);
  if (!(raw > 0.0)) throw DiscretizationQuality("kernel samples have no mass on this grid");
  const double factor = 1.0 / raw;
  g *= factor;
  const double h = grid.spacing();
  if (!std::holds_alternative<CompactUniform>(s.family) &&
      std::abs(factor - 1.0) > 10.0 * h * h) {
    throw DiscretizationQuality("kernel rescale factor " + detail::fmt(factor) +
                                " outside [1 - 10 h^2, 1 + 10 h^2]");
  }
  return {std::move(g), factor, raw};
}

// ---------------------------------------------------------------------------
// Flat key=value serialization, e.g. "family=gaussian gamma=1 N=1".

inline std::string to_string(const KernelSpec& s) {
  std::ostringstream os;
  os << "family=" << family_name(s);
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, CompactUniform> || std::is_same_v<T, CompactBump>) {
          os << " rho=" << detail::fmt(f.rho);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          os << " gamma=" << detail::fmt(f.gamma);
        } else if constexpr (std::is_same_v<T, TemperedStable>) {
          os << " gamma0=" << detail::fmt(f.gamma0) << " alpha0=" << detail::fmt(f.alpha0);
        } else {
          os << " gamma0=" << detail::fmt(f.gamma0);
        }
      },
      s.family);
  os << " N=" << s.dimension;
  return os.str();
}

inline KernelSpec parse_kernel_spec(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw InvalidArgument("kernel spec token without '=': " + tok);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto num = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw InvalidArgument(std::string("kernel spec missing ") + key);
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("kernel spec: bad number for ") + key);
    }
  };
  const int dim = kv.count("N") ? std::stoi(kv["N"]) : 1;
  const std::string fam = kv.count("family") ? kv["family"] : "";
  if (fam == "uniform") return make_kernel(CompactUniform{num("rho")}, dim);
  if (fam == "bump") return make_kernel(CompactBump{num("rho")}, dim);
  if (fam == "gaussian") return make_kernel(Gaussian{num("gamma")}, dim);
  if (fam == "power") return make_kernel(PowerTail{num("gamma0")}, dim);
  if (fam == "exptail") return make_kernel(ExponentialTail{num("gamma0")}, dim);
  if (fam == "tempered") return make_kernel(TemperedStable{num("gamma0"), num("alpha0")}, dim);
  throw InvalidArgument("unknown kernel family '" + fam + "'");
}

inline bool operator==(const KernelSpec& a, const KernelSpec& b) {
  return to_string(a) == to_string(b);
}

}  // namespace nlheat
