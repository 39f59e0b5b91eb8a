#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

// Growth classes of initial data, all even in x.
struct PowerGrowth {
  double gamma;  // 1 + |x|^gamma
};
struct ExpGrowth {
  double gamma;  // e^{gamma |x|}
};
struct ExpPowerGrowth {
  double gamma;  // e^{gamma |x|} (1+|x|)^{N+alpha}
  double alpha;
};
struct XLogXGrowth {
  double alpha;  // e^{alpha |x| ln(1+|x|)}
};
struct XSqrtLogXGrowth {
  double alpha;  // e^{alpha |x| (ln|x|)_+^{1/2}}
};

/// Which edge of the band alpha_lo s <= f(s) <= beta_hi s the sampled profile follows.
enum class BandProfile { Lower, Zero, Upper };

struct CriticalPerturbedGrowth {
  double gamma;    // e^{gamma |x| (ln|x|)_+^{1/2} + f(|x|)}
  double alpha_lo;  // < 0
  double beta_hi;   // > 0
  BandProfile profile = BandProfile::Upper;
};

using GrowthFamily = std::variant<PowerGrowth, ExpGrowth, ExpPowerGrowth, XLogXGrowth,
                                  XSqrtLogXGrowth, CriticalPerturbedGrowth>;

enum class DataSign { Nonnegative, TwoSided };

struct GrowthSpec {
  GrowthFamily family;
  double c0 = 1.0;
  DataSign sign = DataSign::Nonnegative;
  int dimension = 1;
};

inline void validate(const GrowthSpec& g) {
  auto pos = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string("growth parameter ") + what + " must be positive");
    }
  };
  pos(g.c0, "c0");
  if (g.dimension < 1) throw InvalidArgument("growth dimension must be >= 1");
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ExpPowerGrowth>) {
          pos(f.gamma, "gamma");
          if (!std::isfinite(f.alpha)) throw InvalidArgument("growth alpha must be finite");
        } else if constexpr (std::is_same_v<T, CriticalPerturbedGrowth>) {
          pos(f.gamma, "gamma");
          if (!(f.alpha_lo < 0.0 && 0.0 < f.beta_hi)) {
            throw InvalidArgument("perturbation band needs alpha_lo < 0 < beta_hi");
          }
        } else if constexpr (std::is_same_v<T, XLogXGrowth> || std::is_same_v<T, XSqrtLogXGrowth>) {
          pos(f.alpha, "alpha");
        } else {
          pos(f.gamma, "gamma");
        }
      },
      g.family);
}

/// ln u0(x) / c0, i.e. the log of the growth profile.
inline double log_profile(const GrowthSpec& g, double x) {
  const double s = std::abs(x);
  const double sqrt_log = std::sqrt(std::max(std::log(s), 0.0));
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerGrowth>) {
          return std::log1p(std::pow(s, f.gamma));
        } else if constexpr (std::is_same_v<T, ExpGrowth>) {
          return f.gamma * s;
        } else if constexpr (std::is_same_v<T, ExpPowerGrowth>) {
          return f.gamma * s + (g.dimension + f.alpha) * std::log1p(s);
        } else if constexpr (std::is_same_v<T, XLogXGrowth>) {
          return f.alpha * s * std::log1p(s);
        } else if constexpr (std::is_same_v<T, XSqrtLogXGrowth>) {
          return f.alpha * s * sqrt_log;
        } else {
          const double slope = f.profile == BandProfile::Upper   ? f.beta_hi
                               : f.profile == BandProfile::Lower ? f.alpha_lo
                                                                 : 0.0;
          return f.gamma * s * sqrt_log + slope * s;
        }
      },
      g.family);
}

inline double evaluate(const GrowthSpec& g, double x) { return g.c0 * std::exp(log_profile(g, x)); }

inline GridFunction sample_growth(const GrowthSpec& g, const Grid& grid) {
  return sample([&](double x) { return evaluate(g, x); }, grid);
}

inline std::string growth_name(const GrowthSpec& g) {
  static constexpr const char* names[] = {"power", "exp", "exppower",
                                          "xlogx", "xsqrtlogx", "critical"};
  return names[g.family.index()];
}

inline const char* to_string(BandProfile p) {
  return p == BandProfile::Upper ? "upper" : p == BandProfile::Lower ? "lower" : "zero";
}

inline std::string to_string(const GrowthSpec& g) {
  std::ostringstream os;
  os << "growth=" << growth_name(g);
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerGrowth> || std::is_same_v<T, ExpGrowth>) {
          os << " gamma=" << format_double(f.gamma);
        } else if constexpr (std::is_same_v<T, ExpPowerGrowth>) {
          os << " gamma=" << format_double(f.gamma) << " alpha=" << format_double(f.alpha);
        } else if constexpr (std::is_same_v<T, CriticalPerturbedGrowth>) {
          os << " gamma=" << format_double(f.gamma) << " lo=" << format_double(f.alpha_lo)
             << " hi=" << format_double(f.beta_hi) << " profile=" << to_string(f.profile);
        } else {
          os << " alpha=" << format_double(f.alpha);
        }
      },
      g.family);
  os << " c0=" << format_double(g.c0)
     << " sign=" << (g.sign == DataSign::Nonnegative ? "nonneg" : "twosided")
     << " N=" << g.dimension;
  return os.str();
}

}  // namespace nlheat
