#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "nlheat/error.hpp"
#include "nlheat/grid.hpp"

namespace nlheat {

// Convolution on the grid with zero extension outside [-L, L]:
//   (f*g)(x_i) = h * sum_j f(x_j) g(x_i - x_j).

inline GridFunction convolve_direct(const GridFunction& f, const GridFunction& g) {
  f.require_same(g);
  const std::size_t n = f.size();
  const std::size_t c = f.grid().center();
  const double h = f.grid().spacing();
  auto nz = [](std::span<const double> v) {
    std::size_t lo = 0, hi = v.size();
    while (lo < hi && v[lo] == 0.0) ++lo;
    while (hi > lo && v[hi - 1] == 0.0) --hi;
    return std::pair{lo, hi};
  };
  const auto [flo, fhi] = nz(f.values());
  const auto [glo, ghi] = nz(g.values());
  std::vector<double> out(n, 0.0);
  for (std::size_t k = glo; k < ghi; ++k) {
    const double gk = g[k];
    if (gk == 0.0) continue;
    // i = j + k - c must lie in [0, n)
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(c);
    const std::ptrdiff_t jlo = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(flo), -shift);
    const std::ptrdiff_t jhi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(fhi),
                                                        static_cast<std::ptrdiff_t>(n) - shift);
    for (std::ptrdiff_t j = jlo; j < jhi; ++j) out[static_cast<std::size_t>(j + shift)] += f[j] * gk;
  }
  for (double& v : out) v *= h;
  return GridFunction(f.grid(), std::move(out));
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

inline std::size_t padded_length(std::size_t n) {
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  return m;
}

}  // namespace detail

/// Linear convolution against a fixed kernel by zero-padded real FFTs. The
/// kernel spectrum and plans are built once; apply() reuses the work buffers,
/// so one instance must not be shared between threads.
class FftConvolver {
 public:
  explicit FftConvolver(const GridFunction& kernel)
      : grid_(kernel.grid()),
        n_(kernel.size()),
        m_(detail::padded_length(kernel.size())),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * m_))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (m_ / 2 + 1)))),
        kernel_spec_(m_ / 2 + 1) {
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_.get(), spec_.get(),
                                          FFTW_ESTIMATE));
      backward_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_.get(), real_.get(),
                                           FFTW_ESTIMATE));
    }
    load(kernel);
    fftw_execute(forward_.get());
    for (std::size_t k = 0; k < m_ / 2 + 1; ++k) {
      kernel_spec_[k] = {spec_.get()[k][0], spec_.get()[k][1]};
    }
  }

  const Grid& grid() const noexcept { return grid_; }

  GridFunction apply(const GridFunction& f) {
    if (!(f.grid() == grid_)) throw IncompatibleGrids();
    load(f);
    fftw_execute(forward_.get());
    auto* s = spec_.get();
    for (std::size_t k = 0; k < m_ / 2 + 1; ++k) {
      const std::complex<double> z = std::complex<double>(s[k][0], s[k][1]) * kernel_spec_[k];
      s[k][0] = z.real();
      s[k][1] = z.imag();
    }
    fftw_execute(backward_.get());
    const double scale = grid_.spacing() / static_cast<double>(m_);
    const std::size_t c = grid_.center();
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_.get()[i + c] * scale;
    return GridFunction(grid_, std::move(out));
  }

 private:
  void load(const GridFunction& f) {
    double* r = real_.get();
    std::copy(f.values().begin(), f.values().end(), r);
    std::fill(r + n_, r + m_, 0.0);
  }

  Grid grid_;
  std::size_t n_;
  std::size_t m_;
  std::unique_ptr<double, detail::FftwFree> real_;
  std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
  std::vector<std::complex<double>> kernel_spec_;
  detail::FftwPlan forward_;
  detail::FftwPlan backward_;
};

inline GridFunction convolve_fft(const GridFunction& f, const GridFunction& g) {
  f.require_same(g);
  return FftConvolver(g).apply(f);
}

/// Largest |x_i| with |g(x_i)| > threshold; 0 if there is none.
inline double support_radius(const GridFunction& g, double threshold = 1e-14) {
  if (!(threshold > 0.0)) throw InvalidArgument("support_radius: threshold must be positive");
  double r = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) > threshold) r = std::max(r, std::abs(g.x(i)));
  }
  return r;
}

/// Discrete delta: 1/h at x = 0.
inline GridFunction discrete_delta(const Grid& grid) {
  GridFunction d(grid);
  d[grid.center()] = 1.0 / grid.spacing();
  return d;
}

enum class ConvolutionMethod { Fft, Direct };

inline constexpr double kSupportThreshold = 1e-14;
inline constexpr double kMaxTruncationLoss = 1e-9;

/// J^{*0} = delta, J^{*1} = J, ..., J^{*n_max} with per-term bookkeeping.
struct IteratedConvolutions {
  Grid grid;
  ConvolutionMethod method = ConvolutionMethod::Fft;
  std::vector<GridFunction> terms;
  std::vector<double> masses;
  std::vector<double> support_radii;
  std::vector<double> mass_deficits;  // 1 - mass, clipped at 0

  int n_max() const { return static_cast<int>(terms.size()) - 1; }
  const GridFunction& operator[](std::size_t n) const { return terms.at(n); }
};

namespace detail {

inline double second_moment(const GridFunction& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.x(i) * g.x(i) * g[i];
  return s * g.grid().spacing();
}

}  // namespace detail

/// Smallest half extent expected to keep the truncation loss of J^{*n}
/// below kMaxTruncationLoss.
inline double minimal_half_extent_for(const GridFunction& J, int n) {
  const double L = J.grid().half_extent();
  const double h = J.grid().spacing();
  const double r = support_radius(J, kSupportThreshold);
  double need;
  if (r < L - 0.5 * h) {
    need = n * r + h;
  } else {
    need = 6.2 * std::sqrt(n * detail::second_moment(J)) + r;
  }
  return std::max(need, 1.1 * L);
}

inline IteratedConvolutions iterate(const GridFunction& J, int n_max,
                                    ConvolutionMethod method = ConvolutionMethod::Fft,
                                    double max_loss = kMaxTruncationLoss) {
  if (n_max < 0) throw InvalidArgument("iterate: n_max must be >= 0");
  const bool nonneg =
      std::all_of(J.values().begin(), J.values().end(), [](double v) { return v >= 0.0; });
  IteratedConvolutions it;
  it.grid = J.grid();
  it.method = method;
  auto record = [&](GridFunction g) {
    const double m = integrate(g);
    it.masses.push_back(m);
    it.mass_deficits.push_back(std::max(0.0, 1.0 - m));
    it.support_radii.push_back(support_radius(g, kSupportThreshold));
    it.terms.push_back(std::move(g));
  };
  record(discrete_delta(J.grid()));
  if (n_max >= 1) record(J);
  std::unique_ptr<FftConvolver> fft;
  if (method == ConvolutionMethod::Fft && n_max >= 2) fft = std::make_unique<FftConvolver>(J);
  for (int n = 2; n <= n_max; ++n) {
    GridFunction next = fft ? fft->apply(it.terms.back()) : convolve_direct(it.terms.back(), J);
    if (nonneg) {
      // convolution of nonnegative data: negative values are transform round-off
      for (double& v : next.values()) v = std::max(v, 0.0);
    }
    record(std::move(next));
  }
  if (n_max >= 1 && it.mass_deficits.back() > max_loss) {
    throw DomainTooSmall("truncation loss " + format_double(it.mass_deficits.back()) +
                             " of J^{*" + std::to_string(n_max) + "} exceeds bound",
                         minimal_half_extent_for(J, n_max));
  }
  return it;
}

}  // namespace nlheat
