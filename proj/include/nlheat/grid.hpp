#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlheat/error.hpp"

namespace nlheat {

/// Uniform symmetric grid x_i = -L + i*h, i = 0..n-1, with n = 2*half_count + 1.
/// x = 0 is always the centre node.
class Grid {
 public:
  Grid() = default;

  static Grid from_half_count(std::size_t half_count, double spacing) {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
      throw InvalidArgument("grid spacing must be positive and finite");
    }
    if (half_count == 0) throw InvalidArgument("grid needs at least one node on each side of 0");
    Grid g;
    g.spacing_ = spacing;
    g.half_count_ = half_count;
    return g;
  }

  double half_extent() const noexcept { return static_cast<double>(half_count_) * spacing_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t half_count() const noexcept { return half_count_; }
  std::size_t size() const noexcept { return 2 * half_count_ + 1; }
  std::size_t center() const noexcept { return half_count_; }

  // (i - c) * h is exactly antisymmetric in IEEE arithmetic, so x_i = -x_{n-1-i}.
  double node(std::size_t i) const noexcept {
    return (static_cast<double>(i) - static_cast<double>(half_count_)) * spacing_;
  }

  std::vector<double> nodes() const {
    std::vector<double> x(size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = node(i);
    return x;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.half_count_ == b.half_count_ && a.spacing_ == b.spacing_;
  }

 private:
  double spacing_ = 1.0;
  std::size_t half_count_ = 1;
};

/// Builds a grid on [-L, L] with spacing h. L is rounded up (never down) to a
/// whole number of spacings so that the node count is odd and 0 is a node.
inline Grid make_grid(double half_extent, double spacing) {
  if (!(half_extent > 0.0) || !(spacing > 0.0) || !std::isfinite(half_extent) ||
      !std::isfinite(spacing)) {
    throw InvalidArgument("make_grid: half_extent and spacing must be positive and finite");
  }
  if (spacing > half_extent) throw InvalidArgument("make_grid: spacing exceeds half_extent");
  const double ratio = half_extent / spacing;
  double steps = std::round(ratio);
  if (steps * spacing < half_extent * (1.0 - 1e-12)) steps = std::ceil(ratio);
  return Grid::from_half_count(static_cast<std::size_t>(steps), spacing);
}

class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(Grid grid) : grid_(grid), values_(grid.size(), 0.0) {}
  GridFunction(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw InvalidArgument("GridFunction: value count does not match grid size");
    }
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double x(std::size_t i) const noexcept { return grid_.node(i); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Value at an arbitrary point inside [-L, L]: exact at nodes, linear in between.
  double value_at(double x) const {
    const double h = grid_.spacing();
    const double L = grid_.half_extent();
    if (std::abs(x) > L * (1.0 + 1e-14)) throw InvalidArgument("value_at: point outside grid");
    const double pos = (x + L) / h;
    const double ip = std::round(pos);
    if (std::abs(pos - ip) < 1e-9) {
      const auto i = static_cast<std::size_t>(std::clamp(ip, 0.0, double(size() - 1)));
      return values_[i];
    }
    const auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, double(size() - 2)));
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
  }

  GridFunction& operator+=(const GridFunction& o) {
    require_same(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    require_same(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  GridFunction& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
  friend GridFunction operator*(GridFunction a, double s) { return a *= s; }

  void require_same(const GridFunction& o) const {
    if (!(grid_ == o.grid_)) throw IncompatibleGrids();
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

template <typename F>
GridFunction sample(F&& f, const Grid& grid) {
  GridFunction g(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    const double v = f(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "sample: non-finite value at node x = " << x;
      throw SamplingError(msg.str(), x);
    }
    g[i] = v;
  }
  return g;
}

/// Trapezoidal rule over [-L, L].
inline double integrate(const GridFunction& g) {
  const auto v = g.values();
  if (v.empty()) return 0.0;
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return g.grid().spacing() * s;
}

inline double sup_norm(const GridFunction& g) {
  double m = 0.0;
  for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double ell1_distance(const GridFunction& a, const GridFunction& b) {
  a.require_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return a.grid().spacing() * s;
}

inline bool is_even(const GridFunction& g, double tol = 0.0) {
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    if (std::abs(g[i] - g[n - 1 - i]) > tol) return false;
  }
  return true;
}

/// Shortest-ish text for a double that round-trips: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV: header row, comma separated, LF line endings.
inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::span<const double>>& columns) {
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << (c ? "," : "") << format_double(columns[c][r]);
    }
    os << '\n';
  }
}

inline void write_csv(std::ostream& os, const GridFunction& g) {
  const auto x = g.grid().nodes();
  write_csv(os, {"x", "value"}, {std::span<const double>(x), g.values()});
}

inline void write_csv(const std::string& path, const GridFunction& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open " + path + " for writing");
  write_csv(os, g);
}

/// Reads a two-column (x, value) CSV. Nodes must form a uniform grid symmetric about 0.
inline GridFunction read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("read_csv: empty input");
  std::vector<double> xs, vs;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InvalidArgument("read_csv: line " + std::to_string(lineno) + " has no comma");
    }
    try {
      xs.push_back(std::stod(line.substr(0, comma)));
      vs.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw InvalidArgument("read_csv: unparsable number on line " + std::to_string(lineno));
    }
  }
  if (xs.size() < 3 || xs.size() % 2 == 0) {
    throw InvalidArgument("read_csv: need an odd number (>= 3) of rows");
  }
  const std::size_t half = xs.size() / 2;
  const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  const Grid grid = Grid::from_half_count(half, h);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::abs(xs[i] - grid.node(i)) > 1e-9 * std::max(1.0, grid.half_extent())) {
      throw InvalidArgument("read_csv: nodes are not a uniform grid symmetric about 0");
    }
  }
  return GridFunction(grid, std::move(vs));
}

inline GridFunction read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open " + path);
  return read_csv(is);
}

}  // namespace nlheat
