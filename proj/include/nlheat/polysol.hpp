#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "nlheat/error.hpp"
#include "nlheat/kernels.hpp"

namespace nlheat {

using Rational = boost::multiprecision::cpp_rational;

/// a[0] + a[1] x^2 + ... + a[d] x^{2d}; trailing zeros are trimmed.
template <typename T>
class EvenPolynomial {
 public:
  EvenPolynomial() = default;
  explicit EvenPolynomial(std::vector<T> coeffs) : a_(std::move(coeffs)) { trim(); }

  static EvenPolynomial monomial(int j, T coeff = T(1)) {
    std::vector<T> a(static_cast<std::size_t>(j) + 1, T(0));
    a.back() = coeff;
    return EvenPolynomial(std::move(a));
  }

  bool is_zero() const { return a_.empty(); }
  /// Degree in x (2d), or -1 for the zero polynomial.
  int degree() const { return a_.empty() ? -1 : 2 * (static_cast<int>(a_.size()) - 1); }
  /// Coefficient of x^{2j}.
  T coeff(int j) const {
    return j >= 0 && j < static_cast<int>(a_.size()) ? a_[static_cast<std::size_t>(j)] : T(0);
  }
  const std::vector<T>& coeffs() const { return a_; }

  EvenPolynomial& operator+=(const EvenPolynomial& o) {
    if (o.a_.size() > a_.size()) a_.resize(o.a_.size(), T(0));
    for (std::size_t j = 0; j < o.a_.size(); ++j) a_[j] += o.a_[j];
    trim();
    return *this;
  }
  EvenPolynomial& operator-=(const EvenPolynomial& o) {
    if (o.a_.size() > a_.size()) a_.resize(o.a_.size(), T(0));
    for (std::size_t j = 0; j < o.a_.size(); ++j) a_[j] -= o.a_[j];
    trim();
    return *this;
  }
  EvenPolynomial& operator*=(const T& s) {
    for (auto& v : a_) v *= s;
    trim();
    return *this;
  }
  EvenPolynomial& operator/=(const T& s) {
    for (auto& v : a_) v /= s;
    trim();
    return *this;
  }
  friend EvenPolynomial operator+(EvenPolynomial a, const EvenPolynomial& b) { return a += b; }
  friend EvenPolynomial operator-(EvenPolynomial a, const EvenPolynomial& b) { return a -= b; }
  friend bool operator==(const EvenPolynomial& a, const EvenPolynomial& b) { return a.a_ == b.a_; }

  double operator()(double x) const {
    const double x2 = x * x;
    double s = 0.0;
    for (std::size_t j = a_.size(); j-- > 0;) s = s * x2 + to_double(a_[j]);
    return s;
  }

  static double to_double(const T& v) {
    if constexpr (std::is_same_v<T, double>) {
      return v;
    } else {
      return v.template convert_to<double>();
    }
  }

 private:
  void trim() {
    while (!a_.empty() && a_.back() == T(0)) a_.pop_back();
  }
  std::vector<T> a_;
};

namespace detail {

inline std::int64_t binomial(int n, int k) {
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// Exact moment table of the uniform kernel on [-rho, rho]: m_{2k} = rho^{2k}/(2k+1).
inline MomentTable<Rational> exact_moment_table(const Rational& rho,
                                                int max_order = kDefaultMaxMomentOrder) {
  if (rho <= 0) throw InvalidArgument("exact_moment_table: rho must be positive");
  if (max_order < 0 || max_order % 2 != 0) throw InvalidArgument("max order must be even");
  MomentTable<Rational> t;
  Rational pw = 1;
  for (int k = 0; 2 * k <= max_order; ++k) {
    t.even.push_back(pw / (2 * k + 1));
    t.method.push_back(MomentMethod::ClosedForm);
    pw *= rho * rho;
  }
  return t;
}

/// J*q - q for an even polynomial q, using
///   J*x^{2j} - x^{2j} = sum_{i<j} C(2j, 2i) m_{2(j-i)} x^{2i}.
template <typename T>
EvenPolynomial<T> moment_convolve(const EvenPolynomial<T>& q, const MomentTable<T>& m) {
  const int d = q.degree() / 2;
  std::vector<T> out(static_cast<std::size_t>(std::max(d, 0)), T(0));
  for (int j = 1; j <= d; ++j) {
    const T aj = q.coeff(j);
    if (aj == T(0)) continue;
    for (int i = 0; i < j; ++i) {
      out[static_cast<std::size_t>(i)] += aj * T(detail::binomial(2 * j, 2 * i)) * m.at(2 * (j - i));
    }
  }
  return EvenPolynomial<T>(std::move(out));
}

/// u(x,t) = x^{2p} + sum_{k=1}^p c_k(x) t^k / k.
template <typename T>
struct PolySolution {
  int p = 0;
  std::vector<EvenPolynomial<T>> c;  // c[k] for k = 1..p; c[0] unused (zero)
  MomentTable<T> moments;
  EvenPolynomial<T> next;             // (J*c_p - c_p)/p, zero when the recursion terminates
  std::vector<EvenPolynomial<T>> residual;  // coefficient of t^k in u_t - (J*u - u), k = 0..p
};

template <typename T>
bool residual_is_zero(const PolySolution<T>& s) {
  for (const auto& r : s.residual) {
    if (!r.is_zero()) return false;
  }
  return true;
}

/// Largest |coefficient| in the PDE residual; 0 for an exact solution.
template <typename T>
double residual_max_abs(const PolySolution<T>& s) {
  double m = 0.0;
  for (const auto& r : s.residual) {
    for (const auto& v : r.coeffs()) m = std::max(m, std::abs(EvenPolynomial<T>::to_double(v)));
  }
  return m;
}

template <typename T>
PolySolution<T> explicit_solution(int p, const MomentTable<T>& m) {
  if (p < 1) throw InvalidArgument("explicit_solution: p must be >= 1");
  if (m.max_order() < 2 * p) {
    throw MomentTableError("explicit_solution: need moments up to order " + std::to_string(2 * p));
  }
  PolySolution<T> s;
  s.p = p;
  s.moments = m;
  const auto u0 = EvenPolynomial<T>::monomial(p);
  s.c.resize(static_cast<std::size_t>(p) + 1);
  s.c[1] = moment_convolve(u0, m);
  for (int k = 2; k <= p; ++k) {
    s.c[static_cast<std::size_t>(k)] = moment_convolve(s.c[static_cast<std::size_t>(k - 1)], m);
    s.c[static_cast<std::size_t>(k)] /= T(k - 1);
  }
  s.next = moment_convolve(s.c[static_cast<std::size_t>(p)], m);
  s.next /= T(p);

  // u_t = sum_k c_k t^{k-1};  J*u - u = L(x^{2p}) + sum_k L(c_k) t^k / k
  s.residual.resize(static_cast<std::size_t>(p) + 1);
  for (int k = 0; k <= p; ++k) {
    EvenPolynomial<T> ut = k < p ? s.c[static_cast<std::size_t>(k + 1)] : EvenPolynomial<T>();
    EvenPolynomial<T> rhs =
        k == 0 ? moment_convolve(u0, m) : moment_convolve(s.c[static_cast<std::size_t>(k)], m);
    if (k > 0) rhs /= T(k);
    s.residual[static_cast<std::size_t>(k)] = ut - rhs;
  }

  for (int k = 1; k <= p; ++k) {
    if (s.c[static_cast<std::size_t>(k)].degree() != 2 * (p - k)) {
      throw InternalConsistency("explicit_solution: c_" + std::to_string(k) +
                                " has unexpected degree");
    }
  }
  if constexpr (!std::is_same_v<T, double>) {
    if (!s.next.is_zero()) throw InternalConsistency("explicit_solution: recursion did not terminate");
    if (!residual_is_zero(s)) throw InternalConsistency("explicit_solution: nonzero PDE residual");
  } else {
    if (s.next.degree() > 0) throw InternalConsistency("explicit_solution: recursion did not terminate");
  }
  return s;
}

template <typename T>
double evaluate_solution(const PolySolution<T>& s, double x, double t) {
  double u = std::pow(x, 2 * s.p);
  double tk = 1.0;
  for (int k = 1; k <= s.p; ++k) {
    tk *= t;
    u += s.c[static_cast<std::size_t>(k)](x) * tk / k;
  }
  return u;
}

/// (p, c_p / p): the t^p coefficient of u.
template <typename T>
std::pair<int, T> leading_term(const PolySolution<T>& s) {
  return {s.p, s.c[static_cast<std::size_t>(s.p)].coeff(0) / T(s.p)};
}

inline std::string format_coefficient(const Rational& v) { return v.str(); }

inline std::string format_coefficient(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

template <typename T>
std::string format_polynomial(const EvenPolynomial<T>& q) {
  if (q.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int j = q.degree() / 2; j >= 0; --j) {
    const T a = q.coeff(j);
    if (a == T(0)) continue;
    const bool neg = a < T(0);
    const T mag = neg ? T(-a) : a;
    os << (first ? (neg ? "-" : "") : (neg ? " - " : " + "));
    first = false;
    if (j == 0) {
      os << format_coefficient(mag);
    } else {
      if (mag != T(1)) os << format_coefficient(mag) << " ";
      os << "x^" << 2 * j;
    }
  }
  return os.str();
}

/// Human-readable form, e.g. "x^2 + (1/3) t" or "x^4 + (2 x^2 + 1/5) t + (1/3) t^2".
template <typename T>
std::string format_solution(const PolySolution<T>& s) {
  std::ostringstream os;
  os << "x^" << 2 * s.p;
  for (int k = 1; k <= s.p; ++k) {
    EvenPolynomial<T> term = s.c[static_cast<std::size_t>(k)];
    term /= T(k);
    if (term.is_zero()) continue;
    os << " + ";
    if (!(term.degree() == 0 && term.coeff(0) == T(1))) os << "(" << format_polynomial(term) << ") ";
    os << "t";
    if (k > 1) os << "^" << k;
  }
  return os.str();
}

/// (2p-1)!! m2^p.
template <typename T>
T double_factorial_leading(int p, const T& m2) {
  T r = 1;
  for (int i = 1; i <= p; ++i) r *= T(2 * i - 1) * m2;
  return r;
}

}  // namespace nlheat
