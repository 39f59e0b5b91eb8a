#include <cmath>

#include <gtest/gtest.h>

#include "nlheat/evolution.hpp"
#include "nlheat/polysol.hpp"

using namespace nlheat;

namespace {

const MomentTable<Rational>& uniform_moments() {
  static const MomentTable<Rational> m = exact_moment_table(Rational(1), 16);
  return m;
}

}  // namespace

TEST(ExactMoments, UniformTable) {
  const auto& m = uniform_moments();
  EXPECT_EQ(m.at(0), Rational(1));
  EXPECT_EQ(m.at(2), Rational(1, 3));
  EXPECT_EQ(m.at(4), Rational(1, 5));
  EXPECT_EQ(m.at(16), Rational(1, 17));
  // rho^{2k} / (2k + 1)
  const MomentTable<Rational> half = exact_moment_table(Rational(1, 2), 4);
  EXPECT_EQ(half.at(4), Rational(1, 80));
}

TEST(MomentConvolve, Examples) {
  const auto& m = uniform_moments();
  using P = EvenPolynomial<Rational>;
  EXPECT_EQ(moment_convolve(P::monomial(1), m), P({Rational(1, 3)}));
  // x^4 -> 6 m2 x^2 + m4
  EXPECT_EQ(moment_convolve(P::monomial(2), m), P({Rational(1, 5), Rational(2)}));
  EXPECT_TRUE(moment_convolve(P::monomial(0, Rational(7)), m).is_zero());
}

TEST(MomentConvolve, MissingMomentOrder) {
  const MomentTable<Rational> m = exact_moment_table(Rational(1), 2);
  EXPECT_THROW(moment_convolve(EvenPolynomial<Rational>::monomial(2), m), MomentTableError);
}

TEST(ExplicitSolution, LowOrders) {
  const auto& m = uniform_moments();
  EXPECT_EQ(format_solution(explicit_solution(1, m)), "x^2 + (1/3) t");
  const PolySolution<Rational> s2 = explicit_solution(2, m);
  // x^4 + (6 m2 x^2 + m4) t + 3 m2^2 t^2
  EXPECT_EQ(s2.c[1], EvenPolynomial<Rational>({Rational(1, 5), Rational(2)}));
  const auto [deg, lead] = leading_term(s2);
  EXPECT_EQ(deg, 2);
  EXPECT_EQ(lead, Rational(1, 3));
  EXPECT_EQ(format_solution(s2), "x^4 + (2 x^2 + 1/5) t + (1/3) t^2");
}

TEST(ExplicitSolution, ExactTerminationAndResidual) {
  for (int p = 1; p <= 8; ++p) {
    const PolySolution<Rational> s = explicit_solution(p, uniform_moments());
    EXPECT_TRUE(s.next.is_zero()) << p;
    EXPECT_TRUE(residual_is_zero(s)) << p;
    const auto [deg, lead] = leading_term(s);
    EXPECT_EQ(deg, p);
    EXPECT_EQ(lead, double_factorial_leading(p, Rational(1, 3))) << p;
  }
}

TEST(ExplicitSolution, AtTimeZeroIsTheMonomial) {
  const PolySolution<Rational> s = explicit_solution(3, uniform_moments());
  for (double x : {0.0, 0.5, -2.0, 3.0}) EXPECT_EQ(evaluate_solution(s, x, 0.0), std::pow(x, 6));
}

TEST(ExplicitSolution, DoubleMomentsForGaussian) {
  // Gaussian gamma = 1: m2 = 1/2, m4 = 3/4
  const PolySolution<double> s = explicit_solution(2, moment_table(gaussian_kernel(1.0), 4));
  EXPECT_NEAR(s.c[1].coeff(1), 3.0, 1e-14);
  EXPECT_NEAR(s.c[1].coeff(0), 0.75, 1e-14);
  EXPECT_NEAR(leading_term(s).second, 0.75, 1e-14);
  EXPECT_LE(residual_max_abs(s), 1e-14);
}

TEST(ExplicitSolution, MatchesRepresentationSolver) {
  const Grid g = make_grid(20.0, 0.01);
  const PolySolution<Rational> s = explicit_solution(2, uniform_moments());
  const GridFunction u0 = sample([](double x) { return std::pow(x, 4); }, g);
  const SolveResult r = solve_representation(uniform_kernel(1.0), u0, 0.5, 1e-12);
  for (double x : {0.0, 1.0, 2.5, 5.0}) {
    const double exact = evaluate_solution(s, x, 0.5);
    EXPECT_NEAR(r.u.value_at(x), exact, 1e-4 * std::max(1.0, exact)) << x;
  }
}

TEST(ExplicitSolution, RejectsBadOrder) {
  EXPECT_THROW(explicit_solution(0, uniform_moments()), InvalidArgument);
}
