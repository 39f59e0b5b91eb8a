#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nlheat/analysis.hpp"
#include "nlheat/evolution.hpp"

using namespace nlheat;

namespace {

template <typename F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

std::vector<double> radii_5_to_40() {
  std::vector<double> r;
  for (int R = 5; R <= 40; R += 5) r.push_back(R);
  return r;
}

}  // namespace

// --- barriers --------------------------------------------------------------

TEST(AnalyticLambda, UniformExpBarrier) {
  EXPECT_NEAR(analytic_lambda(uniform_kernel(1.0), ExpBarrier{1.0}), std::numbers::e - 1.0, 1e-14);
}

TEST(AnalyticLambda, PowerTailPowerBarrier) {
  const KernelSpec k = power_tail_kernel(3.0);
  // m2 = 2 * (3/2) \int_0^inf y^2 (1+y)^{-4} dy = 3 * B(3, 1) = 3 * (1/3) = 1
  const double m2 = 3.0 * simpson([](double th) {
    const double y = std::tan(th);
    return y * y * std::pow(1.0 + y, -4.0) / std::pow(std::cos(th), 2);
  }, 0.0, std::numbers::pi / 2 - 1e-9, 200000);
  EXPECT_NEAR(m2, 1.0, 1e-6);
  EXPECT_NEAR(analytic_lambda(k, PowerBarrier{2.0}), 4.0 * std::max(1.0, m2), 1e-5);
}

TEST(AnalyticLambda, CriticalExpBarrierDiverges) {
  EXPECT_THROW(analytic_lambda(exponential_tail_kernel(1.0), ExpBarrier{1.0}), MomentDiverges);
  EXPECT_THROW(analytic_lambda(power_tail_kernel(2.0), PowerBarrier{2.0}), MomentDiverges);
  EXPECT_THROW(analytic_lambda(tempered_stable_kernel(1.0, 0.5), TemperedBarrier{1.0, 0.5}),
               MomentDiverges);
}

TEST(AnalyticLambda, TemperedBarrierClosedFormAtCriticalRate) {
  // at gamma = gamma0 the integrand is C (1+y)^{alpha - alpha0 - 1}: 2C / (alpha0 - alpha)
  const KernelSpec k = tempered_stable_kernel(1.0, 0.5);
  const double lambda = analytic_lambda(k, TemperedBarrier{1.0, 0.25});
  EXPECT_NEAR(lambda, std::pow(2.0, 1.25) * 2.0 * k.normalizer / 0.25, 1e-12);
}

TEST(NumericLambda, BelowAnalyticForLemmaPairings) {
  const Grid g = make_grid(50.0, 0.05);
  struct Case {
    KernelSpec k;
    Barrier b;
  };
  for (const Case& c : {Case{power_tail_kernel(3.0), PowerBarrier{1.5}},
                        Case{exponential_tail_kernel(1.0), ExpBarrier{0.9}},
                        Case{tempered_stable_kernel(1.0, 0.5), TemperedBarrier{1.0, 0.45}},
                        Case{uniform_kernel(1.0), ExpBarrier{1.0}}}) {
    const BarrierCheck r = verify_barrier(c.k, c.b, g);
    EXPECT_TRUE(r.passed) << to_string(c.b);
    EXPECT_LE(r.measured.lambda_hat, r.lambda_analytic + kBarrierSlack);
    EXPECT_GT(r.measured.lambda_hat, 0.0);
  }
}

TEST(NumericLambda, UniformQuadraticIsDiscreteSecondMoment) {
  // J*(1+x^2) - (1+x^2) = m2 exactly, so (J*f - f)/f peaks at x = 0 with value m2
  const double h = 0.05;
  const Grid g = make_grid(10.0, h);
  const BarrierMeasurement m = numeric_lambda(discretize(uniform_kernel(1.0), g).density, PowerBarrier{2.0});
  EXPECT_NEAR(m.lambda_hat, 1.0 / 3.0 + h * h / 6.0, 1e-12);
  EXPECT_EQ(m.argmax, 0.0);
}

TEST(NumericLambda, KernelFillingTheGridFallsBackToHalfCollar) {
  const Grid g = make_grid(1.0, 0.05);
  const BarrierMeasurement m = numeric_lambda(discretize(uniform_kernel(1.0), g).density, ExpBarrier{1.0});
  EXPECT_DOUBLE_EQ(m.collar, 0.5);
}

// --- classification ----------------------------------------------------------

TEST(Classify, CompactXLogX) {
  EXPECT_EQ(classify(uniform_kernel(1.0), {XLogXGrowth{0.5}}).outcome, Outcome::Exists);
  EXPECT_EQ(classify(uniform_kernel(1.0), {XLogXGrowth{2.0}}).outcome, Outcome::NotExists);
  EXPECT_EQ(classify(uniform_kernel(1.0), {XLogXGrowth{1.0}}).outcome, Outcome::OutsideTheory);
  EXPECT_EQ(classify(bump_kernel(2.0), {XLogXGrowth{0.4}}).outcome, Outcome::Exists);
  EXPECT_EQ(classify(bump_kernel(2.0), {XLogXGrowth{0.6}}).outcome, Outcome::NotExists);
}

TEST(Classify, GaussianBranches) {
  const KernelSpec g = gaussian_kernel(1.0);
  EXPECT_EQ(classify(g, {XSqrtLogXGrowth{0.5}}).outcome, Outcome::Exists);
  EXPECT_EQ(classify(g, {XSqrtLogXGrowth{2.0}}).outcome, Outcome::NotExists);
  EXPECT_EQ(classify(g, {CriticalPerturbedGrowth{1.0, -0.1, 0.1}}).outcome, Outcome::BlowsUpFiniteTime);
  EXPECT_EQ(classify(g, {XLogXGrowth{0.5}}).outcome, Outcome::OutsideTheory);
}

TEST(Classify, SlowKernelsCarryBarriers) {
  const Verdict v = classify(power_tail_kernel(3.0), {PowerGrowth{2.0}});
  EXPECT_EQ(v.outcome, Outcome::Exists);
  ASSERT_TRUE(v.barrier.has_value());
  ASSERT_TRUE(v.lambda.has_value());
  EXPECT_NEAR(*v.lambda, analytic_lambda(power_tail_kernel(3.0), PowerBarrier{2.0}), 1e-12);
  EXPECT_EQ(classify(power_tail_kernel(3.0), {PowerGrowth{3.0}}).outcome, Outcome::NotExists);
  EXPECT_EQ(classify(exponential_tail_kernel(1.0), {ExpGrowth{0.5}}).outcome, Outcome::Exists);
  EXPECT_EQ(classify(exponential_tail_kernel(1.0), {ExpGrowth{1.0}}).outcome, Outcome::NotExists);
  EXPECT_EQ(classify(tempered_stable_kernel(1.0, 0.5), {ExpPowerGrowth{1.0, 0.25}}).outcome,
            Outcome::Exists);
  EXPECT_EQ(classify(tempered_stable_kernel(1.0, 0.5), {ExpPowerGrowth{1.0, 0.5}}).outcome,
            Outcome::NotExists);
  EXPECT_TRUE(classify(power_tail_kernel(3.0), {PowerGrowth{3.0}}).divergent_functional.has_value());
}

TEST(Classify, AmplitudeNeverMatters) {
  for (double c0 : {1e-6, 1.0, 1e6}) {
    GrowthSpec g{XLogXGrowth{0.5}};
    g.c0 = c0;
    EXPECT_EQ(classify(uniform_kernel(1.0), g).outcome, Outcome::Exists);
  }
}

TEST(Classify, TwoSidedDataLeavesNonexistenceBranches) {
  GrowthSpec g{XLogXGrowth{2.0}};
  g.sign = DataSign::TwoSided;
  EXPECT_EQ(classify(uniform_kernel(1.0), g).outcome, Outcome::OutsideTheory);
  GrowthSpec e{XLogXGrowth{0.5}};
  e.sign = DataSign::TwoSided;
  EXPECT_EQ(classify(uniform_kernel(1.0), e).outcome, Outcome::Exists);
}

TEST(Classify, CheckedRunsTheBarrier) {
  const Verdict v = classify_checked(exponential_tail_kernel(1.0), {ExpGrowth{0.5}}, make_grid(50.0, 0.05));
  EXPECT_TRUE(v.barrier_verified);
}

// --- lower bound certificate ---------------------------------------------

TEST(LowerBound, UniformHolds) {
  const Grid g = make_grid(12.0, 0.01);
  const IteratedConvolutions its = iterate(discretize(uniform_kernel(1.0), g).density, 10);
  const LowerBoundCert c = lower_bound_cert(its, 0.5, 10);
  EXPECT_TRUE(c.holds());
  EXPECT_GT(c.c, 0.0);
  EXPECT_GT(c.mu, 0.0);
  EXPECT_LT(c.mu, 1.0);
  for (int n = 1; n <= 10; ++n) EXPECT_GE(c.minima[n], c.c * std::pow(c.mu, n) * (1 - 1e-12));
}

TEST(LowerBound, SigmaMustBeBelowRho) {
  const Grid g = make_grid(12.0, 0.01);
  const IteratedConvolutions its = iterate(discretize(uniform_kernel(1.0), g).density, 4);
  EXPECT_THROW(lower_bound_cert(its, 1.0, 4), InvalidArgument);
  EXPECT_THROW(lower_bound_cert(its, 1.5, 4), InvalidArgument);
}

TEST(LowerBound, GaussianHolds) {
  const Grid g = make_grid(20.0, 0.02);
  const IteratedConvolutions its = iterate(discretize(gaussian_kernel(1.0), g).density, 10);
  EXPECT_TRUE(lower_bound_cert(its, 1.0, 10).holds());
}

// --- envelope fits and the blow-up bracket --------------------------------

TEST(EstimateFit, UniformSlopeApproachesOneOverRho) {
  const EstimateFit f = fit_estimates(uniform_kernel(1.0), make_grid(60.0, 0.05), {1.0}, 0.5);
  EXPECT_GT(f.slope, 0.8);
  EXPECT_LT(f.slope, 1.2);
  EXPECT_EQ(f.exponent_lower, 2.0);
  EXPECT_EQ(f.exponent_upper, 1.0);
  for (const FitPoint& p : f.points) {
    EXPECT_LE(p.lower_env, p.ln_omega + 1e-9 * std::abs(p.ln_omega));
    EXPECT_GE(p.upper_env, p.ln_omega - 1e-9 * std::abs(p.ln_omega));
  }
  // a wider window keeps the slope in the same band
  const EstimateFit wide = fit_estimates(uniform_kernel(1.0), make_grid(80.0, 0.05), {1.0}, 0.5,
                                         {5.0, 40.0, 0});
  EXPECT_GT(wide.slope, 0.8);
  EXPECT_LT(wide.slope, 1.2);
}

TEST(EstimateFit, SeveralTimesShareTheEnvelope) {
  const EstimateFit f = fit_estimates(uniform_kernel(1.0), make_grid(60.0, 0.05), {0.5, 1.0, 2.0}, 0.5);
  EXPECT_EQ(f.times.size(), 3u);
  EXPECT_GT(f.c1, 0.0);
  EXPECT_GT(f.c3, 0.0);
}

TEST(EstimateFit, Validation) {
  const Grid g = make_grid(60.0, 0.05);
  EXPECT_THROW(fit_estimates(uniform_kernel(1.0), g, {1.0}, 1.0), InvalidArgument);
  EXPECT_THROW(fit_estimates(uniform_kernel(1.0), g, {1.0}, 0.5, {2.0, 15.0, 0}), InvalidArgument);
  EXPECT_THROW(fit_estimates(uniform_kernel(1.0), g, {1.0}, 0.5, {5.0, 40.0, 0}), DomainTooSmall);
  EXPECT_THROW(fit_estimates(power_tail_kernel(2.0), g, {1.0}, 0.5), InvalidArgument);
}

TEST(BlowupBracket, Properties) {
  const EstimateFit f = fit_estimates(gaussian_kernel(1.0), make_grid(60.0, 0.05), {1.0}, 0.0);
  const BlowupBracket b = blowup_bracket(1.0, -0.3, 0.3, f);
  EXPECT_LT(b.t_lo, b.t_hi);
  EXPECT_NEAR(b.t_lo, std::exp(-0.3 - f.c4), 1e-14);
  EXPECT_NEAR(b.t_hi, std::exp(0.3 - f.c2), 1e-14);
  const BlowupBracket wider = blowup_bracket(1.0, -0.3, 0.6, f);
  EXPECT_LT(wider.t_lo, b.t_lo);
  const BlowupBracket narrow = blowup_bracket(1.0, -0.1, 0.1, f);
  EXPECT_LT(narrow.t_hi / narrow.t_lo, b.t_hi / b.t_lo);
  EXPECT_THROW(blowup_bracket(1.0, 0.1, 0.3, f), InvalidArgument);
  EXPECT_THROW(blowup_bracket(2.0, -0.1, 0.1, f), InvalidArgument);
}

// --- divergence probe ---------------------------------------------------------

TEST(Probe, UniformExistenceAndNonexistence) {
  const Grid g = make_grid(60.0, 0.05);
  EXPECT_EQ(divergence_probe(uniform_kernel(1.0), {XLogXGrowth{0.5}}, g, 1.0, radii_5_to_40()).flag,
            ProbeFlag::Saturating);
  const ProbeResult d = divergence_probe(uniform_kernel(1.0), {XLogXGrowth{2.0}}, g, 1.0, radii_5_to_40());
  EXPECT_EQ(d.flag, ProbeFlag::Diverging);
  EXPECT_GT(d.span_ratio, 10.0);
  for (std::size_t k = 1; k < d.values.size(); ++k) EXPECT_GT(d.values[k], d.values[k - 1]);
}

TEST(Probe, ValuesMatchMinimalSolutionAtOrigin) {
  // V_R is the omega part of the truncated solution at x = 0
  const Grid g = make_grid(30.0, 0.05);
  const GrowthSpec data{XLogXGrowth{0.5}};
  const ProbeResult p = divergence_probe(uniform_kernel(1.0), data, g, 1.0, {5.0, 10.0}, {10, 10, 1e-6, 20});
  const OmegaExpansion w = omega(uniform_kernel(1.0), g, 1.0, 1e-14);
  const GridFunction u0 = truncate_to_ball(sample_growth(data, g), 10.0);
  const double direct = convolve_direct(w.values, u0)[g.center()];
  EXPECT_NEAR(p.values[1], direct, 1e-9 * direct);
}

TEST(Probe, Validation) {
  const Grid g = make_grid(40.0, 0.05);
  GrowthSpec two{XLogXGrowth{0.5}};
  two.sign = DataSign::TwoSided;
  EXPECT_THROW(divergence_probe(uniform_kernel(1.0), two, g, 1.0, {5.0}), InvalidArgument);
  EXPECT_THROW(divergence_probe(uniform_kernel(1.0), {XLogXGrowth{0.5}}, g, 1.0, {10.0, 5.0}), InvalidArgument);
  EXPECT_THROW(divergence_probe(gaussian_kernel(1.0), {XSqrtLogXGrowth{0.5}}, g, 1.0, {30.0}), DomainTooSmall);
}
