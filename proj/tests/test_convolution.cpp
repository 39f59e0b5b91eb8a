#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nlheat/convolution.hpp"
#include "nlheat/kernels.hpp"

using namespace nlheat;

TEST(ConvolveDirect, UniformSelfConvolutionIsHat) {
  const Grid g = make_grid(3.0, 0.01);
  const GridFunction J = discretize(uniform_kernel(1.0), g).density;
  const GridFunction hat = convolve_direct(J, J);
  // sum h J_j^2 with half-height samples at x = +-1 gives 1/2 - h/8 exactly
  EXPECT_NEAR(hat[g.center()], 0.5 - 0.01 / 8.0, 1e-12);
  EXPECT_NEAR(hat[g.center()], 0.5, 0.01);
  // (2 - |x|)/4 on [-2, 2]
  for (double x : {0.5, 1.0, 1.5, -1.25}) EXPECT_NEAR(hat.value_at(x), (2.0 - std::abs(x)) / 4.0, 1e-4);
  EXPECT_EQ(hat.value_at(2.5), 0.0);
}

TEST(ConvolveDirect, DeltaIsIdentity) {
  const Grid g = make_grid(2.0, 0.1);
  const GridFunction f = sample([](double x) { return std::cos(x) + x; }, g);
  const GridFunction r = convolve_direct(f, discrete_delta(g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r[i], f[i], 1e-14);
}

TEST(ConvolveDirect, GridMismatch) {
  EXPECT_THROW(convolve_direct(GridFunction(make_grid(1.0, 0.1)), GridFunction(make_grid(1.0, 0.2))),
               IncompatibleGrids);
  EXPECT_THROW(convolve_fft(GridFunction(make_grid(1.0, 0.1)), GridFunction(make_grid(2.0, 0.1))),
               IncompatibleGrids);
}

TEST(ConvolveFft, MatchesDirectOnRandomPairs) {
  const Grid g = Grid::from_half_count(256, 0.1);
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    GridFunction f(g), k(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      f[i] = U(rng);
      k[i] = U(rng);
    }
    const GridFunction d = convolve_direct(f, k);
    EXPECT_LE(sup_norm(d - convolve_fft(f, k)) / sup_norm(d), 1e-10);
  }
}

TEST(ConvolveFft, ZeroInZeroOut) {
  const Grid g = make_grid(4.0, 0.1);
  const GridFunction z(g);
  const GridFunction f = sample([](double x) { return std::exp(-x * x); }, g);
  EXPECT_EQ(sup_norm(convolve_fft(z, f)), 0.0);
}

TEST(ConvolveFft, ReusedConvolverIsDeterministic) {
  const Grid g = make_grid(5.0, 0.05);
  const GridFunction J = discretize(gaussian_kernel(1.0), g).density;
  FftConvolver conv(J);
  const GridFunction f = sample([](double x) { return 1.0 + x * x; }, g);
  const GridFunction a = conv.apply(f);
  const GridFunction b = conv.apply(f);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(SupportRadius, Basics) {
  const Grid g = make_grid(5.0, 0.01);
  EXPECT_EQ(support_radius(discrete_delta(g)), 0.0);
  const GridFunction J = discretize(uniform_kernel(1.0), g).density;
  EXPECT_NEAR(support_radius(J), 1.0, 0.01);
  EXPECT_THROW(support_radius(J, 0.0), InvalidArgument);
}

TEST(Iterate, ZeroOrderIsDelta) {
  const Grid g = make_grid(2.0, 0.1);
  const IteratedConvolutions its = iterate(discretize(uniform_kernel(1.0), g).density, 0);
  ASSERT_EQ(its.n_max(), 0);
  EXPECT_EQ(its[0][g.center()], 1.0 / 0.1);
  EXPECT_NEAR(its.masses[0], 1.0, 1e-14);
}

TEST(Iterate, UniformSecondIterateIsHat) {
  const Grid g = make_grid(4.0, 0.01);
  const IteratedConvolutions its = iterate(discretize(uniform_kernel(1.0), g).density, 3);
  EXPECT_NEAR(its[2][g.center()], 0.5 - 0.01 / 8.0, 1e-12);
  EXPECT_NEAR(its.support_radii[3], 3.0, 0.01);
  for (int n = 0; n <= 3; ++n) EXPECT_NEAR(its.masses[static_cast<std::size_t>(n)], 1.0, 1e-12);
}

TEST(Iterate, GaussianClosedForm) {
  const Grid g = make_grid(20.0, 0.02);
  const IteratedConvolutions its = iterate(discretize(gaussian_kernel(1.0), g).density, 5);
  for (int n = 1; n <= 5; ++n) {
    const GridFunction exact =
        sample([n](double x) { return std::sqrt(1.0 / (n * std::numbers::pi)) * std::exp(-x * x / n); }, g);
    EXPECT_LE(sup_norm(its[static_cast<std::size_t>(n)] - exact), 1e-6) << "n = " << n;
  }
}

TEST(Iterate, DirectAndFftAgree) {
  const Grid g = make_grid(8.0, 0.05);
  const GridFunction J = discretize(bump_kernel(1.0), g).density;
  const auto a = iterate(J, 6, ConvolutionMethod::Fft);
  const auto b = iterate(J, 6, ConvolutionMethod::Direct);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_LE(sup_norm(a[static_cast<std::size_t>(n)] - b[static_cast<std::size_t>(n)]), 1e-13);
  }
}

TEST(Iterate, TruncationLossNamesMinimalExtent) {
  const Grid g = make_grid(5.0, 0.1);
  try {
    iterate(discretize(uniform_kernel(1.0), g).density, 10);
    FAIL();
  } catch (const DomainTooSmall& e) {
    EXPECT_GT(e.minimal_half_extent(), 5.0);
    EXPECT_NE(std::string(e.what()).find("minimal L"), std::string::npos);
  }
}
