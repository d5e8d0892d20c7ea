#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gaussmix/fit.hpp"
#include "gaussmix/metrics.hpp"
#include "gaussmix/random.hpp"
#include "gaussmix/raster.hpp"
#include "test_util.hpp"

namespace gaussmix {
namespace {

Grid<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Grid<double>(1, n, std::move(v));
}

Surface random_surface(Xoshiro256& rng, std::size_t h, std::size_t w) {
  Grid<double> g(h, w);
  for (double& v : g) v = rng.uniform();
  return Surface(std::move(g));
}

RawParameters random_raw(Xoshiro256& rng, std::size_t n) {
  std::vector<double> theta(n * kParamsPerElement);
  for (std::size_t i = 0; i < n; ++i) {
    double* b = theta.data() + i * kParamsPerElement;
    b[kCenter1] = rng.uniform(-1.5, 1.5);
    b[kCenter2] = rng.uniform(-1.5, 1.5);
    b[kScale1] = rng.uniform(1.0, 4.0) * (rng.coin() ? 1 : -1);
    b[kScale2] = rng.uniform(1.0, 4.0) * (rng.coin() ? 1 : -1);
    b[kCorr] = rng.uniform(-1.0, 1.0);
    b[kWeight] = rng.uniform(-1.0, 1.0);
  }
  return RawParameters(std::move(theta));
}

TEST(LossL2, Examples) {
  const Mask full = Mask::full(1, 2);
  EXPECT_EQ(loss_l2(row({0.3, 0.7}), row({0.3, 0.7}), full), 0.0);
  EXPECT_NEAR(loss_l2(row({0.2, 0.8}), row({0.0, 1.0}), full), 0.04, 1e-15);
  const Grid<double> target(3, 3, 0.4);
  const Grid<double> pred(3, 3, 0.5);
  EXPECT_NEAR(loss_l2(pred, target, Mask::full(3, 3)), 0.01, 1e-15);
}

TEST(LossL2, AveragesOverObservedPixelsOnly) {
  Mask mask = Mask::full(1, 2);
  mask.set(0, 1, false);
  EXPECT_NEAR(loss_l2(row({0.2, 0.8}), row({0.0, 0.0}), mask), 0.04, 1e-15);
}

TEST(LossPae, Examples) {
  const Grid<double> target = row({0.5, 0.5, 0.5});
  const Grid<double> pred = row({0.51, 0.2, 0.7});
  EXPECT_EQ(loss_pae(target, target, Mask::full(1, 3)), 0.0);
  EXPECT_NEAR(loss_pae(pred, target, Mask::full(1, 3)), 0.3, 1e-15);
  Mask mask = Mask::full(1, 3);
  mask.set(0, 1, false);
  EXPECT_NEAR(loss_pae(pred, target, mask), 0.2, 1e-15);
}

TEST(TotalLoss, Examples) {
  const Grid<double> target = row({0.0, 0.0});
  const Grid<double> pred = row({0.3, 0.1});
  const Mask full = Mask::full(1, 2);
  EXPECT_EQ(total_loss(pred, target, full, 0.0), loss_l2(pred, target, full));
  // L2 = (0.09 + 0.01) / 2 = 0.05, Linf = 0.3.
  EXPECT_NEAR(total_loss(pred, target, full, 0.1), 0.08, 1e-15);
  EXPECT_EQ(total_loss(target, target, full, 0.7), 0.0);
}

TEST(Losses, ShapeAndMaskErrors) {
  const Grid<double> a(2, 2, 0.0);
  const Grid<double> b(2, 3, 0.0);
  EXPECT_THROW(loss_l2(a, b, Mask::full(2, 2)), ShapeError);
  EXPECT_THROW(loss_pae(a, a, Mask::full(2, 3)), ShapeError);
  EXPECT_THROW(total_loss(a, a, Mask(2, 2, false), 0.1), EmptyMaskError);
}

// One element on a 1x1 grid at x = (1, 1). Reference values were obtained by
// differentiating the closed form by hand and evaluating at 30 digits.
struct OnePixelCase {
  double target;
  double alpha;
  double expected;
};

TEST(Gradient, OnePixelWeightCoordinate) {
  const RawParameters raw({0.3, -0.2, 1.7, 2.1, 0.4, 0.25});
  const double pred = 0.0202785615032455352316;
  const Grid<double> rendered = render(decode(raw), 1, 1);
  EXPECT_NEAR(rendered(0, 0), pred, 1e-16);
  for (const OnePixelCase& c : {OnePixelCase{0.9, 0.0, -0.136938368917960834802},
                                OnePixelCase{0.9, 0.1, -0.144721421764323066444},
                                OnePixelCase{0.05, 0.0, -0.00462647052980289688507},
                                OnePixelCase{0.05, 0.1, -0.0124095233761651285273}}) {
    const Surface target = Surface::constant(1, 1, c.target);
    const auto g = gradient(raw, target, Mask::full(1, 1), c.alpha);
    EXPECT_NEAR(g[kWeight], c.expected, 1e-15) << "target " << c.target << " alpha " << c.alpha;
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  Xoshiro256 rng(2024);
  for (std::size_t n : {1u, 3u, 8u}) {
    for (std::size_t side : {4u, 8u}) {
      for (double alpha : {0.0, 0.1}) {
        const Surface target = random_surface(rng, side, side);
        const RawParameters raw = random_raw(rng, n);
        const test::GradientCheck check = test::check_gradient(raw, target, Mask::full(side, side), alpha);
        EXPECT_GT(check.compared, 0u);
        EXPECT_LT(check.worst_relative_error, 1e-4) << "N=" << n << " grid " << side << " alpha " << alpha;
      }
    }
  }
}

TEST(Gradient, MatchesCentralDifferencesUnderMask) {
  Xoshiro256 rng(99);
  const Surface target = random_surface(rng, 8, 8);
  Mask mask = Mask::full(8, 8);
  for (std::size_t i = 0; i < 64; i += 3) mask.set(i, false);
  const auto check = test::check_gradient(random_raw(rng, 3), target, mask, 0.1);
  EXPECT_LT(check.worst_relative_error, 1e-4);
}

TEST(Gradient, ZeroAtPerfectFit) {
  const RawParameters raw({-0.4, 0.2, 2.0, 3.0, 0.1, 0.3});
  const Grid<double> rendered = render(decode(raw), 6, 6);
  const Surface target(rendered);
  const auto g = gradient(raw, target, Mask::full(6, 6), 0.1);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, UnobservedPixelsHaveNoInfluence) {
  Xoshiro256 rng(5);
  Surface target = random_surface(rng, 8, 8);
  Mask mask = Mask::full(8, 8);
  mask.set(2, 5, false);
  mask.set(7, 0, false);
  const RawParameters raw = random_raw(rng, 3);
  const auto before = gradient(raw, target, mask, 0.1);
  Grid<double> changed = target.grid();
  changed(2, 5) = 1.0 - changed(2, 5);
  changed(7, 0) = 0.0;
  const auto after = gradient(raw, Surface(changed), mask, 0.1);
  EXPECT_EQ(before, after);
}

TEST(Gradient, PeakTermGoesToFirstTiedPixel) {
  // Two identical pixels far from a zero-weight element: residuals tie exactly.
  const RawParameters raw({0.0, 0.0, 1.0, 1.0, 0.0, 0.0});
  const Surface target = Surface::constant(1, 2, 0.5);
  Objective objective(target, Mask::full(1, 2), 1.0);
  std::vector<double> g(6);
  objective.evaluate(raw, g);
  // With w = 0 only the weight coordinate sees the residual:
  // d/dw = sum_p dloss_p f_p, dloss = (2/2)(-0.5) each, plus -1 on pixel 0 only.
  const Vec2 x0 = pixel_coordinate(0, 0, 1, 2);
  const Vec2 x1 = pixel_coordinate(0, 1, 1, 2);
  const GaussianElement e{1.0, {0.5, 0.5}, Mat2::identity()};
  const double expected = -0.5 * eval_element(e, x0) - 0.5 * eval_element(e, x1) - eval_element(e, x0);
  EXPECT_NEAR(g[kWeight], expected, 1e-15);
}

TEST(Gradient, ShapeErrors) {
  const Surface target = Surface::constant(4, 4, 0.5);
  EXPECT_THROW(gradient(RawParameters(std::vector<double>(6, 0.0)), target, Mask::full(3, 4), 0.1),
               ShapeError);
  Objective objective(target, Mask::full(4, 4), 0.1);
  std::vector<double> short_buffer(5);
  EXPECT_THROW(objective.evaluate(RawParameters(std::vector<double>(6, 0.0)), short_buffer), ShapeError);
}

TEST(Adam, ZeroGradientLeavesThetaUnchanged) {
  AdamState state(RawParameters({0.5, -1.0, 2.0, 0.0, 3.0, -4.0}));
  const std::vector<double> zero(6, 0.0);
  const FitConfig config;
  for (int i = 0; i < 3; ++i) state = adam_step(std::move(state), zero, config);
  EXPECT_EQ(state.theta.values()[0], 0.5);
  EXPECT_EQ(state.theta, RawParameters({0.5, -1.0, 2.0, 0.0, 3.0, -4.0}));
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, FirstStepIsSignLike) {
  AdamState state(RawParameters(std::vector<double>(6, 1.0)));
  const std::vector<double> g{3.0, -0.2, 1e-3, -50.0, 0.7, 1e-5};
  FitConfig config;
  config.learning_rate = 0.01;
  state = adam_step(std::move(state), g, config);
  for (std::size_t j = 0; j < 6; ++j) {
    const double expected = 1.0 - 0.01 * g[j] / (std::abs(g[j]) + 1e-8);
    EXPECT_NEAR(state.theta[j], expected, 1e-14);
  }
}

TEST(Adam, TwoStepsMatchReferenceRecurrence) {
  // Reference: the Adam recurrence evaluated at 30 digits, eta = 0.05, defaults otherwise.
  AdamState state(RawParameters({0.5, -1.0, 2.0, 0.5, -1.0, 2.0}));
  const std::vector<double> g{0.3, -0.02, 1e-9, 0.3, -0.02, 1e-9};
  const FitConfig config;
  state = adam_step(std::move(state), g, config);
  EXPECT_NEAR(state.theta[0], 0.450000001666666611111113, 1e-12);
  EXPECT_NEAR(state.theta[1], -0.95000002499998750000625, 1e-12);
  EXPECT_NEAR(state.theta[2], 1.995454545454545454545455, 1e-12);
  state = adam_step(std::move(state), g, config);
  EXPECT_NEAR(state.theta[0], 0.4000000033333332222222259, 1e-12);
  EXPECT_NEAR(state.theta[1], -0.9000000499999750000125, 1e-12);
  EXPECT_NEAR(state.theta[2], 1.990909090909090909090909, 1e-12);
  EXPECT_EQ(state.step, 2u);
}

TEST(Adam, DimensionMismatch) {
  AdamState state(RawParameters(std::vector<double>(6, 0.0)));
  const std::vector<double> g(12, 0.0);
  EXPECT_THROW(adam_step(state, g, FitConfig{}), ShapeError);
}

TEST(InitParams, SingleElementNearCenter) {
  const MixtureModel m = decode(init_params(1, Surface::constant(10, 10, 0.5), 3));
  ASSERT_EQ(m.n_elements(), 1u);
  EXPECT_NEAR(m.elements[0].center.x1, 0.5, 0.25 + 1e-12);
  EXPECT_NEAR(m.elements[0].center.x2, 0.5, 0.25 + 1e-12);
}

TEST(InitParams, DeterministicGivenSeed) {
  const Surface target = Surface::constant(12, 12, 0.3);
  EXPECT_EQ(init_params(17, target, 9), init_params(17, target, 9));
  EXPECT_NE(init_params(17, target, 9), init_params(17, target, 10));
}

TEST(InitParams, CentersFormJitteredGrid) {
  const std::size_t n = 80;
  const RawParameters raw = init_params(n, Surface::constant(20, 20, 0.5), 1);
  const MixtureModel m = decode(raw);
  const double jitter = 0.25 / std::sqrt(80.0);
  // side = 9 cells per axis; element k occupies cell k*81/80.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = k * 81 / 80;
    EXPECT_NEAR(m.elements[k].center.x1, (cell / 9 + 0.5) / 9.0, jitter + 1e-12);
    EXPECT_NEAR(m.elements[k].center.x2, (cell % 9 + 0.5) / 9.0, jitter + 1e-12);
    EXPECT_EQ(raw.element(k)[kScale1], 1.5 * std::sqrt(80.0));
    EXPECT_EQ(raw.element(k)[kScale2], 1.5 * std::sqrt(80.0));
    EXPECT_EQ(raw.element(k)[kCorr], 0.0);
  }
}

TEST(InitParams, InitialRenderMeanTracksTarget) {
  for (double level : {0.5, 0.2, 0.8}) {
    const Surface target = Surface::constant(120, 120, level);
    const Grid<double> initial = render(decode(init_params(80, target, 4)), 120, 120);
    double sum = 0.0;
    for (double v : initial) sum += v;
    EXPECT_NEAR(sum / initial.size(), level, 0.15) << "level " << level;
  }
}

TEST(InitParams, Errors) {
  const Surface target = Surface::constant(4, 4, 0.5);
  EXPECT_THROW(init_params(0, target, 1), InvalidArgumentError);
  EXPECT_THROW(init_params(3, target, Mask(4, 4, false), 1), EmptyMaskError);
}

TEST(FitConfig, Validation) {
  const Surface target = Surface::constant(4, 4, 0.5);
  auto bad = [&](auto mutate) {
    FitConfig c;
    c.max_iters = 5;
    mutate(c);
    EXPECT_THROW(fit(target, c), InvalidArgumentError);
  };
  bad([](FitConfig& c) { c.n_elements = 0; });
  bad([](FitConfig& c) { c.alpha = -0.1; });
  bad([](FitConfig& c) { c.learning_rate = 0.0; });
  bad([](FitConfig& c) { c.adam_beta1 = 1.0; });
  bad([](FitConfig& c) { c.adam_beta2 = -0.1; });
  bad([](FitConfig& c) { c.max_iters = 0; });
}

TEST(Fit, EmptyMaskIsRejected) {
  EXPECT_THROW(fit(Surface::constant(4, 4, 0.5), Mask(4, 4, false), FitConfig{}), EmptyMaskError);
}

TEST(Fit, ConstantTargetWithOneElement) {
  const Surface target = Surface::constant(32, 32, 0.5);
  FitConfig config;
  config.n_elements = 1;
  config.max_iters = 3000;
  const FitResult result = fit(target, config);
  EXPECT_LT(mse(render(result.model, 32, 32), target.grid()), 1e-4);
}

TEST(Fit, TraceInvariants) {
  Xoshiro256 rng(12);
  const Surface target = random_surface(rng, 10, 10);
  FitConfig config;
  config.n_elements = 4;
  config.max_iters = 300;
  config.alpha = 0.1;
  const FitResult result = fit(target, config);
  const FitTrace& trace = result.trace;
  ASSERT_EQ(trace.rows.size(), trace.iterations);
  double best = std::numeric_limits<double>::infinity();
  double previous_best = best;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    EXPECT_EQ(r.iteration, i);
    EXPECT_NEAR(r.total, r.l2 + config.alpha * r.pae, 1e-12);
    best = std::min(best, r.total);
    EXPECT_LE(best, previous_best);
    previous_best = best;
  }
  EXPECT_EQ(result.best_loss.total, best);
  EXPECT_EQ(trace.rows[trace.best_iteration].total, best);
  EXPECT_TRUE(validate_model(result.model).ok());
  // The returned model reproduces the best recorded loss.
  const Grid<double> pred = render(result.model, 10, 10);
  EXPECT_NEAR(total_loss(pred, target.grid(), Mask::full(10, 10), config.alpha), best, 1e-12);
  ASSERT_TRUE(result.model.source_dims.has_value());
  EXPECT_EQ(result.model.source_dims->height, 10u);
}

TEST(Fit, EveryIterateDecodesWithinConstraints) {
  Xoshiro256 rng(31);
  const Surface target = random_surface(rng, 8, 8);
  FitConfig config;
  config.n_elements = 3;
  config.learning_rate = 0.5;
  Objective objective(target, Mask::full(8, 8), config.alpha);
  AdamState state(init_params(3, target, 2));
  std::vector<double> g(state.theta.size());
  for (int it = 0; it < 200; ++it) {
    objective.evaluate(state.theta, g);
    for (std::size_t i = 0; i < state.theta.n_elements(); ++i) {
      const DecodedElement d = decode_element(state.theta.element(i));
      EXPECT_LT(std::abs(d.rho), 1.0);
      EXPECT_LT(std::abs(d.weight), 1.0);
      EXPECT_GT(d.center.x1, 0.0);
      EXPECT_LT(d.center.x1, 1.0);
      EXPECT_GT(d.center.x2, 0.0);
      EXPECT_LT(d.center.x2, 1.0);
    }
    state = adam_step(std::move(state), g, config);
  }
}

TEST(Fit, DeterministicGivenSeed) {
  Xoshiro256 rng(3);
  const Surface target = random_surface(rng, 9, 7);
  FitConfig config;
  config.n_elements = 5;
  config.max_iters = 120;
  config.seed = 42;
  const FitResult a = fit(target, config);
  const FitResult b = fit(target, config);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.trace.rows.size(), b.trace.rows.size());
}

TEST(Fit, ConvergenceStopsAFlatRun) {
  // A zero-weight start on a black target is already optimal; the loss never moves.
  const Surface target = Surface::constant(6, 6, 0.0);
  FitConfig config;
  config.n_elements = 2;
  config.max_iters = 1000;
  const FitResult result = fit(target, config);
  EXPECT_EQ(result.trace.reason, Termination::converged);
  EXPECT_EQ(result.trace.iterations, config.convergence_window + 1);
  EXPECT_STREQ(to_string(result.trace.reason), "converged");
}

TEST(Fit, MaskedPixelsAreIgnored) {
  Xoshiro256 rng(8);
  Surface target = random_surface(rng, 8, 8);
  Mask mask = Mask::full(8, 8);
  mask.set(3, 3, false);
  Grid<double> other = target.grid();
  other(3, 3) = 1.0 - other(3, 3);
  FitConfig config;
  config.n_elements = 3;
  config.max_iters = 50;
  EXPECT_EQ(fit(target, mask, config).raw, fit(Surface(other), mask, config).raw);
}

}  // namespace
}  // namespace gaussmix
