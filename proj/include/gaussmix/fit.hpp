#pragma once

// Direct per-image fitting of a MixtureModel.
//
// The objective is  L2 + alpha * Linf  over the observed (masked) pixels,
// where L2 is the mean squared residual and Linf the peak absolute residual.
// Gradients are analytic: residual derivatives are pushed through the
// Gaussian elements, the precision construction and the squashing functions
// onto the raw 6N-vector, which Adam then updates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gaussmix/errors.hpp"
#include "gaussmix/grid.hpp"
#include "gaussmix/mask.hpp"
#include "gaussmix/model.hpp"
#include "gaussmix/random.hpp"
#include "gaussmix/raster.hpp"

namespace gaussmix {

struct FitConfig {
  std::size_t n_elements = 80;
  double alpha = 0.01;
  double learning_rate = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0;
  /// Stop when the loss changed by less than this fraction over the last window.
  double convergence_tol = 1e-7;
  std::size_t convergence_window = 50;

  void validate() const {
    if (n_elements == 0) throw InvalidArgumentError("n_elements must be >= 1");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgumentError("alpha must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgumentError("learning_rate must be > 0");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw InvalidArgumentError("adam_beta1 must be in [0, 1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw InvalidArgumentError("adam_beta2 must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw InvalidArgumentError("adam_epsilon must be > 0");
    if (max_iters == 0) throw InvalidArgumentError("max_iters must be >= 1");
    if (!(convergence_tol >= 0.0)) throw InvalidArgumentError("convergence_tol must be >= 0");
    if (convergence_window == 0) throw InvalidArgumentError("convergence_window must be >= 1");
  }
};

struct LossBreakdown {
  double l2 = 0.0;
  double pae = 0.0;
  double total = 0.0;
};

struct TraceRow {
  std::size_t iteration = 0;
  double l2 = 0.0;
  double pae = 0.0;
  double total = 0.0;
};

enum class Termination { converged, max_iters };

inline const char* to_string(Termination t) {
  return t == Termination::converged ? "converged" : "max-iters";
}

struct FitTrace {
  std::vector<TraceRow> rows;
  std::size_t iterations = 0;
  std::size_t best_iteration = 0;
  Termination reason = Termination::max_iters;
};

struct FitResult {
  MixtureModel model;
  RawParameters raw;
  LossBreakdown best_loss;
  FitTrace trace;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace detail {

inline void check_loss_inputs(const Grid<double>& pred, const Grid<double>& target,
                              const Mask& mask, const char* what) {
  require_same_shape(pred, target, what);
  require_same_shape(pred, mask, what);
  if (!mask.any()) throw EmptyMaskError(std::string(what) + ": mask has no observed pixels");
}

}  // namespace detail

inline double loss_l2(const Grid<double>& pred, const Grid<double>& target, const Mask& mask) {
  detail::check_loss_inputs(pred, target, mask, "loss_l2");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double r = pred[i] - target[i];
    sum += r * r;
    ++n;
  }
  return sum / static_cast<double>(n);
}

inline double loss_pae(const Grid<double>& pred, const Grid<double>& target, const Mask& mask) {
  detail::check_loss_inputs(pred, target, mask, "loss_pae");
  double peak = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask[i]) peak = std::max(peak, std::abs(pred[i] - target[i]));
  }
  return peak;
}

inline double total_loss(const Grid<double>& pred, const Grid<double>& target, const Mask& mask,
                         double alpha) {
  return loss_l2(pred, target, mask) + alpha * loss_pae(pred, target, mask);
}

// ---------------------------------------------------------------------------
// Objective with analytic gradient
// ---------------------------------------------------------------------------

/// Loss and gradient of a fixed (target, mask, alpha) as a function of raw parameters.
/// Holds scratch buffers, so one instance must not be shared between threads.
class Objective {
 public:
  Objective(const Surface& target, const Mask& mask, double alpha) : alpha_(alpha) {
    require_same_shape(target, mask, "Objective");
    if (!mask.any()) throw EmptyMaskError("Objective: mask has no observed pixels");
    const std::size_t h = target.height();
    const std::size_t w = target.width();
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        if (!mask(r, c)) continue;
        const Vec2 x = pixel_coordinate(r, c, h, w);
        x1_.push_back(x.x1);
        x2_.push_back(x.x2);
        target_.push_back(target(r, c));
      }
    }
    pred_.resize(target_.size());
    dloss_.resize(target_.size());
  }

  std::size_t observed() const { return target_.size(); }

  /// Loss at `raw`; when `grad` is non-empty it receives d loss / d raw.
  LossBreakdown evaluate(const RawParameters& raw, std::span<double> grad = {}) {
    const std::size_t n = raw.n_elements();
    const std::size_t m = target_.size();
    const bool want_grad = !grad.empty();
    if (want_grad && grad.size() != raw.size()) {
      throw ShapeError("Objective::evaluate: gradient buffer has wrong length");
    }

    decoded_.resize(n);
    for (std::size_t i = 0; i < n; ++i) decoded_[i] = decode_element(raw.element(i));
    if (want_grad) response_.resize(n * m);

    // Forward pass. Summation runs over elements in index order, matching eval_mixture.
    std::fill(pred_.begin(), pred_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const DecodedElement& e = decoded_[i];
      const Mat2& a = e.precision.matrix;
      double* resp = want_grad ? response_.data() + i * m : nullptr;
      for (std::size_t p = 0; p < m; ++p) {
        const double f = std::exp(-quadratic_form(a, x1_[p] - e.center.x1, x2_[p] - e.center.x2));
        if (resp) resp[p] = f;
        pred_[p] += e.weight * f;
      }
    }

    LossBreakdown loss;
    std::size_t argmax = 0;
    double sum_sq = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      const double r = pred_[p] - target_[p];
      sum_sq += r * r;
      if (std::abs(r) > loss.pae) {
        loss.pae = std::abs(r);
        argmax = p;
      }
    }
    loss.l2 = sum_sq / static_cast<double>(m);
    loss.total = loss.l2 + alpha_ * loss.pae;
    if (!want_grad) return loss;

    // d loss / d pred. The peak term is routed to the first pixel attaining the maximum.
    const double scale = 2.0 / static_cast<double>(m);
    for (std::size_t p = 0; p < m; ++p) dloss_[p] = scale * (pred_[p] - target_[p]);
    const double peak_residual = pred_[argmax] - target_[argmax];
    if (peak_residual > 0.0) dloss_[argmax] += alpha_;
    if (peak_residual < 0.0) dloss_[argmax] -= alpha_;

    for (std::size_t i = 0; i < n; ++i) {
      const DecodedElement& e = decoded_[i];
      const double* resp = response_.data() + i * m;
      double s_f = 0.0, s_d1 = 0.0, s_d2 = 0.0, s_11 = 0.0, s_22 = 0.0, s_12 = 0.0;
      for (std::size_t p = 0; p < m; ++p) {
        const double gf = dloss_[p] * resp[p];
        const double d1 = x1_[p] - e.center.x1;
        const double d2 = x2_[p] - e.center.x2;
        s_f += gf;
        s_d1 += gf * d1;
        s_d2 += gf * d2;
        s_11 += gf * d1 * d1;
        s_22 += gf * d2 * d2;
        s_12 += gf * d1 * d2;
      }
      const Mat2& a = e.precision.matrix;
      const double w = e.weight;
      const double t1 = e.t.x1;
      const double t2 = e.t.x2;
      const double rho = e.rho;

      const double d_mu1 = 2.0 * w * (a.a11 * s_d1 + a.a12 * s_d2);
      const double d_mu2 = 2.0 * w * (a.a21 * s_d1 + a.a22 * s_d2);
      const double d_t1 = -w * (2.0 * t1 * s_11 + 2.0 * rho * t2 * s_12);
      const double d_t2 = -w * (2.0 * t2 * s_22 + 2.0 * rho * t1 * s_12);
      const double d_rho = -w * 2.0 * t1 * t2 * s_12;

      double* g = grad.data() + i * kParamsPerElement;
      g[kCenter1] = d_mu1 * e.center.x1 * (1.0 - e.center.x1);
      g[kCenter2] = d_mu2 * e.center.x2 * (1.0 - e.center.x2);
      g[kScale1] = d_t1;
      g[kScale2] = d_t2;
      g[kCorr] = d_rho * (1.0 - rho * rho);
      g[kWeight] = s_f * (1.0 - w * w);
    }
    return loss;
  }

 private:
  double alpha_;
  std::vector<double> x1_, x2_, target_;
  std::vector<double> pred_, dloss_, response_;
  std::vector<DecodedElement> decoded_;
};

/// Exact gradient of the total loss with respect to every raw entry.
inline std::vector<double> gradient(const RawParameters& raw, const Surface& target,
                                    const Mask& mask, double alpha) {
  Objective objective(target, mask, alpha);
  std::vector<double> grad(raw.size());
  objective.evaluate(raw, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  RawParameters theta;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step = 0;

  AdamState() = default;
  explicit AdamState(RawParameters initial)
      : theta(std::move(initial)),
        first_moment(theta.size(), 0.0),
        second_moment(theta.size(), 0.0) {}
};

/// One bias-corrected Adam update.
inline AdamState adam_step(AdamState state, std::span<const double> grad, const FitConfig& config) {
  const std::size_t dim = state.theta.size();
  if (grad.size() != dim || state.first_moment.size() != dim || state.second_moment.size() != dim) {
    throw ShapeError("adam_step: state and gradient dimensions differ");
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto theta = state.theta.values();
  for (std::size_t j = 0; j < dim; ++j) {
    const double g = grad[j];
    state.first_moment[j] = b1 * state.first_moment[j] + (1.0 - b1) * g;
    state.second_moment[j] = b2 * state.second_moment[j] + (1.0 - b2) * g * g;
    const double m_hat = state.first_moment[j] / correction1;
    const double v_hat = state.second_moment[j] / correction2;
    theta[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Initialization and the fitting loop
// ---------------------------------------------------------------------------

inline constexpr double kInitFootprint = 1.5;

/// Jittered grid of round elements whose weights make the initial render's
/// masked mean equal the masked target mean.
inline RawParameters init_params(std::size_t n, const Surface& target, const Mask& mask,
                                 std::uint64_t seed) {
  if (n == 0) throw InvalidArgumentError("init_params: need at least one element");
  require_same_shape(target, mask, "init_params");
  if (!mask.any()) throw EmptyMaskError("init_params: mask has no observed pixels");

  Xoshiro256 rng(seed);
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto side = static_cast<std::size_t>(std::ceil(root_n));
  const std::size_t cells = side * side;
  const double jitter = 0.25 / root_n;
  const double t = kInitFootprint * root_n;

  std::vector<double> theta(n * kParamsPerElement, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = k * cells / n;
    const double c1 = (static_cast<double>(cell / side) + 0.5) / static_cast<double>(side);
    const double c2 = (static_cast<double>(cell % side) + 0.5) / static_cast<double>(side);
    const double mu1 = std::clamp(c1 + rng.uniform(-jitter, jitter), 1e-3, 1.0 - 1e-3);
    const double mu2 = std::clamp(c2 + rng.uniform(-jitter, jitter), 1e-3, 1.0 - 1e-3);
    double* block = theta.data() + k * kParamsPerElement;
    block[kCenter1] = logit(mu1);
    block[kCenter2] = logit(mu2);
    block[kScale1] = t;
    block[kScale2] = t;
    block[kCorr] = 0.0;
  }

  // Mean unit-weight coverage over the observed pixels.
  const Mat2 a = build_precision({t, t}, 0.0).matrix;
  double coverage = 0.0;
  double target_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < target.height(); ++r) {
    for (std::size_t c = 0; c < target.width(); ++c) {
      if (!mask(r, c)) continue;
      const Vec2 x = pixel_coordinate(r, c, target.height(), target.width());
      for (std::size_t k = 0; k < n; ++k) {
        const double* block = theta.data() + k * kParamsPerElement;
        coverage += std::exp(-quadratic_form(a, x.x1 - sigmoid(block[kCenter1]),
                                             x.x2 - sigmoid(block[kCenter2])));
      }
      target_sum += target(r, c);
      ++count;
    }
  }
  coverage /= static_cast<double>(count);
  const double mean = target_sum / static_cast<double>(count);
  const double weight = coverage > 0.0 ? std::clamp(mean / coverage, -0.999, 0.999) : 0.0;
  for (std::size_t k = 0; k < n; ++k) theta[k * kParamsPerElement + kWeight] = std::atanh(weight);
  return RawParameters(std::move(theta));
}

inline RawParameters init_params(std::size_t n, const Surface& target, std::uint64_t seed) {
  return init_params(n, target, Mask::full(target.height(), target.width()), seed);
}

/// Adam on the raw parameters until the loss stops moving or max_iters is hit.
/// Returns the best iterate seen, not the last one.
inline FitResult fit(const Surface& target, const Mask& mask, const FitConfig& config) {
  config.validate();
  require_same_shape(target, mask, "fit");
  if (!mask.any()) throw EmptyMaskError("fit: mask has no observed pixels");

  Objective objective(target, mask, config.alpha);
  AdamState state(init_params(config.n_elements, target, mask, config.seed));
  std::vector<double> grad(state.theta.size());

  FitResult result;
  result.trace.rows.reserve(config.max_iters);
  result.best_loss.total = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const LossBreakdown loss = objective.evaluate(state.theta, grad);
    result.trace.rows.push_back({it, loss.l2, loss.pae, loss.total});
    result.trace.iterations = it + 1;
    if (loss.total < result.best_loss.total) {
      result.best_loss = loss;
      result.raw = state.theta;
      result.trace.best_iteration = it;
    }

    if (it >= config.convergence_window) {
      const double before = result.trace.rows[it - config.convergence_window].total;
      if (std::abs(before - loss.total) <= config.convergence_tol * std::abs(before)) {
        result.trace.reason = Termination::converged;
        break;
      }
    }
    if (it + 1 == config.max_iters) break;
    state = adam_step(std::move(state), grad, config);
  }

  result.model = decode(result.raw);
  result.model.source_dims = target.dims();
  return result;
}

inline FitResult fit(const Surface& target, const FitConfig& config) {
  return fit(target, Mask::full(target.height(), target.width()), config);
}

}  // namespace gaussmix
