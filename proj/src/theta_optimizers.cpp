#include "asng/theta_optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace asng {

namespace {

template <class W>
std::vector<double> weighted_score_mean(const ProductParams& params, std::span<const MixedValue> samples,
                                        std::span<const W> weights) {
  if (samples.size() != weights.size()) {
    std::ostringstream os;
    os << "natural_gradient_estimate: " << samples.size() << " samples but " << weights.size() << " weights";
    throw InvalidArity(os.str());
  }
  if (samples.empty()) throw InvalidArity("natural_gradient_estimate: no samples");
  const auto theta = params.flatten();
  std::vector<double> g(theta.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double w = static_cast<double>(weights[i]);
    if (w == 0.0) continue;
    const auto t = sufficient_statistics(params, samples[i]);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += w * (t[k] - theta[k]);
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& v : g) v *= inv;
  return g;
}

bool all_zero(const std::vector<int>& u) {
  return std::all_of(u.begin(), u.end(), [](int v) { return v == 0; });
}

struct NormalizedGradient {
  std::vector<double> grad;
  double norm = 0.0;
  SkipReason skipped = SkipReason::none;
};

// Utility-weighted natural gradient and its Fisher norm, or the reason the
// update has to be skipped.
NormalizedGradient normalized_direction(const ProductParams& params, std::span<const MixedValue> samples,
                                        std::span<const double> f_values, Direction direction) {
  if (samples.size() != f_values.size()) throw InvalidArity("theta step: samples and f-values differ in length");
  NormalizedGradient out;
  const auto u = utility_transform(f_values, direction);
  if (all_zero(u)) {
    out.skipped = SkipReason::tied_values;
    return out;
  }
  out.grad = natural_gradient_estimate(params, samples, std::span<const int>(u));
  out.norm = fisher_quadratic_norm(params, out.grad);
  if (!(out.norm > 0.0) || !std::isfinite(out.norm)) out.skipped = SkipReason::zero_norm;
  return out;
}

}  // namespace

std::vector<int> utility_transform(std::span<const double> f_values, Direction direction) {
  const std::size_t n = f_values.size();
  if (n < 2) throw InvalidArity("utility_transform needs at least two values");
  std::vector<int> u(n, 0);
  if (std::all_of(f_values.begin(), f_values.end(), [&](double f) { return f == f_values.front(); })) return u;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return direction == Direction::maximize ? f_values[a] > f_values[b] : f_values[a] < f_values[b];
  });
  const std::size_t quota = (n + 3) / 4;
  for (std::size_t r = 0; r < quota; ++r) {
    u[order[r]] = 1;
    u[order[n - 1 - r]] = -1;
  }
  return u;
}

std::vector<double> natural_gradient_estimate(const ProductParams& params, std::span<const MixedValue> samples,
                                              std::span<const double> weights) {
  return weighted_score_mean(params, samples, weights);
}

std::vector<double> natural_gradient_estimate(const ProductParams& params, std::span<const MixedValue> samples,
                                              std::span<const int> utilities) {
  return weighted_score_mean(params, samples, utilities);
}

// ---------------------------------------------------------------------------
// ASNG

AsngState AsngState::initial(const AsngConfig& config, std::size_t n_theta) {
  if (n_theta == 0) throw std::invalid_argument("AsngState: n_theta must be positive");
  if (!(config.delta_init > 0.0)) throw std::invalid_argument("AsngState: delta_init must be positive");
  if (!(config.alpha > 1.0)) throw std::invalid_argument("AsngState: alpha must exceed 1");
  AsngState s;
  s.delta_init = config.delta_init;
  s.alpha = config.alpha;
  s.big_delta_max = config.delta_max;
  s.n_theta = n_theta;
  s.s.assign(n_theta, 0.0);
  s.big_delta = std::max(1.0, s.delta_lower_clamp());
  if (!(s.big_delta_max >= s.big_delta)) throw std::invalid_argument("AsngState: delta_max below the initial Delta");
  return s;
}

double AsngState::delta_lower_clamp() const { return delta_init / std::sqrt(static_cast<double>(n_theta)); }

double AsngState::beta() const { return delta_theta() / std::sqrt(static_cast<double>(n_theta)); }

AsngStepResult asng_step(const AsngState& state, const ProductParams& params, std::span<const MixedValue> samples,
                         std::span<const double> f_values, Direction direction) {
  if (state.n_theta != params.n_theta() || state.s.size() != params.n_theta()) {
    throw std::invalid_argument("asng_step: state dimension does not match params");
  }
  AsngStepResult out{params, state, {}};
  StepInfo& info = out.info;
  info.delta_theta = state.delta_theta();
  info.beta = state.beta();

  auto dir = normalized_direction(params, samples, f_values, direction);
  info.grad_norm = dir.norm;
  if (dir.skipped != SkipReason::none) {
    info.skipped = dir.skipped;
    return out;
  }

  const double beta = info.beta;
  ProjectionEvents events;
  out.params = project(params.shifted(dir.grad, info.delta_theta / dir.norm), &events);
  info.degenerate_rows = events.degenerate_rows;

  const auto a = sqrt_fisher_apply(params, dir.grad);
  const double decay = 1.0 - beta;
  const double gain = std::sqrt(beta * (2.0 - beta)) / dir.norm;
  double s_sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.state.s[k] = decay * state.s[k] + gain * a[k];
    s_sq += out.state.s[k] * out.state.s[k];
  }
  out.state.gamma = decay * decay * state.gamma + beta * (2.0 - beta);
  const double grown = state.big_delta * std::exp(beta * (out.state.gamma - s_sq / state.alpha));
  out.state.big_delta = std::clamp(grown, state.delta_lower_clamp(), state.big_delta_max);
  out.state.t = state.t + 1;
  return out;
}

double snr_statistic(const AsngState& state) {
  if (!(state.gamma > 0.0)) throw UndefinedStatistic("snr_statistic: gamma is zero before the first update");
  double s_sq = 0.0;
  for (double v : state.s) s_sq += v * v;
  return s_sq / state.gamma;
}

// ---------------------------------------------------------------------------
// Baselines

SngStepResult sng_step(const ProductParams& params, std::span<const MixedValue> samples,
                       std::span<const double> f_values, double delta_fixed, Direction direction) {
  if (!(delta_fixed >= 0.0)) throw std::invalid_argument("sng_step: delta_fixed must be nonnegative");
  SngStepResult out{params, {}};
  out.info.delta_theta = delta_fixed;
  auto dir = normalized_direction(params, samples, f_values, direction);
  out.info.grad_norm = dir.norm;
  if (dir.skipped != SkipReason::none) {
    out.info.skipped = dir.skipped;
    return out;
  }
  ProjectionEvents events;
  out.params = project(params.shifted(dir.grad, delta_fixed / dir.norm), &events);
  out.info.degenerate_rows = events.degenerate_rows;
  return out;
}

AdamNgStepResult adam_ng_step(const AdamState& state, const ProductParams& params, std::span<const MixedValue> samples,
                              std::span<const double> f_values, double step_size, Direction direction) {
  if (state.m.size() != params.n_theta()) throw std::invalid_argument("adam_ng_step: state dimension mismatch");
  AdamNgStepResult out{params, state, {}};
  out.info.delta_theta = step_size;
  auto dir = normalized_direction(params, samples, f_values, direction);
  out.info.grad_norm = dir.norm;
  if (dir.skipped != SkipReason::none) {
    out.info.skipped = dir.skipped;
    return out;
  }
  for (double& g : dir.grad) g /= dir.norm;
  const auto theta = params.flatten();
  // Utilities already point uphill in goodness, so Adam always ascends here.
  auto step = adam_step(state, theta, dir.grad, step_size, Direction::maximize);
  for (std::size_t k = 0; k < theta.size(); ++k) step.x[k] -= theta[k];
  ProjectionEvents events;
  out.params = project(params.shifted(step.x, 1.0), &events);
  out.state = std::move(step.state);
  out.info.degenerate_rows = events.degenerate_rows;
  return out;
}

}  // namespace asng
