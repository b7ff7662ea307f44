#include "asng/joint_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace asng {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string describe(const MixedValue& c) {
  std::ostringstream os;
  os << "categories=[";
  for (std::size_t i = 0; i < c.categories.size(); ++i) os << (i ? "," : "") << c.categories[i];
  os << "] reals=[";
  for (std::size_t i = 0; i < c.reals.size(); ++i) os << (i ? "," : "") << c.reals[i];
  os << "]";
  return os.str();
}

[[noreturn]] void non_finite(const char* what, std::uint64_t t, const MixedValue& c) {
  std::ostringstream os;
  os << what << " returned a non-finite value at iteration " << t << " for sample " << describe(c);
  throw NonFiniteCallback(os.str());
}

std::vector<MixedValue> draw(const ProductParams& params, std::size_t n, Rng& rng) {
  std::vector<MixedValue> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample(params, rng));
  return out;
}

// Optimizer state for x, one alternative per XOptimizer.
using XState = std::variant<SgdMomentumState, AdamState>;

// Optimizer state for theta, one alternative per ThetaAlgorithm.
using ThetaState = std::variant<AsngState, std::monostate, AdamState>;

}  // namespace

RunResult run(const JointProblem& problem, std::vector<double> x0, ProductParams theta0, const LoopConfig& config) {
  if (config.lambda_x < 1) throw std::invalid_argument("run: lambda_x must be at least 1");
  if (config.lambda_theta < 2) throw std::invalid_argument("run: lambda_theta must be at least 2");
  if (x0.size() != problem.x_dim) throw std::invalid_argument("run: x0 does not match x_dim");
  if (!problem.gradient || !problem.value)
    throw std::invalid_argument("run: gradient and value callbacks are required");

  RunResult result{std::move(x0), std::move(theta0), std::nullopt, {}, std::nullopt, 0, 0, 0};
  std::vector<double>& x = result.x;
  ProductParams& params = result.params;

  XState x_state = std::visit(
      overloaded{[&](const SgdMomentumConfig& c) -> XState { return SgdMomentumState::zeros(x.size(), c.momentum); },
                 [&](const AdamConfig&) -> XState { return AdamState::zeros(x.size()); }},
      config.x_optimizer);
  ThetaState theta_state =
      std::visit(overloaded{[&](const AsngConfig& c) -> ThetaState { return AsngState::initial(c, params.n_theta()); },
                            [&](const SngConfig&) -> ThetaState { return std::monostate{}; },
                            [&](const AdamNgConfig&) -> ThetaState { return AdamState::zeros(params.n_theta()); }},
                 config.theta_algo);

  if (config.max_iters == 0) {
    if (auto* a = std::get_if<AsngState>(&theta_state)) result.asng_state = *a;
    return result;
  }
  const CosineSchedule schedule(config.eps_x, config.max_iters);
  if (config.record_trace)
    result.trace.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(config.max_iters, 1u << 20)));

  auto succeeded = [&](std::span<const double> at, const MixedValue& c) {
    return problem.success && problem.success(at, c);
  };

  for (std::uint64_t t = 0; t < config.max_iters; ++t) {
    bool hit = false;

    // x-phase: averaged single-sample gradients at x^t.
    {
      Rng picks = make_stream(config.seed, t, static_cast<std::uint64_t>(StreamId::weight_samples));
      Rng noise = make_stream(config.seed, t, static_cast<std::uint64_t>(StreamId::weight_noise));
      if (problem.begin_phase) problem.begin_phase(Phase::weights, noise);
      const auto samples = draw(params, config.lambda_x, picks);
      std::vector<std::vector<double>> grads;
      grads.reserve(samples.size());
      for (const auto& raw : samples) {
        const auto c = clip_and_round(params, raw);
        auto g = problem.gradient(x, c, noise);
        if (g.size() != x.size()) throw std::invalid_argument("run: gradient callback returned wrong length");
        if (!std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); })) {
          non_finite("gradient callback", t, c);
        }
        grads.push_back(std::move(g));
        if (config.success_check == SuccessCheck::all_samples && succeeded(x, c)) hit = true;
      }
      auto grad = mc_weight_gradient(grads);
      if (config.clip_norm) grad = clip_grad_norm(grad, *config.clip_norm);
      const double eps = cosine_lr(schedule, t);
      std::visit(overloaded{[&](SgdMomentumState& s) {
                              auto r = sgd_momentum_step(s, x, grad, eps, config.direction);
                              x = std::move(r.x);
                              s = std::move(r.state);
                            },
                            [&](AdamState& s) {
                              auto r = adam_step(s, x, grad, eps, config.direction);
                              x = std::move(r.x);
                              s = std::move(r.state);
                            }},
                 x_state);
    }

    // theta-phase: fresh samples evaluated at x^{t+1}.
    TraceRow row{t + 1, kNaN, kNaN, kNaN, kNaN, kNaN, false, false};
    {
      Rng picks = make_stream(config.seed, t, static_cast<std::uint64_t>(StreamId::theta_samples));
      Rng noise = make_stream(config.seed, t, static_cast<std::uint64_t>(StreamId::theta_noise));
      if (problem.begin_phase) problem.begin_phase(Phase::theta, noise);
      const auto samples = draw(params, config.lambda_theta, picks);
      std::vector<double> f(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto c = clip_and_round(params, samples[i]);
        f[i] = problem.value(x, c, noise);
        if (!std::isfinite(f[i])) non_finite("value callback", t, c);
        if (succeeded(x, c)) hit = true;
      }

      StepInfo info;
      std::visit(overloaded{[&](AsngState& s) {
                              auto r = asng_step(s, params, samples, f, config.direction);
                              params = std::move(r.params);
                              s = std::move(r.state);
                              info = r.info;
                              row.big_delta = s.big_delta;
                              if (s.gamma > 0.0) row.snr = snr_statistic(s);
                            },
                            [&](std::monostate) {
                              const auto& c = std::get<SngConfig>(config.theta_algo);
                              auto r = sng_step(params, samples, f, c.delta, config.direction);
                              params = std::move(r.params);
                              info = r.info;
                            },
                            [&](AdamState& s) {
                              const auto& c = std::get<AdamNgConfig>(config.theta_algo);
                              auto r = adam_ng_step(s, params, samples, f, c.step_size, config.direction);
                              params = std::move(r.params);
                              s = std::move(r.state);
                              info = r.info;
                            }},
                 theta_state);
      row.delta_theta = info.delta_theta;
      if (std::holds_alternative<AsngState>(theta_state)) row.beta = info.beta;
      row.grad_norm = info.grad_norm;
      row.skipped = info.skipped != SkipReason::none;
      if (row.skipped) ++result.skipped_updates;
      result.degenerate_projections += info.degenerate_rows;
    }

    row.hit = hit;
    result.iterations = t + 1;
    if (config.record_trace) result.trace.push_back(row);
    if (hit && !result.hit_iteration) result.hit_iteration = t + 1;
    if (hit && config.stop_on_success) break;
  }

  if (auto* a = std::get_if<AsngState>(&theta_state)) result.asng_state = *a;
  return result;
}

double theta_entropy_summary(const ProductParams& params) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& b : params.blocks()) {
    if (const auto* c = std::get_if<CategoricalBlock>(&b)) {
      for (const auto& row : c->probs) {
        total += *std::max_element(row.begin(), row.end());
        ++n;
      }
    }
  }
  if (n == 0) throw UndefinedStatistic("theta_entropy_summary: no categorical variables");
  return total / static_cast<double>(n);
}

}  // namespace asng
