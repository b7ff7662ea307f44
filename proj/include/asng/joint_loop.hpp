#pragma once

// Alternating optimization of continuous parameters x (by stochastic
// gradients) and the distribution parameter theta (by a natural-gradient
// step), one x-update followed by one theta-update per iteration.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "asng/exp_family.hpp"
#include "asng/theta_optimizers.hpp"
#include "asng/weight_opt.hpp"

namespace asng {

enum class Phase { weights = 0, theta = 1 };

// Callback surface of a joint problem. The loop hands every callback a
// per-(iteration, phase) random stream reserved for the problem's own noise;
// begin_phase runs once per phase before any evaluation of that phase.
struct JointProblem {
  std::size_t x_dim = 0;
  Shape shape;

  std::function<void(Phase phase, Rng& noise)> begin_phase;
  // Single-sample gradient of f with respect to x.
  std::function<std::vector<double>(std::span<const double> x, const MixedValue& c, Rng& noise)> gradient;
  // Black-box value f(x, c) used by the theta-update.
  std::function<double(std::span<const double> x, const MixedValue& c, Rng& noise)> value;
  std::function<bool(std::span<const double> x, const MixedValue& c)> success;
};

struct SngConfig {
  double delta = 0.1;
};

struct AdamNgConfig {
  double step_size = 0.01;
};

using ThetaAlgorithm = std::variant<AsngConfig, SngConfig, AdamNgConfig>;

struct SgdMomentumConfig {
  double momentum = 0.9;
};

struct AdamConfig {};

using XOptimizer = std::variant<SgdMomentumConfig, AdamConfig>;

enum class SuccessCheck { all_samples, theta_samples };

struct LoopConfig {
  std::size_t lambda_x = 2;
  std::size_t lambda_theta = 2;
  std::uint64_t max_iters = 0;
  ThetaAlgorithm theta_algo = AsngConfig{};
  XOptimizer x_optimizer = SgdMomentumConfig{};
  double eps_x = 0.05;  // initial value of the cosine schedule over max_iters
  std::optional<double> clip_norm;
  Direction direction = Direction::maximize;
  std::uint64_t seed = 0;
  bool stop_on_success = false;
  SuccessCheck success_check = SuccessCheck::all_samples;
  bool record_trace = false;
};

// One row per iteration. Fields that the theta algorithm does not define
// (beta, snr, big_delta outside ASNG) hold NaN.
struct TraceRow {
  std::uint64_t t = 0;
  double delta_theta = 0.0;
  double beta = 0.0;
  double grad_norm = 0.0;
  double snr = 0.0;
  double big_delta = 0.0;
  bool skipped = false;
  bool hit = false;
};

struct RunResult {
  std::vector<double> x;
  ProductParams params;
  std::optional<AsngState> asng_state;
  std::vector<TraceRow> trace;
  std::optional<std::uint64_t> hit_iteration;  // 1-based
  std::uint64_t iterations = 0;
  std::uint64_t skipped_updates = 0;
  std::uint64_t degenerate_projections = 0;
};

// Raised when a callback returns a non-finite value.
class NonFiniteCallback : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stream indices used with derive_seed(seed, t, stream).
enum class StreamId : std::uint64_t { weight_samples = 0, theta_samples = 1, weight_noise = 2, theta_noise = 3 };

RunResult run(const JointProblem& problem, std::vector<double> x0, ProductParams theta0, const LoopConfig& config);

// Mean over categorical variables of the largest probability.
double theta_entropy_summary(const ProductParams& params);

}  // namespace asng
