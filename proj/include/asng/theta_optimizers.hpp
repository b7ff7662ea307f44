#pragma once

// Optimizers for the distribution parameter theta: the adaptive stochastic
// natural gradient (ASNG), constant step-size SNG and Adam driven by the
// normalized natural gradient. All steps are pure state-in / state-out.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "asng/exp_family.hpp"
#include "asng/weight_opt.hpp"

namespace asng {

class InvalidArity : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UndefinedStatistic : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Ranking-based utilities in {-1, 0, +1}. For two values: (1, -1) when the
// first is better, (-1, 1) when worse, (0, 0) when equal. For more: +1 to the
// best ceil(n/4), -1 to the worst ceil(n/4), ordered by a stable sort on the
// sample index. All-equal input gives all zeros.
std::vector<int> utility_transform(std::span<const double> f_values, Direction direction);

// (1 / n) sum_i w_i (T(c_i) - theta). With utilities as weights this is the
// normalized-update direction; with raw f-values it is the plain Monte-Carlo
// natural gradient estimate.
std::vector<double> natural_gradient_estimate(const ProductParams& params, std::span<const MixedValue> samples,
                                              std::span<const double> weights);
std::vector<double> natural_gradient_estimate(const ProductParams& params, std::span<const MixedValue> samples,
                                              std::span<const int> utilities);

// Why a step left theta untouched.
enum class SkipReason { none, tied_values, zero_norm };

struct StepInfo {
  SkipReason skipped = SkipReason::none;
  double delta_theta = 0.0;  // trust-region radius used this step
  double beta = 0.0;         // accumulation rate (ASNG only)
  double grad_norm = 0.0;    // ||G||_F at the pre-update theta
  std::size_t degenerate_rows = 0;
};

struct AsngConfig {
  double delta_init = 1.0;
  double alpha = 1.5;
  double delta_max = 1073741824.0;  // 2^30
};

struct AsngState {
  double delta_init = 1.0;
  double alpha = 1.5;
  double big_delta = 1.0;
  double big_delta_max = 1073741824.0;
  std::vector<double> s;
  double gamma = 0.0;
  std::uint64_t t = 0;
  std::size_t n_theta = 0;

  // Delta starts at 1, raised to the lower clamp when delta_init > sqrt(n_theta).
  static AsngState initial(const AsngConfig& config, std::size_t n_theta);

  // delta_init / sqrt(n_theta); keeps beta <= 1.
  double delta_lower_clamp() const;
  double delta_theta() const { return delta_init / big_delta; }
  double beta() const;

  bool operator==(const AsngState&) const = default;
};

struct AsngStepResult {
  ProductParams params;
  AsngState state;
  StepInfo info;
};

AsngStepResult asng_step(const AsngState& state, const ProductParams& params, std::span<const MixedValue> samples,
                         std::span<const double> f_values, Direction direction);

// ||s||^2 / gamma.
double snr_statistic(const AsngState& state);

struct SngStepResult {
  ProductParams params;
  StepInfo info;
};

SngStepResult sng_step(const ProductParams& params, std::span<const MixedValue> samples,
                       std::span<const double> f_values, double delta_fixed, Direction direction);

struct AdamNgStepResult {
  ProductParams params;
  AdamState state;
  StepInfo info;
};

AdamNgStepResult adam_ng_step(const AdamState& state, const ProductParams& params, std::span<const MixedValue> samples,
                              std::span<const double> f_values, double step_size, Direction direction);

}  // namespace asng
