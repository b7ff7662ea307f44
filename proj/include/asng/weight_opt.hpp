#pragma once

// Gradient-based optimizers for the continuous parameters x.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace asng {

enum class Direction { maximize, minimize };

class ScheduleOverrun : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Arithmetic mean of per-sample gradients. Throws std::invalid_argument on an
// empty list or mismatched lengths.
std::vector<double> mc_weight_gradient(std::span<const std::vector<double>> grads);

struct SgdMomentumState {
  std::vector<double> velocity;
  double momentum = 0.9;

  static SgdMomentumState zeros(std::size_t dim, double momentum = 0.9);
};

struct SgdStepResult {
  std::vector<double> x;
  SgdMomentumState state;
};

// velocity <- momentum * velocity + grad; x <- x -/+ eps * velocity.
SgdStepResult sgd_momentum_step(const SgdMomentumState& state, std::span<const double> x, std::span<const double> grad,
                                double eps, Direction direction);

class CosineSchedule {
 public:
  CosineSchedule(double eps_initial, std::uint64_t total_steps);

  // eps_initial * (1 + cos(pi t / total_steps)) / 2 for 0 <= t <= total_steps.
  double at(std::uint64_t t) const;

  double eps_initial() const { return eps_initial_; }
  std::uint64_t total_steps() const { return total_steps_; }

 private:
  double eps_initial_;
  std::uint64_t total_steps_;
};

inline double cosine_lr(const CosineSchedule& schedule, std::uint64_t t) { return schedule.at(t); }

std::vector<double> clip_grad_norm(std::span<const double> grad, double max_norm);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros(std::size_t dim);

  bool operator==(const AdamState&) const = default;
};

struct AdamStepResult {
  std::vector<double> x;
  AdamState state;
};

// Bias-corrected first/second moment update.
AdamStepResult adam_step(const AdamState& state, std::span<const double> x, std::span<const double> grad, double eps,
                         Direction direction);

}  // namespace asng
