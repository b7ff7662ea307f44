#pragma once

// Selective squared error benchmark: x is a D x K matrix, c picks one column
// per row, and only the picked entries (plus a per-column penalty) enter the
// loss. Minimized jointly over x and c.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "asng/exp_family.hpp"
#include "asng/joint_loop.hpp"

namespace asng {

// 1/K + D/K^2.
double success_threshold(int d, int k);

class ToyProblem {
 public:
  ToyProblem(int d, int k);

  int d() const { return d_; }
  int k() const { return k_; }
  std::size_t x_dim() const { return static_cast<std::size_t>(d_) * static_cast<std::size_t>(k_); }

  // D categorical variables with K categories each and the default bounds.
  Shape shape() const;

  // sum_i (x_{i,c_i} - z_i)^2 + c_i / K, with x row-major and 0-based c_i.
  double stochastic_loss(std::span<const double> x, const MixedValue& c, std::span<const double> z) const;
  std::vector<double> grad_x(std::span<const double> x, const MixedValue& c, std::span<const double> z) const;

  // E_z of the stochastic loss: sum_i x_{i,c_i}^2 + 1/K^2 + c_i / K.
  double true_objective(std::span<const double> x, const MixedValue& c) const;
  double success_threshold() const { return asng::success_threshold(d_, k_); }

  // z ~ N(0, K^-2 I), length D.
  std::vector<double> draw_noise(Rng& rng) const;

  // Loop callbacks. With per_eval_noise = false one z is shared by all
  // evaluations of a phase; otherwise each evaluation draws its own.
  JointProblem joint_problem(bool per_eval_noise = false) const;

 private:
  void check(std::span<const double> x, const MixedValue& c) const;

  int d_;
  int k_;
};

struct BenchConfig {
  int d = 30;
  int k = 5;
  ThetaAlgorithm theta_algo = AsngConfig{};
  double eps_x = 0.05;
  std::uint64_t max_iters = 100000;
  std::size_t n_runs = 100;
  std::uint64_t base_seed = 0;
  std::size_t lambda_x = 2;
  std::size_t lambda_theta = 2;
  std::size_t jobs = 1;
  bool per_eval_noise = false;
  SuccessCheck success_check = SuccessCheck::all_samples;
  std::optional<double> clip_norm;
  bool stop_on_success = true;
};

struct RunRecord {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<std::uint64_t> hit_iteration;
  double final_true_objective = 0.0;  // at the most likely c of the final theta
  std::int64_t wall_ms = 0;

  bool operator==(const RunRecord&) const = default;
};

RunRecord run_single(const BenchConfig& config, std::size_t run_id);

// Runs are spread over config.jobs worker threads; the result is ordered by
// run_id and independent of the job count.
std::vector<RunRecord> run_experiment(const BenchConfig& config);

struct Summary {
  std::size_t n_runs = 0;
  std::size_t n_success = 0;
  double success_rate = 0.0;
  std::optional<double> median_hit_iteration;
  // median hit iteration / success rate; absent when nothing succeeded.
  std::optional<double> paper_metric;

  bool operator==(const Summary&) const = default;
};

Summary summarize(std::span<const RunRecord> records);

}  // namespace asng
