#include "asng/weight_opt.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace asng {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": length mismatch (" << a << " vs " << b << ")";
    throw std::invalid_argument(os.str());
  }
}

double sign_of(Direction d) { return d == Direction::minimize ? -1.0 : 1.0; }

}  // namespace

std::vector<double> mc_weight_gradient(std::span<const std::vector<double>> grads) {
  if (grads.empty()) throw std::invalid_argument("mc_weight_gradient: no gradient samples");
  std::vector<double> mean(grads.front().size(), 0.0);
  for (const auto& g : grads) {
    require_same(g.size(), mean.size(), "mc_weight_gradient");
    for (std::size_t k = 0; k < g.size(); ++k) mean[k] += g[k];
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (double& v : mean) v *= inv;
  return mean;
}

SgdMomentumState SgdMomentumState::zeros(std::size_t dim, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  return {std::vector<double>(dim, 0.0), momentum};
}

SgdStepResult sgd_momentum_step(const SgdMomentumState& state, std::span<const double> x, std::span<const double> grad,
                                double eps, Direction direction) {
  require_same(x.size(), grad.size(), "sgd_momentum_step");
  require_same(state.velocity.size(), grad.size(), "sgd_momentum_step");
  SgdStepResult out{std::vector<double>(x.begin(), x.end()), state};
  const double sgn = sign_of(direction);
  for (std::size_t k = 0; k < x.size(); ++k) {
    out.state.velocity[k] = state.momentum * state.velocity[k] + grad[k];
    out.x[k] += sgn * eps * out.state.velocity[k];
  }
  return out;
}

CosineSchedule::CosineSchedule(double eps_initial, std::uint64_t total_steps)
    : eps_initial_(eps_initial), total_steps_(total_steps) {
  if (!(eps_initial > 0.0)) throw std::invalid_argument("cosine schedule: eps_initial must be positive");
  if (total_steps == 0) throw std::invalid_argument("cosine schedule: total_steps must be positive");
}

double CosineSchedule::at(std::uint64_t t) const {
  if (t > total_steps_) {
    std::ostringstream os;
    os << "cosine schedule: step " << t << " beyond total " << total_steps_;
    throw ScheduleOverrun(os.str());
  }
  if (t == total_steps_) return 0.0;
  const double frac = static_cast<double>(t) / static_cast<double>(total_steps_);
  return eps_initial_ * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

std::vector<double> clip_grad_norm(std::span<const double> grad, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_norm: max_norm must be positive");
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  std::vector<double> out(grad.begin(), grad.end());
  if (norm <= max_norm) return out;
  const double scale = max_norm / norm;
  for (double& g : out) g *= scale;
  return out;
}

AdamState AdamState::zeros(std::size_t dim) {
  AdamState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  return s;
}

AdamStepResult adam_step(const AdamState& state, std::span<const double> x, std::span<const double> grad, double eps,
                         Direction direction) {
  require_same(x.size(), grad.size(), "adam_step");
  require_same(state.m.size(), grad.size(), "adam_step");
  AdamStepResult out{std::vector<double>(x.begin(), x.end()), state};
  AdamState& s = out.state;
  s.t += 1;
  const double t = static_cast<double>(s.t);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double sgn = sign_of(direction);
  for (std::size_t k = 0; k < x.size(); ++k) {
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * grad[k];
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * grad[k] * grad[k];
    const double mhat = s.m[k] / c1;
    const double vhat = s.v[k] / c2;
    out.x[k] += sgn * eps * mhat / (std::sqrt(vhat) + s.epsilon);
  }
  return out;
}

}  // namespace asng
