#pragma once

// Exponential-family distributions over mixed categorical / ordinal spaces,
// parameterized by their expectation parameters theta = E[T(c)].
//
// A distribution is a product of blocks. A categorical block holds one
// probability row per variable; a Gaussian block holds (mu, mu^2 + sigma^2)
// per variable. The flat natural-parameter layout lists, block by block and
// variable by variable, the first m_i - 1 probabilities of each categorical
// variable and the pair (mu, second_moment) of each Gaussian variable.
//
// Category indices are 0-based throughout the API.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "asng/rng.hpp"

namespace asng {

class InvalidShape : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidValue : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when the Fisher metric is evaluated at a degenerate parameter
// (a zero probability or a zero variance).
class SingularMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Shape: the declared block layout.

struct CategoricalSpec {
  std::vector<int> categories;  // m_i per variable, each >= 2
  // Lower bound on every probability of the block. When absent, each
  // variable uses 1 / (n_c (m_i - 1)) where n_c counts all categorical
  // variables of the shape. Pass 0 to disable the bound.
  std::optional<double> theta_min;
};

struct GaussianVarSpec {
  double lo = 0.0;
  double hi = 1.0;
  bool integer = false;
  // Defaults to 1/4 for integer variables; required for real variables.
  std::optional<double> sigma_min;
  // Defaults to (hi - lo) / 2.
  std::optional<double> sigma_max;
};

struct GaussianSpec {
  std::vector<GaussianVarSpec> vars;
};

using BlockSpec = std::variant<CategoricalSpec, GaussianSpec>;

struct Shape {
  std::vector<BlockSpec> blocks;

  std::size_t n_categorical() const;
  std::size_t n_gaussian() const;
  std::size_t n_theta() const;
};

// Parses the plain-text shape declaration. One variable per line, in order:
//
//   categorical <m> [theta_min=<v>]
//   integer <lo> <hi> [sigma_min=<v>] [sigma_max=<v>]
//   real <lo> <hi> sigma_min=<v> [sigma_max=<v>]
//
// Blank lines and lines starting with '#' are ignored. Consecutive variables
// of the same family are grouped into one block. A categorical theta_min
// override applies to its own line only, so lines with different overrides
// start new blocks.
Shape parse_shape(const std::string& text);

// ---------------------------------------------------------------------------
// Parameter blocks.

struct CategoricalBlock {
  std::vector<std::vector<double>> probs;  // full rows, each sums to 1
  std::vector<double> theta_min;           // per variable

  bool operator==(const CategoricalBlock&) const = default;
};

struct GaussianBlock {
  std::vector<double> mu;
  std::vector<double> second_moment;  // mu^2 + sigma^2
  std::vector<double> mu_min, mu_max;
  std::vector<double> sigma_min, sigma_max;
  std::vector<bool> integer;

  double variance(std::size_t i) const { return second_moment[i] - mu[i] * mu[i]; }

  bool operator==(const GaussianBlock&) const = default;
};

using Block = std::variant<CategoricalBlock, GaussianBlock>;

// One sample c: category indices of all categorical variables and real values
// of all Gaussian variables, each in declaration order.
struct MixedValue {
  std::vector<int> categories;
  std::vector<double> reals;

  bool operator==(const MixedValue&) const = default;
};

class ProductParams {
 public:
  // Checks structure and finiteness. Domain bounds are not enforced here
  // because unprojected updates legitimately leave the domain; see in_domain.
  explicit ProductParams(std::vector<Block> blocks);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t n_theta() const { return n_theta_; }
  std::size_t n_categorical() const { return n_categorical_; }
  std::size_t n_gaussian() const { return n_gaussian_; }

  // theta in the flat layout.
  std::vector<double> flatten() const;

  // theta + scale * direction in the flat layout, without projection. The
  // last probability of every categorical row absorbs the change so rows
  // keep summing to 1.
  ProductParams shifted(std::span<const double> direction, double scale) const;

  bool operator==(const ProductParams& other) const { return blocks_ == other.blocks_; }

 private:
  std::vector<Block> blocks_;
  std::size_t n_theta_ = 0;
  std::size_t n_categorical_ = 0;
  std::size_t n_gaussian_ = 0;
};

// Uniform categorical rows; Gaussian mu at the range midpoint with
// sigma = sigma_max.
ProductParams init_max_entropy(const Shape& shape);

MixedValue sample(const ProductParams& params, Rng& rng);

std::vector<double> sufficient_statistics(const ProductParams& params, const MixedValue& value);

// Natural gradient of the log-likelihood, T(c) - theta.
std::vector<double> score(const ProductParams& params, const MixedValue& value);

// sqrt(v^T F(theta) v), evaluated blockwise.
double fisher_quadratic_norm(const ProductParams& params, std::span<const double> v);

// B v with B^T B = F(theta), so that ||B v|| equals the Fisher norm of v.
// Categorical blocks use B = A^T for the rank-one corrected factor
// A = diag(theta)^{-1/2} + (sqrt(theta_m) + theta_m)^{-1} 1 sqrt(theta)^T,
// which satisfies A A^T = F; Gaussian blocks use the symmetric 2x2 root.
std::vector<double> sqrt_fisher_apply(const ProductParams& params, std::span<const double> v);

// Dense row-major n_theta x n_theta Fisher matrix from the closed forms.
std::vector<double> fisher_matrix(const ProductParams& params);

struct ProjectionEvents {
  std::size_t degenerate_rows = 0;
};

// Restricts theta to the bounded domain: probability lower bounds with
// mass-preserving rescaling, clipped Gaussian mean and variance.
ProductParams project(const ProductParams& params, ProjectionEvents* events = nullptr);

// Argmax category per variable (lowest index on ties); Gaussian mean clipped
// to its range and rounded for integer variables.
MixedValue most_likely(const ProductParams& params);

// Clips Gaussian components into their range and rounds integer ones.
MixedValue clip_and_round(const ProductParams& params, const MixedValue& value);

// True when every block satisfies its domain bounds: rows sum to 1 within
// tol, probabilities >= theta_min, mu in range, variance within the squared
// sigma bounds (relative tol).
bool in_domain(const ProductParams& params, double tol = 1e-12);

// Round half away from zero.
double round_half_away(double v);

}  // namespace asng
