#include "asng/exp_family.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace asng {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << ": expected vector of length " << n << ", got " << v.size();
    throw std::invalid_argument(os.str());
  }
}

// Symmetric 2x2 inverse Fisher block [[a, b], [b, d]] of a Gaussian variable.
struct GaussianMetric {
  double mu;
  double var;

  static GaussianMetric of(const GaussianBlock& g, std::size_t i) {
    const double var = g.variance(i);
    if (!(var > 0.0)) {
      std::ostringstream os;
      os << "Gaussian variable with non-positive variance " << var;
      throw SingularMetric(os.str());
    }
    return {g.mu[i], var};
  }

  // v^T F v = (sigma^2 v1^2 + 2 (mu v1 - v2 / 2)^2) / sigma^4
  double quadratic(double v1, double v2) const {
    const double r = mu * v1 - 0.5 * v2;
    return (var * v1 * v1 + 2.0 * r * r) / (var * var);
  }

  // F^{1/2} v through the eigendecomposition of F^{-1}.
  std::pair<double, double> sqrt_apply(double v1, double v2) const {
    const double a = var;
    const double b = 2.0 * mu * var;
    const double d = 4.0 * mu * mu * var + 2.0 * var * var;
    const double lam_hi = 0.5 * (a + d) + std::hypot(0.5 * (a - d), b);
    const double lam_lo = 2.0 * var * var * var / lam_hi;  // det = 2 sigma^6
    const double phi = 0.5 * std::atan2(2.0 * b, a - d);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double p_hi = (c * v1 + s * v2) / std::sqrt(lam_hi);
    const double p_lo = (-s * v1 + c * v2) / std::sqrt(lam_lo);
    return {c * p_hi - s * p_lo, s * p_hi + c * p_lo};
  }
};

void check_row_positive(const std::vector<double>& row) {
  for (double p : row) {
    if (!(p > 0.0)) throw SingularMetric("categorical row with a non-positive probability");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Shape

std::size_t Shape::n_categorical() const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (const auto* c = std::get_if<CategoricalSpec>(&b)) n += c->categories.size();
  }
  return n;
}

std::size_t Shape::n_gaussian() const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (const auto* g = std::get_if<GaussianSpec>(&b)) n += g->vars.size();
  }
  return n;
}

std::size_t Shape::n_theta() const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    std::visit(overloaded{[&](const CategoricalSpec& c) {
                            for (int m : c.categories) n += static_cast<std::size_t>(std::max(m - 1, 0));
                          },
                          [&](const GaussianSpec& g) { n += 2 * g.vars.size(); }},
               b);
  }
  return n;
}

Shape parse_shape(const std::string& text) {
  Shape shape;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << "shape line " << lineno << ": " << msg;
    throw InvalidShape(os.str());
  };
  auto parse_double = [&](const std::string& tok) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      fail("not a number: '" + tok + "'");
    }
    if (pos != tok.size() || !std::isfinite(v)) fail("not a number: '" + tok + "'");
    return v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty() || toks[0].front() == '#') continue;

    std::vector<std::string> positional;
    std::vector<std::pair<std::string, double>> options;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string::npos) {
        positional.push_back(toks[i]);
      } else {
        options.emplace_back(toks[i].substr(0, eq), parse_double(toks[i].substr(eq + 1)));
      }
    }

    const std::string& kind = toks[0];
    if (kind == "categorical") {
      if (positional.size() != 1) fail("categorical expects exactly one category count");
      const double m = parse_double(positional[0]);
      if (m != std::floor(m) || m < 2) fail("category count must be an integer >= 2");
      std::optional<double> theta_min;
      for (const auto& [k, v] : options) {
        if (k == "theta_min") {
          theta_min = v;
        } else {
          fail("unknown categorical option '" + k + "'");
        }
      }
      auto* last = shape.blocks.empty() ? nullptr : std::get_if<CategoricalSpec>(&shape.blocks.back());
      if (last != nullptr && last->theta_min == theta_min) {
        last->categories.push_back(static_cast<int>(m));
      } else {
        shape.blocks.emplace_back(CategoricalSpec{{static_cast<int>(m)}, theta_min});
      }
    } else if (kind == "integer" || kind == "real") {
      if (positional.size() != 2) fail(kind + " expects <lo> <hi>");
      GaussianVarSpec var;
      var.lo = parse_double(positional[0]);
      var.hi = parse_double(positional[1]);
      var.integer = kind == "integer";
      for (const auto& [k, v] : options) {
        if (k == "sigma_min") {
          var.sigma_min = v;
        } else if (k == "sigma_max") {
          var.sigma_max = v;
        } else {
          fail("unknown " + kind + " option '" + k + "'");
        }
      }
      if (!var.integer && !var.sigma_min) fail("real variables require sigma_min=<v>");
      auto* last = shape.blocks.empty() ? nullptr : std::get_if<GaussianSpec>(&shape.blocks.back());
      if (last != nullptr) {
        last->vars.push_back(var);
      } else {
        shape.blocks.emplace_back(GaussianSpec{{var}});
      }
    } else {
      fail("unknown variable kind '" + kind + "'");
    }
  }
  if (shape.blocks.empty()) throw InvalidShape("shape declares no variables");
  return shape;
}

// ---------------------------------------------------------------------------
// ProductParams

ProductParams::ProductParams(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            if (c.probs.size() != c.theta_min.size()) {
                              throw InvalidShape("categorical block: theta_min size mismatch");
                            }
                            for (const auto& row : c.probs) {
                              if (row.size() < 2)
                                throw InvalidShape("categorical variable with fewer than 2 categories");
                              double sum = 0.0;
                              for (double p : row) {
                                if (!std::isfinite(p)) throw InvalidValue("non-finite probability");
                                sum += p;
                              }
                              if (std::abs(sum - 1.0) > 1e-9) throw InvalidValue("categorical row does not sum to 1");
                              n_theta_ += row.size() - 1;
                            }
                            n_categorical_ += c.probs.size();
                          },
                          [&](const GaussianBlock& g) {
                            const std::size_t n = g.mu.size();
                            if (g.second_moment.size() != n || g.mu_min.size() != n || g.mu_max.size() != n ||
                                g.sigma_min.size() != n || g.sigma_max.size() != n || g.integer.size() != n) {
                              throw InvalidShape("Gaussian block: field size mismatch");
                            }
                            for (std::size_t i = 0; i < n; ++i) {
                              if (!std::isfinite(g.mu[i]) || !std::isfinite(g.second_moment[i])) {
                                throw InvalidValue("non-finite Gaussian parameter");
                              }
                              if (!(g.mu_max[i] > g.mu_min[i])) throw InvalidShape("Gaussian range with hi <= lo");
                              if (!(g.sigma_min[i] >= 0.0) || !(g.sigma_max[i] >= g.sigma_min[i])) {
                                throw InvalidShape("Gaussian sigma bounds must satisfy 0 <= sigma_min <= sigma_max");
                              }
                            }
                            n_theta_ += 2 * n;
                            n_gaussian_ += n;
                          }},
               b);
  }
}

std::vector<double> ProductParams::flatten() const {
  std::vector<double> out;
  out.reserve(n_theta_);
  for (const auto& b : blocks_) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) out.insert(out.end(), row.begin(), row.end() - 1);
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              out.push_back(g.mu[i]);
                              out.push_back(g.second_moment[i]);
                            }
                          }},
               b);
  }
  return out;
}

ProductParams ProductParams::shifted(std::span<const double> direction, double scale) const {
  require_length(direction, n_theta_, "shifted");
  std::vector<Block> blocks = blocks_;
  std::size_t k = 0;
  for (auto& b : blocks) {
    std::visit(overloaded{[&](CategoricalBlock& c) {
                            for (auto& row : c.probs) {
                              double moved = 0.0;
                              for (std::size_t j = 0; j + 1 < row.size(); ++j) {
                                const double d = scale * direction[k++];
                                row[j] += d;
                                moved += d;
                              }
                              row.back() -= moved;
                            }
                          },
                          [&](GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              g.mu[i] += scale * direction[k++];
                              g.second_moment[i] += scale * direction[k++];
                            }
                          }},
               b);
  }
  return ProductParams(std::move(blocks));
}

// ---------------------------------------------------------------------------
// Operations

ProductParams init_max_entropy(const Shape& shape) {
  const std::size_t n_c = shape.n_categorical();
  std::vector<Block> blocks;
  for (const auto& spec : shape.blocks) {
    std::visit(overloaded{[&](const CategoricalSpec& c) {
                            if (c.categories.empty()) throw InvalidShape("empty categorical block");
                            CategoricalBlock block;
                            for (int m : c.categories) {
                              if (m < 2) throw InvalidShape("categorical variable needs m >= 2");
                              const double lo = c.theta_min.value_or(1.0 / (static_cast<double>(n_c) * (m - 1)));
                              if (!(lo >= 0.0) || lo * m > 1.0 + 1e-12) {
                                std::ostringstream os;
                                os << "probability lower bound " << lo << " is infeasible for m = " << m
                                   << "; override theta_min";
                                throw InvalidShape(os.str());
                              }
                              block.probs.emplace_back(static_cast<std::size_t>(m), 1.0 / m);
                              block.theta_min.push_back(lo);
                            }
                            blocks.emplace_back(std::move(block));
                          },
                          [&](const GaussianSpec& g) {
                            if (g.vars.empty()) throw InvalidShape("empty Gaussian block");
                            GaussianBlock block;
                            for (const auto& v : g.vars) {
                              if (!(v.hi > v.lo)) throw InvalidShape("Gaussian range requires hi > lo");
                              if (!v.integer && !v.sigma_min) {
                                throw InvalidShape("real-valued variable requires sigma_min");
                              }
                              const double smax = v.sigma_max.value_or(0.5 * (v.hi - v.lo));
                              const double smin = v.sigma_min.value_or(0.25);
                              if (!(smin > 0.0) || !(smax >= smin)) {
                                throw InvalidShape("Gaussian sigma bounds must satisfy 0 < sigma_min <= sigma_max");
                              }
                              const double mu = 0.5 * (v.lo + v.hi);
                              block.mu.push_back(mu);
                              block.second_moment.push_back(mu * mu + smax * smax);
                              block.mu_min.push_back(v.lo);
                              block.mu_max.push_back(v.hi);
                              block.sigma_min.push_back(smin);
                              block.sigma_max.push_back(smax);
                              block.integer.push_back(v.integer);
                            }
                            blocks.emplace_back(std::move(block));
                          }},
               spec);
  }
  if (blocks.empty()) throw InvalidShape("shape declares no variables");
  return ProductParams(std::move(blocks));
}

MixedValue sample(const ProductParams& params, Rng& rng) {
  MixedValue out;
  out.categories.reserve(params.n_categorical());
  out.reals.reserve(params.n_gaussian());
  std::normal_distribution<double> normal;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              const double u = uniform01(rng);
                              double cum = 0.0;
                              int pick = -1;
                              for (std::size_t j = 0; j < row.size(); ++j) {
                                cum += row[j];
                                if (u < cum) {
                                  pick = static_cast<int>(j);
                                  break;
                                }
                              }
                              if (pick < 0) {
                                // u landed in the rounding gap above the cumulative sum.
                                pick = static_cast<int>(row.size()) - 1;
                                while (pick > 0 && !(row[static_cast<std::size_t>(pick)] > 0.0)) --pick;
                              }
                              out.categories.push_back(pick);
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              const double sd = std::sqrt(std::max(g.variance(i), 0.0));
                              out.reals.push_back(g.mu[i] + sd * normal(rng));
                            }
                          }},
               b);
  }
  return out;
}

std::vector<double> sufficient_statistics(const ProductParams& params, const MixedValue& value) {
  if (value.categories.size() != params.n_categorical() || value.reals.size() != params.n_gaussian()) {
    throw InvalidValue("value does not conform to the parameter shape");
  }
  std::vector<double> out;
  out.reserve(params.n_theta());
  std::size_t ic = 0;
  std::size_t ig = 0;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              const int k = value.categories[ic++];
                              if (k < 0 || static_cast<std::size_t>(k) >= row.size()) {
                                std::ostringstream os;
                                os << "category index " << k << " out of range [0, " << row.size() << ")";
                                throw InvalidValue(os.str());
                              }
                              for (std::size_t j = 0; j + 1 < row.size(); ++j) {
                                out.push_back(static_cast<std::size_t>(k) == j ? 1.0 : 0.0);
                              }
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              const double x = value.reals[ig++];
                              if (!std::isfinite(x)) throw InvalidValue("non-finite real value");
                              out.push_back(x);
                              out.push_back(x * x);
                            }
                          }},
               b);
  }
  return out;
}

std::vector<double> score(const ProductParams& params, const MixedValue& value) {
  auto t = sufficient_statistics(params, value);
  const auto theta = params.flatten();
  for (std::size_t k = 0; k < t.size(); ++k) t[k] -= theta[k];
  return t;
}

double fisher_quadratic_norm(const ProductParams& params, std::span<const double> v) {
  require_length(v, params.n_theta(), "fisher_quadratic_norm");
  double total = 0.0;
  std::size_t k = 0;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              check_row_positive(row);
                              double sum = 0.0;
                              for (std::size_t j = 0; j + 1 < row.size(); ++j, ++k) {
                                total += v[k] * v[k] / row[j];
                                sum += v[k];
                              }
                              total += sum * sum / row.back();
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i, k += 2) {
                              total += GaussianMetric::of(g, i).quadratic(v[k], v[k + 1]);
                            }
                          }},
               b);
  }
  return std::sqrt(total);
}

std::vector<double> sqrt_fisher_apply(const ProductParams& params, std::span<const double> v) {
  require_length(v, params.n_theta(), "sqrt_fisher_apply");
  std::vector<double> out(v.size());
  std::size_t k = 0;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              check_row_positive(row);
                              const std::size_t n = row.size() - 1;
                              const double last = row.back();
                              const double coef = 1.0 / (std::sqrt(last) + last);
                              double sum = 0.0;
                              for (std::size_t j = 0; j < n; ++j) sum += v[k + j];
                              for (std::size_t j = 0; j < n; ++j) {
                                const double r = std::sqrt(row[j]);
                                out[k + j] = v[k + j] / r + coef * r * sum;
                              }
                              k += n;
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i, k += 2) {
                              const auto [a, b2] = GaussianMetric::of(g, i).sqrt_apply(v[k], v[k + 1]);
                              out[k] = a;
                              out[k + 1] = b2;
                            }
                          }},
               b);
  }
  return out;
}

std::vector<double> fisher_matrix(const ProductParams& params) {
  const std::size_t n = params.n_theta();
  std::vector<double> f(n * n, 0.0);
  std::size_t k = 0;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              check_row_positive(row);
                              const std::size_t m = row.size() - 1;
                              for (std::size_t r = 0; r < m; ++r) {
                                for (std::size_t s = 0; s < m; ++s) {
                                  f[(k + r) * n + k + s] = 1.0 / row.back() + (r == s ? 1.0 / row[r] : 0.0);
                                }
                              }
                              k += m;
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i, k += 2) {
                              const auto gm = GaussianMetric::of(g, i);
                              const double v2 = gm.var * gm.var;
                              f[k * n + k] = (2.0 * gm.mu * gm.mu + gm.var) / v2;
                              f[k * n + k + 1] = -gm.mu / v2;
                              f[(k + 1) * n + k] = -gm.mu / v2;
                              f[(k + 1) * n + k + 1] = 0.5 / v2;
                            }
                          }},
               b);
  }
  return f;
}

ProductParams project(const ProductParams& params, ProjectionEvents* events) {
  std::vector<Block> blocks = params.blocks();
  for (auto& b : blocks) {
    std::visit(overloaded{[&](CategoricalBlock& c) {
                            for (std::size_t i = 0; i < c.probs.size(); ++i) {
                              auto& row = c.probs[i];
                              const double lo = c.theta_min[i];
                              bool clipped = false;
                              double sum = 0.0;
                              double slack = 0.0;
                              for (double& p : row) {
                                if (p < lo) {
                                  p = lo;
                                  clipped = true;
                                }
                                sum += p;
                                slack += p - lo;
                              }
                              // Feasible rows are a fixed point; this is what makes projection idempotent.
                              if (!clipped && std::abs(sum - 1.0) <= 1e-13) continue;
                              if (!(slack > 0.0)) {
                                std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
                                if (events != nullptr) ++events->degenerate_rows;
                                continue;
                              }
                              const double keep = 1.0 + (1.0 - sum) / slack;
                              for (double& p : row) p = lo + keep * (p - lo);
                            }
                          },
                          [&](GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              g.mu[i] = std::clamp(g.mu[i], g.mu_min[i], g.mu_max[i]);
                              const double m2 = g.mu[i] * g.mu[i];
                              g.second_moment[i] = std::clamp(g.second_moment[i], m2 + g.sigma_min[i] * g.sigma_min[i],
                                                              m2 + g.sigma_max[i] * g.sigma_max[i]);
                            }
                          }},
               b);
  }
  return ProductParams(std::move(blocks));
}

double round_half_away(double v) { return std::round(v); }

MixedValue most_likely(const ProductParams& params) {
  MixedValue out;
  for (const auto& b : params.blocks()) {
    std::visit(overloaded{[&](const CategoricalBlock& c) {
                            for (const auto& row : c.probs) {
                              std::size_t best = 0;
                              for (std::size_t j = 1; j < row.size(); ++j) {
                                if (row[j] > row[best]) best = j;
                              }
                              out.categories.push_back(static_cast<int>(best));
                            }
                          },
                          [&](const GaussianBlock& g) {
                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                              const double v = std::clamp(g.mu[i], g.mu_min[i], g.mu_max[i]);
                              out.reals.push_back(g.integer[i] ? round_half_away(v) : v);
                            }
                          }},
               b);
  }
  return out;
}

MixedValue clip_and_round(const ProductParams& params, const MixedValue& value) {
  if (value.reals.size() != params.n_gaussian() || value.categories.size() != params.n_categorical()) {
    throw InvalidValue("value does not conform to the parameter shape");
  }
  MixedValue out = value;
  std::size_t ig = 0;
  for (const auto& b : params.blocks()) {
    if (const auto* g = std::get_if<GaussianBlock>(&b)) {
      for (std::size_t i = 0; i < g->mu.size(); ++i, ++ig) {
        const double v = std::clamp(out.reals[ig], g->mu_min[i], g->mu_max[i]);
        out.reals[ig] = g->integer[i] ? round_half_away(v) : v;
      }
    }
  }
  return out;
}

bool in_domain(const ProductParams& params, double tol) {
  for (const auto& b : params.blocks()) {
    const bool ok = std::visit(overloaded{[&](const CategoricalBlock& c) {
                                            for (std::size_t i = 0; i < c.probs.size(); ++i) {
                                              const auto& row = c.probs[i];
                                              if (std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) > tol)
                                                return false;
                                              for (double p : row) {
                                                if (p < c.theta_min[i]) return false;
                                              }
                                            }
                                            return true;
                                          },
                                          [&](const GaussianBlock& g) {
                                            for (std::size_t i = 0; i < g.mu.size(); ++i) {
                                              if (g.mu[i] < g.mu_min[i] || g.mu[i] > g.mu_max[i]) return false;
                                              const double var = g.variance(i);
                                              const double lo = g.sigma_min[i] * g.sigma_min[i];
                                              const double hi = g.sigma_max[i] * g.sigma_max[i];
                                              const double slack = tol * std::max(1.0, g.second_moment[i]);
                                              if (!(var > 0.0) || var < lo - slack || var > hi + slack) return false;
                                            }
                                            return true;
                                          }},
                               b);
    if (!ok) return false;
  }
  return true;
}

}  // namespace asng
