#include "benchdelta/glmm.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

#include "benchdelta/numload.hpp"

namespace benchdelta::glmm {
namespace {

constexpr int kMaxHalvings = 10;
constexpr int kMaxOuterEvaluations = 500;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double inv_logit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// State of the joint (beta, u) system at one iterate.
struct Iterate {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  Eigen::VectorXd w;
  double deviance = 0.0;
  double penalty = 0.0;

  double penalized() const { return deviance + penalty; }
};

Iterate evaluate(const DesignMatrix& dm, double theta, Eigen::VectorXd beta, Eigen::VectorXd u) {
  Iterate it;
  const Eigen::Index n = dm.rows();
  it.eta = dm.X * beta;
  if (theta != 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) it.eta[i] += theta * u[dm.group[static_cast<std::size_t>(i)]];
  }
  it.mu.resize(n);
  it.w.resize(n);
  double dev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = it.eta[i];
    dev += softplus(eta) - dm.y[i] * eta;
    const double mu = inv_logit(eta);
    it.mu[i] = mu;
    it.w[i] = mu * (1.0 - mu);
  }
  it.deviance = 2.0 * dev;
  it.penalty = u.squaredNorm();
  it.beta = std::move(beta);
  it.u = std::move(u);
  return it;
}

// Blocks of the negative Hessian of the penalized log-likelihood:
//   [ X'WX         theta X'W Z          ]
//   [ theta Z'WX   I + theta^2 Z'W Z    ]
// with the u-block diagonal (d) and the cross block stored per group (a).
struct Curvature {
  Eigen::MatrixXd a;   // p x q, a_g = sum_{i in g} w_i x_i
  Eigen::VectorXd d;   // q, 1 + theta^2 sum_{i in g} w_i
  Eigen::MatrixXd S;   // Schur complement, the fixed-effect information
};

Curvature curvature(const DesignMatrix& dm, double theta, const Iterate& it) {
  const Eigen::Index p = dm.cols();
  Curvature c;
  c.a = Eigen::MatrixXd::Zero(p, dm.levels);
  c.d = Eigen::VectorXd::Ones(dm.levels);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(dm.levels);
  for (Eigen::Index i = 0; i < dm.rows(); ++i) {
    const int g = dm.group[static_cast<std::size_t>(i)];
    c.a.col(g) += it.w[i] * dm.X.row(i).transpose();
    wsum[g] += it.w[i];
  }
  c.d.array() += theta * theta * wsum.array();
  c.S = dm.X.transpose() * it.w.asDiagonal() * dm.X;
  if (theta != 0.0) {
    for (int g = 0; g < dm.levels; ++g) c.S.noalias() -= (theta * theta / c.d[g]) * c.a.col(g) * c.a.col(g).transpose();
  }
  c.S = 0.5 * (c.S + c.S.transpose());
  return c;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& S, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  return S.completeOrthogonalDecomposition().solve(rhs);
}

// Full Newton direction for (beta, u).
std::pair<Eigen::VectorXd, Eigen::VectorXd> newton_step(const DesignMatrix& dm, double theta, const Iterate& it) {
  const Curvature c = curvature(dm, theta, it);
  const Eigen::VectorXd resid = dm.y - it.mu;
  const Eigen::VectorXd g_beta = dm.X.transpose() * resid;
  Eigen::VectorXd g_u = -it.u;
  if (theta != 0.0) {
    for (Eigen::Index i = 0; i < dm.rows(); ++i) g_u[dm.group[static_cast<std::size_t>(i)]] += theta * resid[i];
  }
  Eigen::VectorXd rhs = g_beta;
  if (theta != 0.0) {
    for (int g = 0; g < dm.levels; ++g) rhs -= (theta * g_u[g] / c.d[g]) * c.a.col(g);
  }
  Eigen::VectorXd d_beta = solve_spd(c.S, rhs);
  Eigen::VectorXd d_u(dm.levels);
  for (int g = 0; g < dm.levels; ++g) d_u[g] = (g_u[g] - theta * c.a.col(g).dot(d_beta)) / c.d[g];
  return {std::move(d_beta), std::move(d_u)};
}

PirlsResult to_result(const Iterate& it, int iterations) {
  return PirlsResult{it.beta, it.u, it.deviance, it.penalty, iterations};
}

Iterate pirls_iterate(const DesignMatrix& dm, double theta, Eigen::VectorXd beta, Eigen::VectorXd u, double tol,
                      int max_iter, int* iterations) {
  Iterate cur = evaluate(dm, theta, std::move(beta), std::move(u));
  for (int iter = 1; iter <= max_iter; ++iter) {
    auto [d_beta, d_u] = newton_step(dm, theta, cur);
    double step = 1.0;
    Iterate next = evaluate(dm, theta, cur.beta + d_beta, cur.u + d_u);
    for (int h = 0; h < kMaxHalvings && !(next.penalized() <= cur.penalized()); ++h) {
      step *= 0.5;
      next = evaluate(dm, theta, cur.beta + step * d_beta, cur.u + step * d_u);
    }
    if (!std::isfinite(next.penalized())) {
      *iterations = iter;
      throw PirlsError(fmt::format("PIRLS produced a non-finite deviance at theta={}", theta), to_result(cur, iter));
    }
    const double change = std::abs(next.penalized() - cur.penalized()) / (std::abs(next.penalized()) + 0.1);
    if (next.penalized() > cur.penalized()) {
      // No descent even after halving: cur is stationary up to rounding, or the step is hopeless.
      *iterations = iter;
      if (change < tol) return cur;
      throw PirlsError(fmt::format("PIRLS step halving failed at theta={} (penalized deviance {} -> {})", theta,
                                   cur.penalized(), next.penalized()),
                       to_result(cur, iter));
    }
    cur = std::move(next);
    if (change < tol) {
      *iterations = iter;
      return cur;
    }
  }
  *iterations = max_iter;
  throw PirlsError(fmt::format("PIRLS did not converge in {} iterations at theta={}", max_iter, theta),
                   to_result(cur, max_iter));
}

void check_design(const DesignMatrix& dm) {
  const auto n = dm.rows();
  if (n == 0) throw UsageError("design has no rows");
  if (dm.y.size() != n || static_cast<Eigen::Index>(dm.group.size()) != n) {
    throw UsageError("design dimensions disagree: y, X and group must have the same number of rows");
  }
  if (dm.levels < 1) throw UsageError("design has no grouping levels");
}

double laplace_from(const DesignMatrix& dm, double theta, const Iterate& it) {
  if (theta == 0.0) return it.deviance;
  const Curvature c = curvature(dm, theta, it);
  return it.deviance + it.penalty + c.d.array().log().sum();
}

// Laplace objective over theta, cold-started from the plain logistic fit at
// every evaluation so that each value depends on theta alone.
class Objective {
 public:
  Objective(const DesignMatrix& dm, const FitOptions& opts) : dm_(dm), opts_(opts) {
    int iters = 0;
    glm_ = pirls_iterate(dm, 0.0, Eigen::VectorXd::Zero(dm.cols()), Eigen::VectorXd::Zero(dm.levels), opts.pirls_tol,
                         opts.pirls_max_iter, &iters);
  }

  double operator()(double theta) {
    theta = std::clamp(theta, 0.0, opts_.theta_max);
    if (auto it = cache_.find(theta); it != cache_.end()) return it->second;
    ++evaluations_;
    double value;
    try {
      value = laplace_from(dm_, theta, at(theta));
    } catch (const PirlsError& e) {
      failures_.push_back(e.what());
      value = std::numeric_limits<double>::infinity();
    }
    cache_.emplace(theta, value);
    return value;
  }

  Iterate at(double theta) const {
    if (theta == 0.0) return glm_;
    int iters = 0;
    return pirls_iterate(dm_, theta, glm_.beta, Eigen::VectorXd::Zero(dm_.levels), opts_.pirls_tol,
                         opts_.pirls_max_iter, &iters);
  }

  int evaluations() const noexcept { return evaluations_; }
  const std::vector<std::string>& failures() const noexcept { return failures_; }

 private:
  const DesignMatrix& dm_;
  const FitOptions& opts_;
  Iterate glm_;
  std::map<double, double> cache_;
  int evaluations_ = 0;
  std::vector<std::string> failures_;
};

struct OuterResult {
  double theta = 0.0;
  double value = 0.0;
  bool converged = false;
};

OuterResult nelder_mead_1d(Objective& f, double x0, double x1, double lo, double hi, double tol, int budget) {
  auto clamp = [&](double x) { return std::clamp(x, lo, hi); };
  x0 = clamp(x0);
  x1 = clamp(x1);
  double f0 = f(x0);
  double f1 = f(x1);
  const int start = f.evaluations();
  while (f.evaluations() - start < budget) {
    if (f1 < f0) {
      std::swap(x0, x1);
      std::swap(f0, f1);
    }
    if (std::abs(x1 - x0) <= tol) return {x0, f0, true};

    auto inside = [&] {
      const double xc = x0 + 0.5 * (x1 - x0);
      const double fc = f(xc);
      if (fc < f1) {
        x1 = xc;
        f1 = fc;
      } else {
        x1 = x0 + 0.5 * (x1 - x0);
        f1 = f(x1);
      }
    };

    const double xr = clamp(2.0 * x0 - x1);
    if (std::abs(xr - x0) <= 0.5 * tol) {
      inside();
      continue;
    }
    const double fr = f(xr);
    if (fr < f0) {
      const double xe = clamp(3.0 * x0 - 2.0 * x1);
      const double fe = f(xe);
      if (fe < fr) {
        x1 = xe;
        f1 = fe;
      } else {
        x1 = xr;
        f1 = fr;
      }
    } else if (fr < f1) {
      const double xc = x0 + 0.5 * (xr - x0);
      const double fc = f(xc);
      if (fc <= fr) {
        x1 = xc;
        f1 = fc;
      } else {
        x1 = x0 + 0.5 * (x1 - x0);
        f1 = f(x1);
      }
    } else {
      inside();
    }
  }
  if (f1 < f0) return {x1, f1, false};
  return {x0, f0, false};
}

OuterResult optimize_theta(Objective& f, const FitOptions& opts) {
  const double hi = opts.theta_max;
  OuterResult best;
  if (opts.optimizer == OuterOptimizer::nelder_mead) {
    const double start = std::min(1.0, hi);
    best = nelder_mead_1d(f, start, std::min(start + 0.5, hi) == start ? start * 0.5 : start + 0.5, 0.0, hi,
                          opts.outer_tol, kMaxOuterEvaluations);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double step = (0.1 + 0.4 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    double from = best.theta;
    double to = std::clamp(from + step, 0.0, hi);
    if (to == from) to = std::clamp(from - step, 0.0, hi);
    const OuterResult restart = nelder_mead_1d(f, from, to, 0.0, hi, opts.outer_tol, kMaxOuterEvaluations);
    const bool converged = best.converged && restart.converged;
    if (restart.value < best.value) best = restart;
    best.converged = converged;
  } else {
    const int bits = static_cast<int>(std::ceil(-std::log2(opts.outer_tol))) + 1;
    std::uintmax_t max_iter = kMaxOuterEvaluations;
    const auto [x, fx] = boost::math::tools::brent_find_minima([&](double t) { return f(t); }, 0.0, hi, bits, max_iter);
    best = {x, fx, max_iter < static_cast<std::uintmax_t>(kMaxOuterEvaluations)};
  }
  const double f_zero = f(0.0);
  if (f_zero <= best.value) {
    best.theta = 0.0;
    best.value = f_zero;
  }
  return best;
}

std::string format_fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  std::string s = fmt::format("{:.{}f}", v, digits);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

}  // namespace

std::string_view to_string(Covariate c) noexcept {
  switch (c) {
    case Covariate::variant: return "variant";
    case Covariate::gamma_centered: return "gamma_c";
  }
  return "unknown";
}

bool ModelSpec::has(Covariate c) const noexcept {
  return std::find(fixed_effects.begin(), fixed_effects.end(), c) != fixed_effects.end();
}

std::vector<std::string> ModelSpec::coefficient_names() const {
  std::vector<std::string> names{"(Intercept)"};
  for (auto c : fixed_effects) names.emplace_back(to_string(c));
  return names;
}

std::string ModelSpec::name() const {
  if (*this == glmm1()) return "glmm1";
  if (*this == glmm2()) return "glmm2";
  std::string formula = "correct ~";
  for (std::size_t i = 0; i < fixed_effects.size(); ++i) {
    formula += (i == 0 ? " " : " + ");
    formula += to_string(fixed_effects[i]);
  }
  return formula + " + (1 | template)";
}

std::string_view to_string(OuterOptimizer o) noexcept {
  switch (o) {
    case OuterOptimizer::nelder_mead: return "nelder_mead";
    case OuterOptimizer::coordinate_bounded: return "coordinate_bounded";
  }
  return "unknown";
}

std::optional<OuterOptimizer> parse_optimizer(std::string_view name) noexcept {
  if (name == "nelder_mead") return OuterOptimizer::nelder_mead;
  if (name == "coordinate_bounded") return OuterOptimizer::coordinate_bounded;
  return std::nullopt;
}

DesignMatrix make_design(Eigen::VectorXd y, Eigen::MatrixXd X, std::vector<int> group,
                         std::vector<std::string> column_names) {
  DesignMatrix dm;
  const Eigen::Index n = X.rows();
  if (y.size() != n || static_cast<Eigen::Index>(group.size()) != n) {
    throw UsageError("design dimensions disagree: y, X and group must have the same number of rows");
  }
  if (X.cols() == 0 || !(X.col(0).array() == 1.0).all()) throw UsageError("first design column must be all ones");
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != X.cols()) {
    throw UsageError("column name count does not match design columns");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw UsageError(fmt::format("outcome at row {} is not 0/1", i));
  }
  int levels = 0;
  for (int g : group) {
    if (g < 0) throw UsageError("negative group index");
    levels = std::max(levels, g + 1);
  }
  if (levels < 2) throw UsageError("grouping factor needs at least two levels");
  if (column_names.empty()) {
    column_names.emplace_back("(Intercept)");
    for (Eigen::Index j = 1; j < X.cols(); ++j) column_names.push_back(fmt::format("x{}", j));
  }
  dm.y = std::move(y);
  dm.X = std::move(X);
  dm.group = std::move(group);
  dm.levels = levels;
  dm.level_ids.resize(static_cast<std::size_t>(levels));
  for (int g = 0; g < levels; ++g) dm.level_ids[static_cast<std::size_t>(g)] = g;
  dm.column_names = std::move(column_names);
  return dm;
}

DesignMatrix build_design(const Dataset& cell, const ModelSpec& spec, std::span<const double> gamma_centered) {
  if (spec.fixed_effects.empty()) throw UsageError("model needs at least one covariate besides the intercept");
  for (std::size_t i = 0; i < spec.fixed_effects.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.fixed_effects.size(); ++j) {
      if (spec.fixed_effects[i] == spec.fixed_effects[j]) throw UsageError("duplicate covariate in model spec");
    }
  }
  const auto& recs = cell.records;
  const Eigen::Index n = static_cast<Eigen::Index>(recs.size());
  if (n == 0) throw UsageError("cannot build a design from an empty cell");

  std::vector<double> gamma;
  if (spec.has(Covariate::gamma_centered)) {
    if (!gamma_centered.empty()) {
      if (gamma_centered.size() != recs.size()) {
        throw UsageError(fmt::format("gamma column has {} entries for {} records", gamma_centered.size(), recs.size()));
      }
      gamma.assign(gamma_centered.begin(), gamma_centered.end());
    } else {
      std::vector<double> raw;
      raw.reserve(recs.size());
      for (const auto& r : recs) raw.push_back(gamma_of(r.question_text));
      gamma = center_gammas(raw);
    }
  }

  DesignMatrix dm;
  dm.y.resize(n);
  dm.X.resize(n, static_cast<Eigen::Index>(spec.fixed_effects.size()) + 1);
  dm.group.resize(recs.size());
  dm.column_names = spec.coefficient_names();
  std::unordered_map<std::int64_t, int> level_of;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = recs[static_cast<std::size_t>(i)];
    if (!r.correct) {
      throw DataError(fmt::format("record {} (model {}, template {}) has no correctness label", i, r.model,
                                  r.template_id));
    }
    dm.y[i] = *r.correct ? 1.0 : 0.0;
    dm.X(i, 0) = 1.0;
    for (std::size_t j = 0; j < spec.fixed_effects.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j) + 1;
      switch (spec.fixed_effects[j]) {
        case Covariate::variant: dm.X(i, col) = r.is_variant ? 1.0 : 0.0; break;
        case Covariate::gamma_centered: dm.X(i, col) = gamma[static_cast<std::size_t>(i)]; break;
      }
    }
    auto [it, inserted] = level_of.try_emplace(r.template_id, static_cast<int>(dm.level_ids.size()));
    if (inserted) dm.level_ids.push_back(r.template_id);
    dm.group[static_cast<std::size_t>(i)] = it->second;
  }
  dm.levels = static_cast<int>(dm.level_ids.size());
  if (dm.levels < 2) {
    throw UsageError(fmt::format("grouping factor has {} level(s); at least two templates are required", dm.levels));
  }
  return dm;
}

PirlsResult pirls_solve(const DesignMatrix& dm, double theta, const Eigen::VectorXd& beta_init,
                        const Eigen::VectorXd& u_init, double tol, int max_iter) {
  check_design(dm);
  if (!(theta >= 0.0)) throw UsageError("theta must be non-negative");
  if (!(tol > 0.0) || max_iter < 1) throw UsageError("PIRLS tolerance and iteration limit must be positive");
  Eigen::VectorXd beta = beta_init.size() == 0 ? Eigen::VectorXd::Zero(dm.cols()) : beta_init;
  Eigen::VectorXd u = u_init.size() == 0 ? Eigen::VectorXd::Zero(dm.levels) : u_init;
  if (beta.size() != dm.cols() || u.size() != dm.levels) throw UsageError("initial values have the wrong length");
  int iterations = 0;
  const Iterate it = pirls_iterate(dm, theta, std::move(beta), std::move(u), tol, max_iter, &iterations);
  return to_result(it, iterations);
}

double laplace_deviance(const DesignMatrix& dm, double theta, const FitOptions& opts) {
  check_design(dm);
  if (!(theta >= 0.0)) throw UsageError("theta must be non-negative");
  Objective f(dm, opts);
  const Iterate it = f.at(theta);
  return laplace_from(dm, theta, it);
}

double wald_p_value(double z) noexcept {
  if (std::isnan(z)) return kNaN;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

FixedEffectStat make_stat(std::string name, double estimate, double std_error) {
  FixedEffectStat s;
  s.name = std::move(name);
  s.estimate = estimate;
  s.std_error = std_error;
  s.odds_ratio = std::exp(estimate);
  if (std::isfinite(std_error) && std_error > 0.0) {
    s.z_value = estimate / std_error;
    s.p_value = wald_p_value(s.z_value);
    s.ci_lo = std::exp(estimate - kWaldQuantile * std_error);
    s.ci_hi = std::exp(estimate + kWaldQuantile * std_error);
  } else {
    s.z_value = kNaN;
    s.p_value = kNaN;
    s.ci_lo = kNaN;
    s.ci_hi = kNaN;
    s.reliable = false;
  }
  return s;
}

DegeneracyCheck detect_degenerate(const Eigen::MatrixXd& information, std::span<const FixedEffectStat> stats) {
  DegeneracyCheck out;
  if (information.size() > 0) {
    if (!information.allFinite()) {
      out.notes.emplace_back("information matrix has non-finite entries");
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(information);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(information, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      if (llt.info() != Eigen::Success) {
        out.notes.emplace_back(fmt::format("information matrix is not positive definite (Cholesky failed, "
                                           "eigenvalues in [{:.3g}, {:.3g}])",
                                           lo, hi));
      } else if (lo <= kPdTolerance * std::max(1.0, hi)) {
        out.notes.emplace_back(fmt::format(
            "information matrix is numerically singular (smallest eigenvalue {:.3g}, largest {:.3g})", lo, hi));
      }
    }
  }
  for (const auto& s : stats) {
    if (!std::isfinite(s.std_error)) {
      out.notes.push_back(fmt::format("standard error of {} is not finite", s.name));
    } else if (s.std_error < kDegenerateSe && std::abs(s.z_value) > kDegenerateZ) {
      out.notes.push_back(fmt::format("{} has SE {:.3g} < {} with |z| = {:.2f} > {}", s.name, s.std_error,
                                      kDegenerateSe, std::abs(s.z_value), kDegenerateZ));
    }
  }
  out.degenerate = !out.notes.empty();
  return out;
}

const FixedEffectStat* FitResult::find(std::string_view name) const noexcept {
  for (const auto& s : stats) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

FitResult fit_glmm(const DesignMatrix& dm, const ModelSpec& spec, const FitOptions& opts) {
  check_design(dm);
  if (dm.cols() != static_cast<Eigen::Index>(spec.fixed_effects.size()) + 1) {
    throw UsageError(fmt::format("design has {} columns but model {} needs {}", dm.cols(), spec.name(),
                                 spec.fixed_effects.size() + 1));
  }
  if (!(opts.pirls_tol > 0.0) || !(opts.outer_tol > 0.0) || opts.pirls_max_iter < 1) {
    throw UsageError("fit tolerances and iteration limits must be positive");
  }
  if (!(opts.theta_max > 0.0)) throw UsageError("theta upper bound must be positive");

  FitResult fit;
  fit.spec = spec;
  fit.n_obs = static_cast<int>(dm.rows());
  fit.n_groups = dm.levels;
  const auto names = dm.column_names.size() == static_cast<std::size_t>(dm.cols()) ? dm.column_names
                                                                                     : spec.coefficient_names();

  std::optional<Objective> objective;
  try {
    objective.emplace(dm, opts);
  } catch (const PirlsError& e) {
    fit.converged = false;
    fit.notes.push_back(std::string("logistic starting fit failed: ") + e.what());
    return fit;
  }

  const OuterResult outer = optimize_theta(*objective, opts);
  fit.outer_evaluations = objective->evaluations();
  for (const auto& msg : objective->failures()) fit.notes.push_back("inner failure: " + msg);
  fit.theta = outer.theta;
  fit.converged = outer.converged && std::isfinite(outer.value);
  if (!outer.converged) {
    fit.notes.push_back(fmt::format("{} reached its evaluation limit without meeting outer_tol={}",
                                    to_string(opts.optimizer), opts.outer_tol));
  }

  Iterate final_it;
  try {
    final_it = objective->at(outer.theta);
  } catch (const PirlsError& e) {
    fit.converged = false;
    fit.notes.push_back(std::string("PIRLS failed at the optimum: ") + e.what());
    const auto& last = e.last_iterate();
    final_it = evaluate(dm, outer.theta, last.beta, last.u);
  }
  fit.deviance = laplace_from(dm, outer.theta, final_it);
  fit.log_likelihood = -0.5 * fit.deviance;
  fit.information = curvature(dm, outer.theta, final_it).S;

  Eigen::VectorXd se = Eigen::VectorXd::Constant(dm.cols(), kNaN);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fit.information);
  if (fit.information.allFinite() && lu.isInvertible()) {
    const Eigen::MatrixXd vcov = lu.inverse();
    for (Eigen::Index j = 0; j < dm.cols(); ++j) {
      const double v = vcov(j, j);
      se[j] = v > 0.0 ? std::sqrt(v) : kNaN;
    }
  }
  for (Eigen::Index j = 0; j < dm.cols(); ++j) {
    fit.stats.push_back(make_stat(names[static_cast<std::size_t>(j)], final_it.beta[j], se[j]));
  }

  const auto check = detect_degenerate(fit.information, fit.stats);
  fit.degenerate = check.degenerate;
  for (const auto& note : check.notes) fit.notes.push_back(note);
  if (fit.degenerate) {
    for (auto& s : fit.stats) s.reliable = false;
  }
  return fit;
}

MultiOptimizerReport multi_optimizer_refit(const DesignMatrix& dm, const ModelSpec& spec, const FitOptions& opts,
                                           std::span<const OuterOptimizer> optimizers) {
  if (optimizers.size() < 2) throw UsageError("multi-optimizer refit needs at least two optimizers");
  MultiOptimizerReport report;
  report.coefficient_names = spec.coefficient_names();
  std::vector<double> lo(report.coefficient_names.size(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(report.coefficient_names.size(), -std::numeric_limits<double>::infinity());
  bool any = false;
  for (auto opt : optimizers) {
    OptimizerRun run;
    run.optimizer = opt;
    FitOptions o = opts;
    o.optimizer = opt;
    try {
      const FitResult fit = fit_glmm(dm, spec, o);
      run.theta = fit.theta;
      run.degenerate = fit.degenerate;
      if (!fit.converged) {
        run.error = fit.notes.empty() ? "did not converge" : fit.notes.back();
      } else {
        std::vector<double> est, se;
        for (const auto& s : fit.stats) {
          est.push_back(s.estimate);
          se.push_back(s.std_error);
        }
        for (std::size_t j = 0; j < est.size() && j < lo.size(); ++j) {
          lo[j] = std::min(lo[j], est[j]);
          hi[j] = std::max(hi[j], est[j]);
        }
        run.estimates = std::move(est);
        run.std_errors = std::move(se);
        any = true;
      }
    } catch (const Error& e) {
      run.error = e.what();
    }
    report.runs.push_back(std::move(run));
  }
  report.spread.assign(lo.size(), kNaN);
  if (any) {
    for (std::size_t j = 0; j < lo.size(); ++j) report.spread[j] = hi[j] - lo[j];
  }
  return report;
}

std::vector<WaldRow> wald_table(const FitResult& fit, double p_floor) {
  if (!fit.converged) throw UsageError("cannot tabulate a fit that did not converge");
  std::vector<WaldRow> rows;
  for (const auto& s : fit.stats) {
    WaldRow row;
    row.name = s.name;
    row.odds_ratio = format_fixed(s.odds_ratio, 2);
    row.ci = "[" + format_fixed(s.ci_lo, 2) + ", " + format_fixed(s.ci_hi, 2) + "]";
    row.z = format_fixed(s.z_value, 2);
    row.se = std::isfinite(s.std_error) && s.std_error < 0.005 ? "< 0.01" : format_fixed(s.std_error, 2);
    if (!std::isfinite(s.p_value)) {
      row.p = "NA";
    } else if (s.p_value < p_floor) {
      row.p = "< " + fmt::format("{:g}", p_floor);
    } else {
      row.p = format_fixed(s.p_value, 3);
    }
    row.unreliable = fit.degenerate || !s.reliable;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace benchdelta::glmm
