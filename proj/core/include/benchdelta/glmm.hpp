#pragma once

// Binomial-logit mixed models with a single random intercept per template:
//
//   logit P(correct_i) = x_i' beta + theta * u_g(i),   u_g ~ N(0, 1)
//
// theta is the random-intercept standard deviation on the link scale. For a
// fixed theta, penalized IRLS finds the joint mode of (beta, u); the outer
// optimizer minimizes the Laplace-approximated deviance over theta.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "benchdelta/errors.hpp"
#include "benchdelta/evalstore.hpp"

namespace benchdelta::glmm {

enum class Covariate { variant, gamma_centered };

std::string_view to_string(Covariate c) noexcept;

struct ModelSpec {
  std::vector<Covariate> fixed_effects;  // intercept is implicit and always first

  /// correct ~ variant + (1 | template)
  static ModelSpec glmm1() { return {{Covariate::variant}}; }
  /// correct ~ variant + gamma_c + (1 | template)
  static ModelSpec glmm2() { return {{Covariate::variant, Covariate::gamma_centered}}; }

  bool has(Covariate c) const noexcept;
  std::vector<std::string> coefficient_names() const;
  /// "glmm1", "glmm2", or a formula string for other covariate lists.
  std::string name() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DesignMatrix {
  Eigen::VectorXd y;            // 0/1 outcomes
  Eigen::MatrixXd X;            // n x p, column 0 all ones
  std::vector<int> group;       // level index per row
  int levels = 0;               // number of template groups q
  std::vector<std::int64_t> level_ids;  // template id of each level, in order of first appearance
  std::vector<std::string> column_names;

  Eigen::Index rows() const noexcept { return X.rows(); }
  Eigen::Index cols() const noexcept { return X.cols(); }
};

/// Builds the design for one cell. When the spec includes gamma_centered and
/// `gamma_centered` is empty, loads are computed from question text and
/// centered over this cell. Throws DataError for an ungraded record and
/// UsageError when fewer than two template levels are present.
DesignMatrix build_design(const Dataset& cell, const ModelSpec& spec, std::span<const double> gamma_centered = {});

/// Low-level constructor used by the simulation lab and tests.
DesignMatrix make_design(Eigen::VectorXd y, Eigen::MatrixXd X, std::vector<int> group,
                         std::vector<std::string> column_names);

enum class OuterOptimizer { nelder_mead, coordinate_bounded };

std::string_view to_string(OuterOptimizer o) noexcept;
std::optional<OuterOptimizer> parse_optimizer(std::string_view name) noexcept;

struct FitOptions {
  OuterOptimizer optimizer = OuterOptimizer::nelder_mead;
  double theta_max = 10.0;
  double pirls_tol = 1e-8;
  int pirls_max_iter = 200;
  double outer_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct PirlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;           // spherical random effects (unit variance)
  double deviance = 0.0;       // conditional deviance, -2 sum log p(y | beta, u)
  double penalty = 0.0;        // ||u||^2
  int iterations = 0;
};

class PirlsError : public FitError {
 public:
  PirlsError(std::string message, PirlsResult last) : FitError(std::move(message)), last_(std::move(last)) {}
  const PirlsResult& last_iterate() const noexcept { return last_; }

 private:
  PirlsResult last_;
};

/// Penalized IRLS for fixed theta: maximizes
///   sum_i [y_i eta_i - log(1 + exp(eta_i))] - ||u||^2 / 2,  eta = X beta + theta Z u.
/// Newton steps on the joint system with step halving (up to 10 times) when
/// the penalized deviance increases. Empty init vectors start from zero.
/// Throws PirlsError carrying the last iterate when the relative change never
/// falls below `tol` within `max_iter` iterations.
PirlsResult pirls_solve(const DesignMatrix& dm, double theta, const Eigen::VectorXd& beta_init = {},
                        const Eigen::VectorXd& u_init = {}, double tol = 1e-8, int max_iter = 200);

/// Laplace approximation of -2 log marginal likelihood at theta, with beta at
/// the joint PIRLS mode. Equals the ordinary logistic deviance at theta = 0.
/// Deterministic in (dm, theta).
double laplace_deviance(const DesignMatrix& dm, double theta, const FitOptions& opts = {});

struct FixedEffectStat {
  std::string name;
  double estimate = 0.0;   // log odds ratio
  double std_error = 0.0;
  double z_value = 0.0;
  double p_value = 1.0;
  double odds_ratio = 1.0;
  double ci_lo = 1.0;      // exp(estimate - 1.96 se)
  double ci_hi = 1.0;      // exp(estimate + 1.96 se)
  bool reliable = true;

  friend bool operator==(const FixedEffectStat&, const FixedEffectStat&) = default;
};

inline constexpr double kWaldQuantile = 1.96;

/// Wald row from an estimate and its standard error; every derived field is
/// computed from these two numbers only.
FixedEffectStat make_stat(std::string name, double estimate, double std_error);

/// Two-sided normal p-value 2 (1 - Phi(|z|)).
double wald_p_value(double z) noexcept;

struct FitResult {
  ModelSpec spec;
  std::vector<FixedEffectStat> stats;
  double theta = 0.0;
  double deviance = 0.0;        // Laplace deviance at the optimum
  double log_likelihood = 0.0;  // -deviance / 2
  bool converged = false;
  bool degenerate = false;
  std::vector<std::string> notes;
  Eigen::MatrixXd information;  // fixed-effect information, random effects profiled out
  int n_obs = 0;
  int n_groups = 0;
  int outer_evaluations = 0;

  const FixedEffectStat* find(std::string_view name) const noexcept;
};

FitResult fit_glmm(const DesignMatrix& dm, const ModelSpec& spec, const FitOptions& opts = {});

struct DegeneracyCheck {
  bool degenerate = false;
  std::vector<std::string> notes;
};

inline constexpr double kDegenerateSe = 0.01;
inline constexpr double kDegenerateZ = 50.0;
inline constexpr double kPdTolerance = 1e-8;

/// Flags a fit whose inferential statistics cannot be trusted: the
/// information matrix is not positive definite (Cholesky fails or its
/// smallest eigenvalue is below kPdTolerance * max(1, largest)), any standard
/// error is non-finite, or any SE < 0.01 comes with |z| > 50.
DegeneracyCheck detect_degenerate(const Eigen::MatrixXd& information, std::span<const FixedEffectStat> stats);

struct OptimizerRun {
  OuterOptimizer optimizer;
  std::optional<std::vector<double>> estimates;  // nullopt when this refit failed
  std::optional<std::vector<double>> std_errors;
  double theta = 0.0;
  bool degenerate = false;
  std::string error;
};

struct MultiOptimizerReport {
  std::vector<std::string> coefficient_names;
  std::vector<OptimizerRun> runs;
  std::vector<double> spread;  // max - min per coefficient over successful runs
};

/// Refits with each optimizer in `optimizers` (at least two, else
/// UsageError). Per-optimizer failures are recorded, not thrown.
MultiOptimizerReport multi_optimizer_refit(const DesignMatrix& dm, const ModelSpec& spec, const FitOptions& opts,
                                           std::span<const OuterOptimizer> optimizers);

struct WaldRow {
  std::string name;
  std::string odds_ratio;
  std::string ci;
  std::string z;
  std::string se;
  std::string p;
  bool unreliable = false;
};

/// Display rows: OR/CI/z/SE to 2 decimals, p to 3 decimals, p below
/// `p_floor` shown as "< δ". Degenerate fits get unreliable rows.
/// Throws UsageError when the fit did not converge.
std::vector<WaldRow> wald_table(const FitResult& fit, double p_floor = 0.001);

/// {spec, theta, coefficients: [{name, estimate, se, z, p, or, ci_lo, ci_hi}],
///  converged, degenerate, notes, log_likelihood, deviance, n_obs, n_groups}.
/// Non-finite numbers are written as null.
std::string fit_to_json(const FitResult& fit, int indent = 2);
/// Inverse of fit_to_json (the information matrix is not serialized).
/// Throws DataError on malformed input.
FitResult fit_from_json(std::string_view text);

}  // namespace benchdelta::glmm
