#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "benchdelta/glmm.hpp"
#include "benchdelta/synthlab.hpp"

using namespace benchdelta;
using namespace benchdelta::glmm;

namespace {

struct RandomDesign {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<int> group;
  int levels = 0;
};

// Random-intercept logistic data: intercept, a 0/1 variant flag and
// optionally a continuous covariate.
RandomDesign random_design(std::uint64_t seed, int q, int m, bool continuous, double theta = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const int p = continuous ? 3 : 2;
  RandomDesign d;
  d.levels = q;
  d.y.resize(q * m);
  d.X.resize(q * m, p);
  for (int g = 0; g < q; ++g) {
    const double u = theta * normal(rng);
    for (int r = 0; r < m; ++r) {
      const int i = g * m + r;
      d.X(i, 0) = 1.0;
      d.X(i, 1) = r == 0 ? 0.0 : 1.0;
      if (continuous) d.X(i, 2) = normal(rng);
      double eta = -0.3 - 0.6 * d.X(i, 1) + u;
      if (continuous) eta += 0.4 * d.X(i, 2);
      d.y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
      d.group.push_back(g);
    }
  }
  return d;
}

DesignMatrix to_design(const RandomDesign& d) {
  std::vector<std::string> names{"(Intercept)", "variant"};
  if (d.X.cols() == 3) names.push_back("gamma_c");
  return make_design(d.y, d.X, d.group, names);
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
  std::vector<std::vector<double>> out(X.rows(), std::vector<double>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[i][j] = X(i, j);
  return out;
}

std::vector<int> ints_of(const Eigen::VectorXd& y) {
  std::vector<int> out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = static_cast<int>(y[i]);
  return out;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

EvalRecord graded(std::int64_t tid, bool variant, bool correct, std::string text = "Q") {
  EvalRecord r;
  r.model = "m";
  r.prompt_format = PromptFormat::gsm;
  r.template_id = tid;
  r.is_variant = variant;
  r.question_text = std::move(text);
  r.correct = correct;
  return r;
}

}  // namespace

TEST(BuildDesign, Shapes) {
  Dataset cell;
  int k = 0;
  for (std::int64_t t : {7, 3}) {
    cell.records.push_back(graded(t, false, true, "There are 10 cats"));
    cell.records.push_back(graded(t, true, k++ % 2 == 0, "There are 250 cats"));
    cell.records.push_back(graded(t, true, false, "There are 4000 cats"));
  }
  const auto d1 = build_design(cell, ModelSpec::glmm1());
  EXPECT_EQ(d1.rows(), 6);
  EXPECT_EQ(d1.cols(), 2);
  EXPECT_EQ(d1.levels, 2);
  EXPECT_EQ(d1.level_ids, (std::vector<std::int64_t>{7, 3}));
  EXPECT_EQ(d1.X(1, 1), 1.0);
  EXPECT_EQ(d1.X(3, 1), 0.0);
  EXPECT_EQ(d1.y[0], 1.0);

  const auto d2 = build_design(cell, ModelSpec::glmm2());
  EXPECT_EQ(d2.cols(), 3);
  EXPECT_NEAR(d2.X.col(2).sum(), 0.0, 1e-12);
  EXPECT_EQ(d2.column_names, (std::vector<std::string>{"(Intercept)", "variant", "gamma_c"}));
}

TEST(BuildDesign, PaperSizedFixture) {
  synthlab::SimParams p;
  p.seed = 11;
  const auto sim = synthlab::simulate_dataset(p);
  const auto dm = build_design(sim.dataset, ModelSpec::glmm1());
  EXPECT_EQ(dm.rows(), 5100);
  EXPECT_EQ(dm.levels, 100);
}

TEST(BuildDesign, Errors) {
  Dataset one;
  one.records = {graded(1, false, true), graded(1, true, false)};
  EXPECT_THROW(build_design(one, ModelSpec::glmm1()), UsageError);
  Dataset ungraded;
  ungraded.records = {graded(1, false, true), graded(2, false, true)};
  ungraded.records[1].correct.reset();
  EXPECT_THROW(build_design(ungraded, ModelSpec::glmm1()), DataError);
}

TEST(Pirls, ThetaZeroIsLogisticMle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto d = random_design(100 + s, 8, 6, true);
    const auto oracle_fit = oracle::logistic_irls(rows_of(d.X), ints_of(d.y));
    const auto r = pirls_solve(to_design(d), 0.0);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.beta[j], oracle_fit.beta[j], 1e-6) << s;
  }
}

TEST(Laplace, ReducesToLogisticDeviance) {
  for (std::uint64_t s = 0; s < 25; ++s) {
    const auto d = random_design(s, 4 + static_cast<int>(s % 7), 3 + static_cast<int>(s % 5), s % 2 == 0);
    const double ours = laplace_deviance(to_design(d), 0.0);
    const double ref = oracle::logistic_irls(rows_of(d.X), ints_of(d.y)).deviance;
    EXPECT_NEAR(ours, ref, 1e-6 * std::abs(ref)) << "design " << s;
  }
}

TEST(Laplace, WithinTwoPercentOfAdaptiveQuadrature) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int q = 4 + static_cast<int>(s % 12);
    const int m = 3 + static_cast<int>(s % 8);
    const auto d = random_design(1000 + s, q, m, s % 3 == 0);
    const auto dm = to_design(d);
    for (double theta : {0.5, 1.0, 2.0}) {
      const auto mode = pirls_solve(dm, theta);
      const double lap = laplace_deviance(dm, theta);
      const double quad = oracle::aghq_deviance(d.X, d.y, d.group, d.levels, mode.beta, theta, 15);
      EXPECT_LT(std::abs(lap - quad), 0.02 * std::abs(quad)) << "design " << s << " theta " << theta;
    }
  }
}

TEST(Laplace, ContinuousOnThetaGrid) {
  const auto dm = to_design(random_design(77, 12, 8, false));
  for (int k = 0; k <= 30; ++k) {
    const double t = 0.1 * k;
    const double f0 = laplace_deviance(dm, t);
    const double f1 = laplace_deviance(dm, t + 1e-6);
    EXPECT_TRUE(std::isfinite(f0));
    EXPECT_LT(std::abs(f1 - f0), 1e-3) << "theta " << t;
    EXPECT_EQ(f0, laplace_deviance(dm, t));
  }
}

TEST(Pirls, AllOnesGroupHasFiniteMode) {
  auto d = random_design(5, 6, 8, false);
  for (int r = 0; r < 8; ++r) d.y[r] = 1.0;
  const auto dm = to_design(d);
  const double theta = 2.0;
  const auto res = pirls_solve(dm, theta);
  ASSERT_TRUE(std::isfinite(res.u[0]));
  EXPECT_GT(res.u[0], 0.0);

  // Independent 1-d maximization of the group-0 penalized likelihood with
  // beta held at the returned value: bisection on its derivative.
  auto slope = [&](double u) {
    double g = -u;
    for (int r = 0; r < 8; ++r) {
      const double eta = d.X.row(r).dot(res.beta) + theta * u;
      g += theta * (d.y[r] - 1.0 / (1.0 + std::exp(-eta)));
    }
    return g;
  };
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(res.u[0], 0.5 * (lo + hi), 1e-5);
}

TEST(Fit, LabelSymmetry) {
  auto d = random_design(21, 25, 10, false);
  const auto a = fit_glmm(to_design(d), ModelSpec::glmm1());
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] = 1.0 - d.y[i];
  const auto b = fit_glmm(to_design(d), ModelSpec::glmm1());
  ASSERT_TRUE(a.converged && b.converged);
  for (std::size_t j = 0; j < a.stats.size(); ++j) EXPECT_NEAR(a.stats[j].estimate, -b.stats[j].estimate, 1e-6);
  EXPECT_NEAR(a.theta, b.theta, 1e-6);
}

TEST(Fit, GroupPermutationInvariance) {
  auto d = random_design(22, 20, 6, true);
  const auto a = fit_glmm(to_design(d), ModelSpec::glmm2());
  std::vector<int> perm(d.levels);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  for (auto& g : d.group) g = perm[g];
  const auto b = fit_glmm(to_design(d), ModelSpec::glmm2());
  for (std::size_t j = 0; j < a.stats.size(); ++j) EXPECT_NEAR(a.stats[j].estimate, b.stats[j].estimate, 1e-9);
  EXPECT_NEAR(a.theta, b.theta, 1e-9);
  EXPECT_NEAR(a.deviance, b.deviance, 1e-9);
}

TEST(Fit, RecoversGeneratingParameters) {
  synthlab::SimParams p;
  p.seed = 2024;
  const auto sim = synthlab::simulate_dataset(p);
  const auto fit = fit_glmm(build_design(sim.dataset, ModelSpec::glmm1()), ModelSpec::glmm1());
  ASSERT_TRUE(fit.converged);
  EXPECT_FALSE(fit.degenerate);
  EXPECT_EQ(fit.n_obs, 5100);
  EXPECT_EQ(fit.n_groups, 100);
  const auto* b0 = fit.find("(Intercept)");
  const auto* bv = fit.find("variant");
  ASSERT_TRUE(b0 && bv);
  EXPECT_LT(std::abs(b0->estimate - p.beta_intercept), 3 * b0->std_error);
  EXPECT_LT(std::abs(bv->estimate - p.beta_variant), 3 * bv->std_error);
  EXPECT_NEAR(fit.theta, 1.0, 0.3);
  EXPECT_NEAR(fit.log_likelihood, -fit.deviance / 2, 1e-9);
}

TEST(Fit, OptimizersAgree) {
  synthlab::SimParams p;
  p.n_templates = 40;
  p.n_variants_per_template = 20;
  p.seed = 5;
  const auto sim = synthlab::simulate_dataset(p);
  const auto dm = build_design(sim.dataset, ModelSpec::glmm1());
  const std::vector<OuterOptimizer> both{OuterOptimizer::nelder_mead, OuterOptimizer::coordinate_bounded};
  const auto rep = multi_optimizer_refit(dm, ModelSpec::glmm1(), {}, both);
  ASSERT_EQ(rep.runs.size(), 2u);
  for (const auto& run : rep.runs) EXPECT_TRUE(run.estimates.has_value()) << run.error;
  ASSERT_EQ(rep.coefficient_names[1], "variant");
  EXPECT_LT(rep.spread[1], 0.01);

  const std::vector<OuterOptimizer> one{OuterOptimizer::nelder_mead};
  EXPECT_THROW(multi_optimizer_refit(dm, ModelSpec::glmm1(), {}, one), UsageError);
}

TEST(Fit, CompleteSeparationIsDegenerate) {
  RandomDesign d;
  const int q = 10, m = 6;
  d.levels = q;
  d.y.resize(q * m);
  d.X.resize(q * m, 2);
  for (int g = 0; g < q; ++g) {
    for (int r = 0; r < m; ++r) {
      const int i = g * m + r;
      d.X(i, 0) = 1.0;
      d.X(i, 1) = r == 0 ? 0.0 : 1.0;
      d.y[i] = r == 0 ? 1.0 : 0.0;
      d.group.push_back(g);
    }
  }
  const auto fit = fit_glmm(to_design(d), ModelSpec::glmm1());
  EXPECT_TRUE(fit.degenerate);
  EXPECT_FALSE(fit.notes.empty());
  for (const auto& s : fit.stats) EXPECT_FALSE(s.reliable);
}

TEST(Fit, DuplicatedColumnIsDegenerate) {
  auto d = random_design(31, 15, 6, true);
  d.X.col(2) = d.X.col(1);
  const auto fit = fit_glmm(to_design(d), ModelSpec::glmm2());
  EXPECT_TRUE(fit.degenerate);
  EXPECT_FALSE(fit.notes.empty());
}

TEST(Degeneracy, PaperRows) {
  Eigen::Matrix2d healthy;
  healthy << 40.0, 10.0, 10.0, 12.0;
  const std::vector<FixedEffectStat> bad{make_stat("variant", -0.3149, 0.3149 / 711.02)};
  EXPECT_NEAR(bad[0].z_value, -711.02, 1e-9);
  const auto flagged = detect_degenerate(healthy, bad);
  EXPECT_TRUE(flagged.degenerate);
  EXPECT_FALSE(flagged.notes.empty());

  const std::vector<FixedEffectStat> ok{make_stat("variant", -0.8874, 0.34)};
  EXPECT_FALSE(detect_degenerate(healthy, ok).degenerate);

  Eigen::Matrix2d singular;
  singular << 1.0, 1.0, 1.0, 1.0;
  EXPECT_TRUE(detect_degenerate(singular, ok).degenerate);

  const std::vector<FixedEffectStat> nan_se{make_stat("variant", -0.5, std::nan(""))};
  EXPECT_TRUE(detect_degenerate(healthy, nan_se).degenerate);
}

TEST(Degeneracy, HealthyTableProfilesNotFlagged) {
  // (odds ratio, SE) pairs spanning the healthy rows of the published table
  const std::vector<std::pair<double, double>> rows{{0.41, 0.34}, {0.62, 0.41}, {0.98, 0.28}, {0.23, 0.28},
                                                    {0.50, 0.27}, {1.23, 0.29}, {0.60, 0.48}, {0.61, 0.27}};
  Eigen::Matrix2d info;
  info << 30.0, 8.0, 8.0, 14.0;
  for (const auto& [or_, se] : rows) {
    const std::vector<FixedEffectStat> s{make_stat("variant", std::log(or_), se)};
    EXPECT_FALSE(detect_degenerate(info, s).degenerate) << or_;
  }
}

TEST(Wald, GemmaRow) {
  const auto s = make_stat("variant", std::log(0.41), 0.34);
  EXPECT_NEAR(s.estimate, -0.8916, 1e-4);
  EXPECT_EQ(round2(s.ci_lo), 0.21);
  EXPECT_EQ(round2(s.ci_hi), 0.80);
  EXPECT_NEAR(s.z_value, -2.62, 0.02);
  EXPECT_NEAR(s.p_value, 0.009, 0.001);
  EXPECT_NEAR(wald_p_value(-2.61), 0.009, 0.001);
}

TEST(Wald, ReportingConsistencyIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> est(-3, 3), se(0.05, 2);
  for (int i = 0; i < 200; ++i) {
    const double e = est(rng), s = se(rng);
    const auto st = make_stat("x", e, s);
    EXPECT_EQ(st.odds_ratio, std::exp(e));
    EXPECT_EQ(st.ci_lo, std::exp(e - kWaldQuantile * s));
    EXPECT_EQ(st.ci_hi, std::exp(e + kWaldQuantile * s));
    EXPECT_LE(st.ci_lo, st.ci_hi);
    EXPECT_NEAR(st.p_value, oracle::normal_two_sided(st.z_value), 1e-14);
    EXPECT_GE(st.p_value, 0.0);
    EXPECT_LE(st.p_value, 1.0);
  }
}

TEST(Wald, TableFormatting) {
  FitResult fit;
  fit.converged = true;
  fit.spec = ModelSpec::glmm1();
  fit.stats = {make_stat("(Intercept)", 0.0, 0.2), make_stat("variant", -1.2, 0.34)};
  auto rows = wald_table(fit);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].odds_ratio, "1.00");
  EXPECT_EQ(rows[0].p, "1.000");
  EXPECT_EQ(rows[1].p, "< 0.001");
  EXPECT_EQ(rows[1].ci, "[0.15, 0.59]");
  EXPECT_FALSE(rows[1].unreliable);

  fit.degenerate = true;
  rows = wald_table(fit);
  EXPECT_TRUE(rows[1].unreliable);

  fit.converged = false;
  EXPECT_THROW(wald_table(fit), UsageError);
}

TEST(Json, RoundTrip) {
  const auto fit = fit_glmm(to_design(random_design(41, 12, 7, true)), ModelSpec::glmm2());
  const auto back = fit_from_json(fit_to_json(fit));
  EXPECT_EQ(back.spec, fit.spec);
  EXPECT_EQ(back.stats, fit.stats);
  EXPECT_EQ(back.theta, fit.theta);
  EXPECT_EQ(back.converged, fit.converged);
  EXPECT_EQ(back.degenerate, fit.degenerate);
  EXPECT_EQ(back.deviance, fit.deviance);
  EXPECT_EQ(back.n_obs, fit.n_obs);
  EXPECT_THROW(fit_from_json("{\"spec\": 3"), DataError);
}
