#include "benchdelta/synthlab.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include "benchdelta/csv.hpp"
#include "benchdelta/errors.hpp"
#include "benchdelta/numload.hpp"

namespace benchdelta::synthlab {
namespace {

double inv_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("NA"); }

struct ReplicateOutcome {
  std::vector<ReplicateRow> rows;  // one per tracked coefficient, block order
  std::vector<std::string> notes;
  double naive_p = 1.0;
};

struct Target {
  glmm::ModelSpec spec;
  std::string coefficient;
  double truth;
};

std::vector<Target> targets_for(const SimParams& p) {
  std::vector<Target> t{{glmm::ModelSpec::glmm1(), "variant", p.beta_variant}};
  if (p.beta_gamma != 0.0) {
    t.push_back({glmm::ModelSpec::glmm2(), "variant", p.beta_variant});
    t.push_back({glmm::ModelSpec::glmm2(), "gamma_c", p.beta_gamma});
  }
  return t;
}

ReplicateOutcome run_replicate(const SimParams& base, int r, const std::vector<Target>& targets,
                               const ExperimentOptions& opts) {
  SimParams p = base;
  p.seed = replicate_seed(base.seed, r);
  const SimulatedDataset sim = simulate_dataset(p);

  ReplicateOutcome out;
  out.naive_p = naive_two_proportion_p(sim.dataset);

  std::optional<glmm::ModelSpec> fitted_spec;
  glmm::FitResult fit;
  std::string failure;
  for (const auto& target : targets) {
    if (!fitted_spec || !(*fitted_spec == target.spec)) {
      fitted_spec = target.spec;
      failure.clear();
      try {
        const auto dm = glmm::build_design(sim.dataset, target.spec, sim.gamma_centered);
        fit = glmm::fit_glmm(dm, target.spec, opts.fit);
      } catch (const Error& e) {
        failure = e.what();
        out.notes.push_back(fmt::format("replicate {}: {} failed: {}", r, target.spec.name(), failure));
      }
    }
    ReplicateRow row;
    row.replicate = r;
    if (!failure.empty()) {
      row.converged = false;
      row.estimate = row.se = row.p = std::numeric_limits<double>::quiet_NaN();
      out.rows.push_back(row);
      continue;
    }
    const auto* stat = fit.find(target.coefficient);
    row.estimate = stat->estimate;
    row.se = stat->std_error;
    row.p = stat->p_value;
    row.degenerate = fit.degenerate;
    row.converged = fit.converged;
    row.covered = std::isfinite(row.se) && std::abs(row.estimate - target.truth) <= glmm::kWaldQuantile * row.se;
    if (!fit.converged) out.notes.push_back(fmt::format("replicate {}: {} did not converge", r, target.spec.name()));
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace

void validate(const SimParams& p) {
  if (p.n_templates < 2) throw UsageError("simulation needs at least two templates");
  if (p.n_variants_per_template < 1) throw UsageError("simulation needs at least one variant per template");
  if (!(p.sigma_id >= 0.0)) throw UsageError("sigma_id must be non-negative");
  if (p.beta_gamma != 0.0 && p.gamma_sampler.kind == GammaSampler::Kind::none) {
    throw UsageError("beta_gamma is nonzero but no gamma sampler is configured");
  }
  if (p.gamma_sampler.kind == GammaSampler::Kind::lognormal && !(p.gamma_sampler.sd >= 0.0)) {
    throw UsageError("lognormal gamma sampler needs a non-negative sd");
  }
}

std::uint64_t replicate_seed(std::uint64_t base, int replicate) noexcept {
  // splitmix64 finalizer over (base, replicate)
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(replicate) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SimulatedDataset simulate_dataset(const SimParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int per_template = 1 + p.n_variants_per_template;
  const std::size_t n = static_cast<std::size_t>(p.n_templates) * static_cast<std::size_t>(per_template);

  std::vector<double> u(static_cast<std::size_t>(p.n_templates));
  for (auto& v : u) v = p.sigma_id * normal(rng);

  std::vector<double> gamma(n, 0.0);
  if (p.gamma_sampler.kind == GammaSampler::Kind::lognormal) {
    for (auto& g : gamma) g = std::exp(p.gamma_sampler.mu + p.gamma_sampler.sd * normal(rng));
    gamma = center_gammas(gamma);
  }

  SimulatedDataset out;
  out.dataset.source = fmt::format("synthetic(seed={})", p.seed);
  out.dataset.records.reserve(n);
  std::size_t i = 0;
  for (int t = 0; t < p.n_templates; ++t) {
    for (int k = 0; k < per_template; ++k, ++i) {
      EvalRecord rec;
      rec.model = "synthetic";
      rec.prompt_format = PromptFormat::gsm;
      rec.template_id = t;
      rec.is_variant = k > 0;
      rec.question_text = rec.is_variant ? "synthetic variant question" : "synthetic base question";
      const double eta = p.beta_intercept + (rec.is_variant ? p.beta_variant : 0.0) + p.beta_gamma * gamma[i] +
                         u[static_cast<std::size_t>(t)];
      rec.correct = unit(rng) < inv_logit(eta);
      out.dataset.records.push_back(std::move(rec));
    }
  }
  out.gamma_centered = std::move(gamma);
  return out;
}

double naive_two_proportion_p(const Dataset& cell) {
  double nb = 0, xb = 0, nv = 0, xv = 0;
  for (const auto& r : cell.records) {
    if (!r.correct) throw DataError("naive test: record is not graded");
    if (r.is_variant) {
      nv += 1;
      xv += *r.correct ? 1 : 0;
    } else {
      nb += 1;
      xb += *r.correct ? 1 : 0;
    }
  }
  if (nb == 0 || nv == 0) throw UsageError("naive test needs both base and variant records");
  const double pooled = (xb + xv) / (nb + nv);
  const double var = pooled * (1.0 - pooled) * (1.0 / nb + 1.0 / nv);
  if (!(var > 0.0)) return 1.0;
  const double z = (xv / nv - xb / nb) / std::sqrt(var);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

const CalibrationBlock* CalibrationReport::find(std::string_view model, std::string_view coefficient) const noexcept {
  for (const auto& b : blocks) {
    if (b.model == model && b.coefficient == coefficient) return &b;
  }
  return nullptr;
}

CalibrationReport recovery_experiment(const SimParams& p, int replicates, const ExperimentOptions& opts) {
  validate(p);
  if (replicates < 1) throw UsageError("recovery experiment needs at least one replicate");
  const auto targets = targets_for(p);

  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(replicates));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= replicates) return;
      try {
        outcomes[static_cast<std::size_t>(r)] = run_replicate(p, r, targets, opts);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  int jobs = opts.jobs > 0 ? opts.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, replicates);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  CalibrationReport report;
  report.params = p;
  report.replicates = replicates;
  report.alpha = opts.alpha;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    CalibrationBlock block;
    block.model = targets[k].spec.name();
    block.coefficient = targets[k].coefficient;
    block.truth = targets[k].truth;
    double sum = 0, sq = 0;
    int covered = 0, rejected = 0;
    for (const auto& o : outcomes) {
      const auto& row = o.rows[k];
      block.rows.push_back(row);
      if (!row.converged) {
        ++block.failed_count;
        continue;
      }
      if (row.degenerate) {
        ++block.degenerate_count;
        continue;
      }
      ++block.usable;
      const double err = row.estimate - block.truth;
      sum += err;
      sq += err * err;
      covered += row.covered ? 1 : 0;
      rejected += row.p < opts.alpha ? 1 : 0;
    }
    if (block.usable > 0) {
      block.bias = sum / block.usable;
      block.rmse = std::sqrt(sq / block.usable);
      block.coverage = static_cast<double>(covered) / block.usable;
      block.rejection_rate = static_cast<double>(rejected) / block.usable;
    } else {
      block.bias = block.rmse = block.coverage = block.rejection_rate = std::numeric_limits<double>::quiet_NaN();
    }
    if (block.degenerate_count > 0) {
      report.notes.push_back(fmt::format("{}/{}: {} degenerate replicate(s) excluded from aggregates", block.model,
                                         block.coefficient, block.degenerate_count));
    }
    if (block.failed_count > 0) {
      report.notes.push_back(fmt::format("{}/{}: {} replicate(s) failed or did not converge", block.model,
                                         block.coefficient, block.failed_count));
    }
    report.blocks.push_back(std::move(block));
  }
  int naive_rejected = 0;
  for (const auto& o : outcomes) {
    report.naive_p.push_back(o.naive_p);
    naive_rejected += o.naive_p < opts.alpha ? 1 : 0;
    for (const auto& note : o.notes) report.notes.push_back(note);
  }
  report.naive_rejection_rate = static_cast<double>(naive_rejected) / replicates;
  return report;
}

void write_calibration_csv(std::ostream& out, const CalibrationReport& report) {
  csv::write_row(out, std::vector<std::string>{"model", "coefficient", "replicate", "estimate", "se", "p", "covered",
                                               "degenerate"});
  for (const auto& b : report.blocks) {
    for (const auto& r : b.rows) {
      csv::write_row(out, std::vector<std::string>{b.model, b.coefficient, std::to_string(r.replicate), num(r.estimate),
                                                   num(r.se), num(r.p), r.covered ? "true" : "false",
                                                   r.degenerate ? "true" : "false"});
    }
  }
}

}  // namespace benchdelta::synthlab
