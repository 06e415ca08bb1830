#include <cmath>
#include <limits>

#include "benchdelta/glmm.hpp"
#include <nlohmann/json.hpp>

namespace benchdelta::glmm {
namespace {

using ojson = nlohmann::ordered_json;

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

double read_number(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("fit JSON: missing field '") + key + "'", 0, key);
  if (it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!it->is_number()) throw DataError(std::string("fit JSON: field '") + key + "' is not a number", 0, key);
  return it->get<double>();
}

Covariate parse_covariate(const std::string& name) {
  if (name == "variant") return Covariate::variant;
  if (name == "gamma_c") return Covariate::gamma_centered;
  throw DataError("fit JSON: unknown covariate '" + name + "'", 0, "covariates");
}

}  // namespace

std::string fit_to_json(const FitResult& fit, int indent) {
  ojson out;
  out["spec"] = fit.spec.name();
  ojson covs = ojson::array();
  for (auto c : fit.spec.fixed_effects) covs.push_back(std::string(to_string(c)));
  out["covariates"] = covs;
  out["theta"] = number(fit.theta);
  ojson coefs = ojson::array();
  for (const auto& s : fit.stats) {
    ojson c;
    c["name"] = s.name;
    c["estimate"] = number(s.estimate);
    c["se"] = number(s.std_error);
    c["z"] = number(s.z_value);
    c["p"] = number(s.p_value);
    c["or"] = number(s.odds_ratio);
    c["ci_lo"] = number(s.ci_lo);
    c["ci_hi"] = number(s.ci_hi);
    c["reliable"] = s.reliable;
    coefs.push_back(std::move(c));
  }
  out["coefficients"] = std::move(coefs);
  out["converged"] = fit.converged;
  out["degenerate"] = fit.degenerate;
  out["notes"] = fit.notes;
  out["log_likelihood"] = number(fit.log_likelihood);
  out["deviance"] = number(fit.deviance);
  out["n_obs"] = fit.n_obs;
  out["n_groups"] = fit.n_groups;
  return out.dump(indent);
}

FitResult fit_from_json(std::string_view text) {
  nlohmann::json in;
  try {
    in = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("fit JSON: ") + e.what());
  }
  if (!in.is_object()) throw DataError("fit JSON: top level is not an object");
  FitResult fit;
  try {
    if (auto it = in.find("covariates"); it != in.end()) {
      for (const auto& c : *it) fit.spec.fixed_effects.push_back(parse_covariate(c.get<std::string>()));
    } else {
      const auto spec = in.at("spec").get<std::string>();
      if (spec == "glmm1") {
        fit.spec = ModelSpec::glmm1();
      } else if (spec == "glmm2") {
        fit.spec = ModelSpec::glmm2();
      } else {
        throw DataError("fit JSON: unknown spec '" + spec + "'", 0, "spec");
      }
    }
    fit.theta = read_number(in, "theta");
    for (const auto& c : in.at("coefficients")) {
      FixedEffectStat s;
      s.name = c.at("name").get<std::string>();
      s.estimate = read_number(c, "estimate");
      s.std_error = read_number(c, "se");
      s.z_value = read_number(c, "z");
      s.p_value = read_number(c, "p");
      s.odds_ratio = read_number(c, "or");
      s.ci_lo = read_number(c, "ci_lo");
      s.ci_hi = read_number(c, "ci_hi");
      s.reliable = c.value("reliable", std::isfinite(s.std_error));
      fit.stats.push_back(std::move(s));
    }
    fit.converged = in.at("converged").get<bool>();
    fit.degenerate = in.at("degenerate").get<bool>();
    fit.notes = in.value("notes", std::vector<std::string>{});
    if (in.contains("log_likelihood")) fit.log_likelihood = read_number(in, "log_likelihood");
    if (in.contains("deviance")) fit.deviance = read_number(in, "deviance");
    fit.n_obs = in.value("n_obs", 0);
    fit.n_groups = in.value("n_groups", 0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("fit JSON: ") + e.what());
  }
  return fit;
}

}  // namespace benchdelta::glmm
