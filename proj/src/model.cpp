#include "kwc/model.hpp"

#include <algorithm>
#include <cmath>

namespace kwc::model {

namespace {
double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}
}  // namespace

AlphaVariant parse_variant(const std::string& name) {
  if (name == "quadratic") return AlphaVariant::Quadratic;
  if (name == "constant-alpha") return AlphaVariant::ConstantAlpha;
  throw ParamError("A3", "unknown alpha variant '" + name + "'");
}

std::string to_string(AlphaVariant v) {
  return v == AlphaVariant::Quadratic ? "quadratic" : "constant-alpha";
}

ModelFunctions::ModelFunctions(AlphaVariant variant, double c0, double c1)
    : variant_(variant), c0_(c0), c1_(variant == AlphaVariant::ConstantAlpha ? 0.0 : c1) {
  if (!(c0_ > 0.0) || !std::isfinite(c0_)) throw ParamError("A3", "alpha_* = inf alpha must be positive");
  if (!(c1_ >= 0.0) || !std::isfinite(c1_)) throw ParamError("A3", "quadratic alpha needs c1 >= 0 (alpha'' >= 0)");
}

double ModelFunctions::alpha(double s) const { return c0_ + c1_ * s * s; }

double ModelFunctions::alpha_prime(double s) const { return 2.0 * c1_ * s; }

double ModelFunctions::alpha_second(double) const { return 2.0 * c1_; }

double ModelFunctions::alpha_prime_sup() const {
  return 2.0 * c1_ * std::max(std::abs(kRangeLo), std::abs(kRangeHi));
}

double ModelFunctions::alpha_max() const { return c0_ + c1_; }

double ModelFunctions::alpha_min() const { return c0_; }

void ModelFunctions::check_range(double s) const {
  if (!(s >= kRangeLo && s <= kRangeHi)) {
    throw ParamError("A3", "order value " + std::to_string(s) + " left the admissible range [-1, 2]");
  }
}

ModelFunctions default_model_functions(AlphaVariant variant, double c0, double c1) {
  return ModelFunctions(variant, c0, c1);
}

void ModelParams::validate(bool allow_zero_delta) const {
  if (!(kappa > 0.0)) throw ParamError("A4", "kappa must be positive");
  if (!(eps >= 0.0)) throw ParamError("A4", "eps must be nonnegative");
  if (!(nu >= 0.0)) throw ParamError("A4", "nu must be nonnegative");
  if (!(delta >= 0.0)) throw ParamError("A5", "delta must be nonnegative");
  if (delta == 0.0 && !allow_zero_delta) throw ParamError("A5", "delta = 0 is only allowed for constrained flows");
  if (M < 2) throw ParamError("A0", "target dimension M must exceed 1");
  if (dimN < 1 || dimN > 3) throw ParamError("A0", "space dimension must be 1, 2 or 3");
  if (!(T > 0.0)) throw ParamError("A0", "final time T must be positive");
}

double f_eps(std::span<const double> W, double eps) { return std::sqrt(eps * eps + sq_norm(W)); }

void grad_f_eps(std::span<const double> W, double eps, std::span<double> out) {
  if (!(eps > 0.0)) throw ParamError("A4", "grad_f_eps needs eps > 0; use sgn_selection at eps = 0");
  const double f = f_eps(W, eps);
  for (std::size_t i = 0; i < W.size(); ++i) out[i] = W[i] / f;
}

void sgn_selection(std::span<const double> W, std::span<double> out) {
  const double n = std::sqrt(sq_norm(W));
  for (std::size_t i = 0; i < W.size(); ++i) out[i] = n > 0.0 ? W[i] / n : 0.0;
}

double pi_delta(std::span<const double> w, double delta) {
  if (!(delta > 0.0)) throw ParamError("A5", "pi_delta needs delta > 0");
  const double d = sq_norm(w) - 1.0;
  return d * d / (4.0 * delta);
}

void varpi_delta(std::span<const double> w, double delta, std::span<double> out) {
  if (!(delta > 0.0)) throw ParamError("A5", "varpi_delta needs delta > 0");
  const double d = (sq_norm(w) - 1.0) / delta;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = d * w[i];
}

double r_zero(double kappa, double alpha_prime_sup) {
  if (!(kappa > 0.0)) throw ParamError("A4", "kappa must be positive");
  return 1.0 + 2.0 * alpha_prime_sup * alpha_prime_sup / (kappa * kappa);
}

double r_zero(const ModelParams& params, const ModelFunctions& funcs) {
  return r_zero(params.kappa, funcs.alpha_prime_sup());
}

}  // namespace kwc::model
