#pragma once

// Model functions and parameters of the orientation phase-field energy:
// the order potential G (with g = G'), the misorientation weight alpha, the
// regularised Euclidean norm f_eps, the Ginzburg-Landau penalty Pi_delta and
// the semi-monotonicity shift R0.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kwc::model {

/// Parameter validation failure. `assumption()` names the violated modelling
/// assumption ("A0".."A6") the way the config diagnostics report it.
class ParamError : public std::invalid_argument {
 public:
  ParamError(std::string assumption, const std::string& what)
      : std::invalid_argument(assumption + ": " + what), assumption_(std::move(assumption)) {}
  const std::string& assumption() const { return assumption_; }

 private:
  std::string assumption_;
};

enum class AlphaVariant { Quadratic, ConstantAlpha };

AlphaVariant parse_variant(const std::string& name);
std::string to_string(AlphaVariant v);

/// G(s) = (1 - s)^2 / 2, g = G', and alpha(s) = c0 + c1 s^2 (quadratic) or
/// alpha = c0 (constant-alpha).
class ModelFunctions {
 public:
  static constexpr double kRangeLo = -1.0;
  static constexpr double kRangeHi = 2.0;

  ModelFunctions(AlphaVariant variant, double c0, double c1);

  AlphaVariant variant() const { return variant_; }
  double c0() const { return c0_; }
  double c1() const { return c1_; }

  double g(double s) const { return s - 1.0; }
  double G(double s) const { return 0.5 * (1.0 - s) * (1.0 - s); }
  double alpha(double s) const;
  double alpha_prime(double s) const;
  double alpha_second(double s) const;
  /// sup |alpha'| over [kRangeLo, kRangeHi].
  double alpha_prime_sup() const;
  /// max alpha over [0, 1].
  double alpha_max() const;
  /// inf alpha over the admissible range (alpha_* > 0).
  double alpha_min() const;

  /// Rejects order values outside [kRangeLo, kRangeHi] (tag A3).
  void check_range(double s) const;

 private:
  AlphaVariant variant_;
  double c0_;
  double c1_;
};

ModelFunctions default_model_functions(AlphaVariant variant, double c0 = 0.1, double c1 = 1.0);

struct ModelParams {
  double kappa = 1.0;
  double eps = 0.1;
  double nu = 0.0;
  double delta = 0.1;
  int M = 4;
  int dimN = 2;
  double T = 0.5;

  /// ν-term exponent N + 1.
  int nu_exponent() const { return dimN + 1; }
  /// Throws ParamError. `allow_zero_delta` admits delta = 0 (constrained flows).
  void validate(bool allow_zero_delta) const;
};

/// sqrt(eps^2 + |W|^2), Frobenius norm over the M x N entries of W.
double f_eps(std::span<const double> W, double eps);

/// W / f_eps(W); requires eps > 0.
void grad_f_eps(std::span<const double> W, double eps, std::span<double> out);

/// W / |W| for W != 0, the minimal selection 0 at W = 0.
void sgn_selection(std::span<const double> W, std::span<double> out);

/// (|w|^2 - 1)^2 / (4 delta)
double pi_delta(std::span<const double> w, double delta);
/// (|w|^2 - 1) w / delta, the gradient of pi_delta.
void varpi_delta(std::span<const double> w, double delta, std::span<double> out);

/// 1 + (2 / kappa^2) sup|alpha'|^2
double r_zero(double kappa, double alpha_prime_sup);
double r_zero(const ModelParams& params, const ModelFunctions& funcs);

}  // namespace kwc::model
