#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "coinn/dataset.hpp"

namespace coinn {

inline constexpr double kGravity = 9.80665;  // [m/s2]

// Vapor qualities are clamped to this distance from {0, 1} inside the
// separated-flow model; at or beyond the clamp the analytic single-phase
// limit is returned directly (the Martinelli parameter diverges there).
inline constexpr double kQualityEps = 1e-6;

enum class CorrelationKind { sun_mishima, awad_muzychka, cicchitti };
enum class ViscosityModel { awad, cicchitti };
enum class FlowRegime { laminar, turbulent };

inline std::string to_string(CorrelationKind k) {
  switch (k) {
    case CorrelationKind::sun_mishima: return "sun_mishima";
    case CorrelationKind::awad_muzychka: return "awad_muzychka";
    case CorrelationKind::cicchitti: return "cicchitti";
  }
  throw std::invalid_argument("to_string: bad CorrelationKind");
}

inline CorrelationKind correlation_kind_from_string(const std::string& s) {
  if (s == "sun_mishima") return CorrelationKind::sun_mishima;
  if (s == "awad_muzychka") return CorrelationKind::awad_muzychka;
  if (s == "cicchitti") return CorrelationKind::cicchitti;
  throw std::invalid_argument("correlation_kind_from_string: unknown kind '" + s + "'");
}

inline std::string to_string(FlowRegime r) {
  return r == FlowRegime::laminar ? "laminar" : "turbulent";
}

/// Which closed-form model to evaluate and how.
///
/// literal_mode selects alternate printed variants of the component formulas
/// that circulate in parts of the literature (no logarithm in the Churchill
/// a-term with roughness entering in micrometers, linear G in the phase-alone
/// gradient, a minus sign on the Chisholm term, and the Martinelli parameter
/// taken as the plain gradient ratio). The default follows the original
/// correlations; the literal forms are kept for comparison runs only.
struct CorrelationChoice {
  CorrelationKind kind = CorrelationKind::sun_mishima;
  bool literal_mode = false;
  double laminar_threshold = 2000.0;  // regime switch on the phase Reynolds numbers
};

/// Frictional pressure gradient magnitude [Pa/m].
struct PressureGradient {
  double dpdz = 0;
};

/// Intermediate quantities of a correlation evaluation. Fields a model does
/// not define are left empty.
struct CorrelationBreakdown {
  std::optional<double> re_2ph;   // homogeneous Reynolds number
  std::optional<double> re_l;     // liquid-alone Reynolds number
  std::optional<double> re_v;     // vapor-alone Reynolds number
  std::optional<double> f_2ph;    // homogeneous Fanning friction factor
  std::optional<double> f_l;      // liquid-alone Fanning friction factor
  std::optional<double> f_v;      // vapor-alone Fanning friction factor
  std::optional<double> mu_2ph;   // effective two-phase viscosity [Pa·s]
  std::optional<double> x_mart;   // Martinelli parameter
  std::optional<double> c_chisholm;
  std::optional<double> laplace;
  std::optional<double> phi_l_sq;  // two-phase multiplier
  std::optional<FlowRegime> regime;
};

struct CorrelationResult {
  PressureGradient gradient;
  CorrelationBreakdown breakdown;

  double dpdz() const { return gradient.dpdz; }
};

// ---------------------------------------------------------------------------
// Friction factor
// ---------------------------------------------------------------------------

/// Churchill's single-expression Fanning friction factor, valid across
/// laminar, transitional, and turbulent regimes. rel_rough is the
/// dimensionless relative roughness (absolute roughness over diameter).
inline double churchill_friction(double re, double rel_rough) {
  if (!(re > 0)) throw std::invalid_argument("churchill_friction: re must be > 0");
  if (!(rel_rough >= 0)) throw std::invalid_argument("churchill_friction: rel_rough must be >= 0");
  const double a = std::pow(2.457 * std::log(1.0 / (std::pow(7.0 / re, 0.9) + 0.27 * rel_rough)), 16.0);
  const double b = std::pow(37530.0 / re, 16.0);
  return 2.0 * std::pow(std::pow(8.0 / re, 12.0) + 1.0 / std::pow(a + b, 1.5), 1.0 / 12.0);
}

/// Variant of the a-term sometimes printed without the logarithm and with the
/// absolute roughness entering in micrometers. Kept only for literal-mode
/// comparison runs; not dimensionally consistent.
inline double churchill_friction_literal(double re, double roughness_um) {
  if (!(re > 0)) throw std::invalid_argument("churchill_friction_literal: re must be > 0");
  if (!(roughness_um >= 0))
    throw std::invalid_argument("churchill_friction_literal: roughness_um must be >= 0");
  const double a = std::pow(2.457 / (std::pow(7.0 / re, 0.9) + 0.27 * roughness_um), 16.0);
  const double b = std::pow(37530.0 / re, 16.0);
  return 2.0 * std::pow(std::pow(8.0 / re, 12.0) + 1.0 / std::pow(a + b, 1.5), 1.0 / 12.0);
}

// ---------------------------------------------------------------------------
// Effective viscosity
// ---------------------------------------------------------------------------

/// Two-phase effective viscosity: Awad & Muzychka definition 1, or the
/// Cicchitti quality-weighted linear blend.
inline double mixture_viscosity(const FluidState& fluid, ViscosityModel model) {
  fluid.validate();
  const double x = fluid.x;
  switch (model) {
    case ViscosityModel::awad:
      return fluid.mu_l * (2.0 * fluid.mu_l + fluid.mu_v - 2.0 * (fluid.mu_l - fluid.mu_v) * x) /
             (2.0 * fluid.mu_l + fluid.mu_v + (fluid.mu_l - fluid.mu_v) * x);
    case ViscosityModel::cicchitti:
      return (1.0 - x) * fluid.mu_l + x * fluid.mu_v;
  }
  throw std::invalid_argument("mixture_viscosity: bad ViscosityModel");
}

namespace detail {

/// Single-phase Fanning pressure gradient for a phase flowing alone with
/// effective mass flux g_eff.
inline double phase_gradient(double g_eff, double id, double roughness, double rho, double mu,
                             bool literal_mode, double* re_out, double* f_out) {
  const double re = g_eff * id / mu;
  const double f = literal_mode ? churchill_friction_literal(re, roughness * 1e6)
                                : churchill_friction(re, roughness / id);
  if (re_out) *re_out = re;
  if (f_out) *f_out = f;
  if (literal_mode) return f * g_eff / (2.0 * id * rho);
  return 2.0 * f * g_eff * g_eff / (id * rho);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Homogeneous model
// ---------------------------------------------------------------------------

/// Homogeneous two-phase gradient: the mixture flows as one fluid with a
/// quality-weighted reciprocal density and an effective viscosity picked by
/// `model`; friction from Churchill.
inline CorrelationResult homogeneous_dpdz(const FluidState& fluid, const ChannelGeometry& geom,
                                          const FlowCondition& flow, ViscosityModel model,
                                          bool literal_mode = false,
                                          double laminar_threshold = 2000.0) {
  fluid.validate();
  geom.validate();
  flow.validate();

  const double mu_2ph = mixture_viscosity(fluid, model);
  const double rho_mix = 1.0 / (fluid.x / fluid.rho_v + (1.0 - fluid.x) / fluid.rho_l);
  const double re = flow.g_flux * geom.id / mu_2ph;
  const double f = literal_mode ? churchill_friction_literal(re, geom.roughness * 1e6)
                                : churchill_friction(re, geom.roughness / geom.id);

  CorrelationResult r;
  r.gradient.dpdz = 2.0 * f * flow.g_flux * flow.g_flux / (geom.id * rho_mix);
  r.breakdown.re_2ph = re;
  r.breakdown.f_2ph = f;
  r.breakdown.mu_2ph = mu_2ph;
  r.breakdown.regime = re < laminar_threshold ? FlowRegime::laminar : FlowRegime::turbulent;
  return r;
}

// ---------------------------------------------------------------------------
// Separated-flow model (Sun & Mishima)
// ---------------------------------------------------------------------------

/// Sun & Mishima separated-flow gradient: liquid-alone gradient corrected by
/// a Chisholm-type two-phase multiplier. The C coefficient switches between
/// a Laplace-number laminar form and a Reynolds-ratio turbulent form at
/// `laminar_threshold` on both phase Reynolds numbers.
inline CorrelationResult sun_mishima_dpdz(const FluidState& fluid, const ChannelGeometry& geom,
                                          const FlowCondition& flow, bool literal_mode = false,
                                          double laminar_threshold = 2000.0) {
  fluid.validate();
  geom.validate();
  flow.validate();
  if (!(fluid.rho_l > fluid.rho_v))
    throw std::invalid_argument("sun_mishima_dpdz: rho_l must exceed rho_v (Laplace number undefined)");

  CorrelationResult r;
  r.breakdown.laplace = (1.0 / geom.d_h) * std::sqrt(fluid.sigma / (kGravity * (fluid.rho_l - fluid.rho_v)));

  // At the quality boundaries the multiplier formalism degenerates; return
  // the single-phase gradient of the phase that is actually flowing.
  if (fluid.x <= kQualityEps) {
    double re = 0, f = 0;
    r.gradient.dpdz = detail::phase_gradient(flow.g_flux, geom.id, geom.roughness, fluid.rho_l,
                                             fluid.mu_l, literal_mode, &re, &f);
    r.breakdown.re_l = re;
    r.breakdown.f_l = f;
    r.breakdown.phi_l_sq = 1.0;
    r.breakdown.regime = re < laminar_threshold ? FlowRegime::laminar : FlowRegime::turbulent;
    return r;
  }
  if (fluid.x >= 1.0 - kQualityEps) {
    double re = 0, f = 0;
    r.gradient.dpdz = detail::phase_gradient(flow.g_flux, geom.id, geom.roughness, fluid.rho_v,
                                             fluid.mu_v, literal_mode, &re, &f);
    r.breakdown.re_v = re;
    r.breakdown.f_v = f;
    r.breakdown.regime = re < laminar_threshold ? FlowRegime::laminar : FlowRegime::turbulent;
    return r;
  }

  const double x = fluid.x;
  double re_l = 0, f_l = 0, re_v = 0, f_v = 0;
  const double dpdz_l = detail::phase_gradient(flow.g_flux * (1.0 - x), geom.id, geom.roughness,
                                               fluid.rho_l, fluid.mu_l, literal_mode, &re_l, &f_l);
  const double dpdz_v = detail::phase_gradient(flow.g_flux * x, geom.id, geom.roughness,
                                               fluid.rho_v, fluid.mu_v, literal_mode, &re_v, &f_v);

  const double ratio = dpdz_l / dpdz_v;
  const double x_mart = literal_mode ? ratio : std::sqrt(ratio);

  const bool laminar = re_l < laminar_threshold && re_v < laminar_threshold;
  double c = 0;
  if (laminar) {
    c = 26.0 * (1.0 + re_l / 1000.0) *
        (1.0 - std::exp(-0.153 / (0.27 * *r.breakdown.laplace + 0.8)));
  } else {
    c = 1.79 * std::pow(re_v / re_l, 0.4) * std::sqrt((1.0 - x) / x);
  }

  const double c_term = c / std::pow(x_mart, 1.19);
  const double phi_l_sq = literal_mode ? 1.0 - c_term + 1.0 / (x_mart * x_mart)
                                       : 1.0 + c_term + 1.0 / (x_mart * x_mart);

  r.gradient.dpdz = dpdz_l * phi_l_sq;
  r.breakdown.re_l = re_l;
  r.breakdown.re_v = re_v;
  r.breakdown.f_l = f_l;
  r.breakdown.f_v = f_v;
  r.breakdown.x_mart = x_mart;
  r.breakdown.c_chisholm = c;
  r.breakdown.phi_l_sq = phi_l_sq;
  r.breakdown.regime = laminar ? FlowRegime::laminar : FlowRegime::turbulent;
  return r;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

inline CorrelationResult evaluate_correlation(const CorrelationChoice& choice,
                                              const ExperimentPoint& point) {
  switch (choice.kind) {
    case CorrelationKind::sun_mishima:
      return sun_mishima_dpdz(point.fluid, point.geometry, point.flow, choice.literal_mode,
                              choice.laminar_threshold);
    case CorrelationKind::awad_muzychka:
      return homogeneous_dpdz(point.fluid, point.geometry, point.flow, ViscosityModel::awad,
                              choice.literal_mode, choice.laminar_threshold);
    case CorrelationKind::cicchitti:
      return homogeneous_dpdz(point.fluid, point.geometry, point.flow, ViscosityModel::cicchitti,
                              choice.literal_mode, choice.laminar_threshold);
  }
  throw std::invalid_argument("evaluate_correlation: bad CorrelationKind");
}

}  // namespace coinn
