// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file background.hpp
//! \brief Exact Majumdar-Papapetrou data, the cutoff gluing, and the analytic
//!        reference quantities of the two-neck configuration.

#pragma once

#include <memory>

#include "mpglue/fields.hpp"
#include "mpglue/operators.hpp"

namespace mpglue::background {

using geometry::Atlas;
using geometry::MetricState;
using geometry::ScalarField;
using geometry::VectorField;

//! Multi-puncture MP data u = (1 + sum m_k/r_k)^{1/2}, E = field_sign *
//! 2 grad log u. Punctures sit on the symmetry axis. masses may be zero
//! (vacuum limit); negative masses are rejected.
struct MPParams {
  std::vector<double> masses;
  std::vector<double> centers_z;
  double field_sign = -1.0;

  static MPParams standard(double m) { return {{m, m}, {1.0, -1.0}, -1.0}; }
  void validate() const;
};

//! Seventh-order smoothstep cutoff in log r across [e^{-T+1}, e^{-T+2}]:
//! chi = 0 below the band, 1 above, C^3 at the edges (one degree beyond the
//! C^2 the gluing estimates need, so fourth-order face stencils keep their
//! accuracy across the band edges).
struct CutoffProfile {
  double value(double t) const;  // t = log(r) + T - 1, clamped to [0,1]
  double slope(double t) const;
};

struct GlueParams {
  double m = 0.1;
  double T = 8.0;
  CutoffProfile profile{};
  double field_sign = -1.0;

  void validate() const;
  double band_lo() const { return std::exp(-T + 1.0); }
  double band_hi() const { return std::exp(-T + 2.0); }
  double chi(double r) const;
  double chi_prime(double r) const;
};

enum class Provenance : uint8_t { ExactMP, Glued, DivergenceFixed, Solved };

//! A (metric, electric field) state over an atlas; B == 0 throughout.
struct ConformalData {
  std::shared_ptr<const Atlas> atlas;
  MetricState metric;
  VectorField electric;
  Provenance provenance = Provenance::ExactMP;
  double glue_m = 0.0;
  double glue_T = 0.0;

  const Atlas& at() const { return *atlas; }
};

struct AnalyticSummary {
  double m = 0;
  double mu = 0;           // total mass 2m
  double Q = 0;            // total charge 2m
  double A_necks = 0;      // 8 pi m^2
  double R = 0;            // sqrt(2) m
  double deficit = 0;      // m (2 - 3/sqrt(2)) < 0
  double lambda_crit = 0;  // (sqrt(2) - 1/2)^{-1/4}
};

//! Sample exact MP data on the atlas. The atlas punctures must coincide with
//! params.centers_z.
ConformalData evaluate_mp(const MPParams& params,
                          std::shared_ptr<const Atlas> atlas);

//! Sample the glued data (u-hat) on the atlas built from the same T.
ConformalData evaluate_glued(const GlueParams& glue,
                             std::shared_ptr<const Atlas> atlas);

AnalyticSummary analytic_summary(double m);

struct ResidualNorms {
  double gauss_w3 = 0, gauss_sup = 0, div_w3 = 0, div_sup = 0;
};

struct ConstraintResiduals {
  ScalarField gauss;  // R_g - 2|E|^2_g, zero outside interior stencil support
  ScalarField div;    // div_g E, likewise
  ResidualNorms norms;
};

ConstraintResiduals constraint_residuals(const ConformalData& data);

//! Conformally flat test state with factor v(rho, z) and zero field.
ConformalData sample_factor_state(std::shared_ptr<const Atlas> atlas,
                                  const std::function<double(double, double)>& v,
                                  Provenance tag = Provenance::ExactMP);

}  // namespace mpglue::background
