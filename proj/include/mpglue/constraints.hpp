// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file constraints.hpp
//! \brief Constraint restoration on the glued data: the linear divergence
//!        fix, the barrier comparison function, and the Lichnerowicz solve
//!        (Newton or fixed-point iteration on the conformal factor).

#pragma once

#include "mpglue/background.hpp"
#include "mpglue/elliptic.hpp"

namespace mpglue::constraints {

using background::ConformalData;

//! psi(r) = -e^{-T} \int_{e^{-T}}^r log(s) / (s (s+m)) ds, evaluated through
//! a dense cumulative Simpson table in t = log r.
class BarrierPotential {
 public:
  BarrierPotential(double m, double T, double r_max);
  double value(double r) const;
  //! Independent adaptive-Simpson evaluation of the same integral.
  static double integral_adaptive(double m, double T, double r);

 private:
  double m_, T_, t_lo_, dt_;
  std::vector<double> table_;
};

struct DivergenceFixReport {
  geometry::ScalarField phi;
  double residual_w3_before = 0, residual_w3_after = 0;
  double residual_sup_before = 0, residual_sup_after = 0;
  double phi_sup = 0;  // sup |phi|
  double phi_w1 = 0;   // weighted sup norm, beta = 1
  SolveStats solve;
  struct BarrierMargin {
    bool evaluated = false;
    double source_P = 0;      // e^T sup|f|
    double c_measured = 0;    // from the barrier property (iii)
    double worst_ratio = 0;   // max |phi| / ((P/c) w)
    double bound_sup = 0;     // (P/(c m)) T^2 e^{-T}
    bool satisfied = false;   // sup|phi| <= bound_sup
  } barrier_margin;
};

//! Solve Delta_ghat phi = div_ghat Ehat with phi = 0 on the cut and Robin
//! decay at the outer boundary; returns the divergence-fixed state with
//! E' = E - grad phi.
std::pair<ConformalData, DivergenceFixReport> solve_divergence_fix(
    const ConformalData& glued, const SolveOptions& opts = {});

struct BarrierReport {
  double psi1 = 0, psi1_lo = 0, psi1_hi = 0;
  bool psi1_in_bracket = false;
  double w_min = 0, w_max = 0, bound_i = 0;
  bool pass_i = false;
  double lap_max = 0, tol_ii = 0;
  bool pass_ii = false;
  double c_measured = 0;
  bool pass_iii = false;
};

//! Numerically check the comparison-function properties of
//! w = psi(r1) + psi(r2) on the glued metric.
BarrierReport verify_barrier(double m, double T,
                             std::shared_ptr<const geometry::Atlas> atlas);

struct LichnerowiczOptions {
  double tol = 1e-10;  // on sup|N(1+psi)| relative to sup|N(1)|
  int max_newton = 25;
  int max_fixed_point = 80;
  bool fixed_point = false;
  SolveOptions linear;
};

struct LichnerowiczReport {
  geometry::ScalarField psi;
  geometry::ScalarField h_field;  // (1/8) R_ghat + (3/4) |E'|^2_ghat
  std::vector<double> newton_residual_history;
  std::vector<double> fixedpoint_residual_history;
  std::vector<double> contraction_factors;  // fixed-point mode
  double eta_sup = 0, eta_w1 = 0;
  double solver_residual = 0;       // solver-stencil sup|N(1+psi)|
  double consistency_residual = 0;  // monitor-stencil sup|N(1+psi)|
  bool converged = false;
};

//! Solve L_ghat(1+psi) = -|E'|^2/(4(1+psi)^3); returns the solved state with
//! metric factor (1+psi) w and field (1+psi)^{-2} E'.
std::pair<ConformalData, LichnerowiczReport> solve_lichnerowicz(
    const ConformalData& fixed, const LichnerowiczOptions& opts = {});

//! Q(psi) = |E'|^2 (6 + 8 psi + 3 psi^2) / (4 (1+psi)^3) * psi^2, pointwise.
geometry::ScalarField quadratic_remainder(const geometry::ScalarField& psi,
                                          const ConformalData& data);

//! sup over interior nodes of |N(1+psi) - N(1) - dN(psi) - Q(psi)| with all
//! terms evaluated by the monitor operators.
double quadratic_identity_defect(const geometry::ScalarField& psi,
                                 const ConformalData& data);

}  // namespace mpglue::constraints
