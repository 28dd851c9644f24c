// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file elliptic.hpp
//! \brief Composite elliptic solver: symmetric flux-form assembly per chart,
//!        banded Cholesky subsolves (PCG fallback) inside multiplicative
//!        Schwarz sweeps with bilinear interface transfer.

#pragma once

#include <vector>

#include "mpglue/fields.hpp"

namespace mpglue::constraints {

using geometry::Atlas;
using geometry::MetricState;
using geometry::ScalarField;

//! Boundary condition at the s = 0 cut rows of neck charts.
enum class CutBC { DirichletZero, ZeroFlux, DirichletField };
//! Outer rectangle faces of the meridian chart.
enum class OuterBC { Robin, DirichletField };

//! Equation kinds share one assembly:
//!  PlainLaplacian:   -(Delta_g x) + q x = rhs, multiplied by w^6 vol;
//!  ConformalKernel:  unknown chi = w x with
//!                    -(Delta_0 chi) + (R0/8 + k) chi = w^5 rhs, times vol.
//! Both are SPD for q, k >= 0. The Schwarz iterate and all inputs/outputs
//! use the physical variable x.
enum class OperatorKind { PlainLaplacian, ConformalKernel };

struct EllipticSpec {
  OperatorKind kind = OperatorKind::PlainLaplacian;
  CutBC cut = CutBC::DirichletZero;
  OuterBC outer = OuterBC::Robin;
  const ScalarField* diag = nullptr;  // q or k (>= 0); null means zero
};

struct SolveOptions {
  double tol = 1e-10;    // relative composite residual
  int max_sweeps = 400;
  bool use_pcg = false;  // replace the direct subsolves by PCG(SGS)
  double pcg_tol = 1e-13;
  int pcg_max_iter = 20000;
};

struct SolveStats {
  std::vector<double> residual_history;  // per sweep, relative
  int sweeps = 0;
  double final_residual = 0.0;
  double rhs_scale = 0.0;
  bool converged = false;
};

//! Banded symmetric positive definite matrix with in-place Cholesky.
class BandedSPD {
 public:
  void init(int n, int bandwidth);
  int size() const { return n_; }
  int bandwidth() const { return bw_; }
  double& at(int i, int j);        // j <= i, i - j <= bandwidth
  double get(int i, int j) const;  // symmetric access, 0 outside band
  void factor();                   // L L^T
  void solve(std::vector<double>* x) const;
  //! y = A x for the unfactored matrix.
  void multiply(const std::vector<double>& x, std::vector<double>* y) const;

 private:
  int n_ = 0, bw_ = 0;
  bool factored_ = false;
  std::vector<double> a_;  // row-major band: a_[i*(bw+1) + (i-j)]
};

class CompositeElliptic {
 public:
  //! Assembles and factors one subsystem per chart.
  CompositeElliptic(const MetricState& metric, const EllipticSpec& spec,
                    const SolveOptions& opts = {});

  //! Solve with right-hand side `rhs` (physical variable, sampled at PDE
  //! rows). `x` is the initial guess and the result; DirichletField rows are
  //! read from `x` and kept fixed. `robin_offset` is the asymptotic value
  //! the Robin condition decays toward (0 for correction-type unknowns,
  //! 1 for total conformal factors).
  SolveStats solve(const ScalarField& rhs, ScalarField* x,
                   double robin_offset = 0.0) const;

  //! Apply the PDE operator (solver stencils, BC rows included) to a field:
  //! returns  -(Delta_g x) + q x  resp.  w^{-5}[-(Delta_0 + ...) (w x)] + k..
  //! at unknown rows, exactly as assembled; other rows are zero.
  ScalarField apply(const ScalarField& x, double robin_offset = 0.0) const;

  const Atlas& atlas() const { return *atlas_; }

 private:
  struct Coupling {
    int row;
    int node;
    double coeff;
  };
  struct ChartSystem {
    int chart = 0;
    std::vector<int> unknown_of_node;
    std::vector<int> node_of_unknown;
    BandedSPD band;        // factored
    BandedSPD band_plain;  // unfactored copy for PCG / residuals
    std::vector<Coupling> couplings;
    std::vector<double> rhs_weight;   // b = rhs * rhs_weight per unknown
    std::vector<double> scale;        // chi = scale * x per node (1 or w)
    std::vector<double> robin_coeff;  // Robin face row weights (offset rhs)
  };

  void assemble_chart(int c, ChartSystem* sys);
  void chart_rhs(const ChartSystem& sys, const ScalarField& rhs,
                 const ScalarField& x, double robin_offset,
                 std::vector<double>* b) const;
  double chart_residual(const ChartSystem& sys, const ScalarField& rhs,
                        const ScalarField& x, double robin_offset) const;
  void refresh_interfaces(ScalarField* x) const;

  const Atlas* atlas_;
  const MetricState* metric_;
  EllipticSpec spec_;
  SolveOptions opts_;
  std::vector<ChartSystem> systems_;
};

}  // namespace mpglue::constraints
