// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file surfaces.hpp
//! \brief Axisymmetric surfaces, mean curvature in conformal metrics, and
//!        the area-minimizing flows used by the horizon finder.

#pragma once

#include <string>

#include "mpglue/background.hpp"

namespace mpglue::horizon {

using background::ConformalData;
using geometry::Atlas;
using geometry::ScalarField;
using geometry::VectorField;

//! An axisymmetric surface: either a graph s = F(theta) in a neck chart or
//! a meridian polyline closed against the axis. Orientation: the outer
//! normal points toward the asymptotically flat infinity (+s in necks;
//! away from the enclosed region for meridian curves ordered from their
//! top axis endpoint to the bottom one).
struct Surface {
  enum class Kind { NeckGraph, MeridianCurve };
  Kind kind = Kind::MeridianCurve;
  int chart = 0;            // neck chart id for graphs
  std::vector<double> a;    // graph: theta nodes; curve: rho
  std::vector<double> b;    // graph: F values;   curve: z

  static Surface neck_graph(const Atlas& atlas, int chart, double level);
  static Surface sphere(double radius, double zc = 0.0, int npts = 257);
  static Surface ellipsoid(double a_rho, double b_z, int npts = 257);
};

//! Interpolates the state's conformal factor (as the Cartesian nu with
//! g = nu^4 delta) and grad log nu at meridian points, switching to the
//! neck charts near the punctures.
class MetricProbe {
 public:
  explicit MetricProbe(const ConformalData& state);
  double log_nu(double rho, double z) const;
  double nu(double rho, double z) const { return std::exp(log_nu(rho, z)); }
  void grad_log_nu(double rho, double z, double* drho, double* dz) const;

 private:
  const ConformalData* state_;
  ScalarField logw_;
  VectorField grad_logw_;
};

//! Mean curvature of the surface in the state's metric, sampled along the
//! profile (conformal formula H = nu^{-2}(H_flat + 4 d_n log nu)).
std::vector<double> mean_curvature(const Surface& s,
                                   const ConformalData& state);
//! Flat-metric mean curvature (no state needed).
std::vector<double> mean_curvature_flat(const Surface& s);
//! Independent route: first variation of the area functional under a
//! localized normal bump at each interior vertex (meridian curves).
std::vector<double> mean_curvature_variational(const Surface& s,
                                               const ConformalData& state);

double surface_area(const Surface& s, const ConformalData& state);

//! Unit outward normals of a meridian curve at every vertex.
void curve_normals(const Surface& s, std::vector<double>* n_rho,
                   std::vector<double>* n_z);

struct GraphFlowOptions {
  double tol_H = 1e-5;       // residual target on sup|H|
  int max_steps = 400000;
  double cfl = 0.2;
  double s_low_exit = -1.0;  // exit threshold (0 for states without a cut)
};

enum class FlowStatus { Converged, ExitedCut, ExitedOuter, MaxSteps };

struct GraphFlowResult {
  Surface surface;
  FlowStatus status = FlowStatus::MaxSteps;
  double max_abs_H = 0.0;
  double distance_to_cut = 0.0;  // sup |F|
  int steps = 0;
};

//! Explicit mean-curvature flow of a neck graph s = F(theta).
GraphFlowResult flow_neck_graph(const ConformalData& state, int chart,
                                const std::vector<double>& f0,
                                const GraphFlowOptions& opts = {});

struct CurveFlowOptions {
  double eps = 0.05;       // target region D(eps)
  double tol_H = 1e-4;     // stationarity threshold on sup|H|
  int max_steps = 2000000;
  double cfl = 0.2;
  int resample_every = 8;
};

enum class CurveOutcome { EnteredRegion, ConvergedMinimal, Stalled };

struct CurveFlowResult {
  CurveOutcome outcome = CurveOutcome::Stalled;
  Surface curve;
  double max_abs_H = 0.0;
  int steps = 0;
  int surgeries = 0;
};

//! Explicit mean-curvature flow of meridian curves with waist surgery;
//! returns one result per final lobe.
std::vector<CurveFlowResult> flow_meridian_curve(const ConformalData& state,
                                                 const Surface& seed,
                                                 const CurveFlowOptions& opts);

//! Golden-section minimizer on [a, b].
double golden_minimize(const std::function<double(double)>& f, double a,
                       double b, double tol = 1e-10);

}  // namespace mpglue::horizon
