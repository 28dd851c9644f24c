// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file operators.hpp
//! \brief Discrete differential and integral calculus on atlas fields.
//!
//! All operators share one code path across chart types: the physical metric
//! is w^4 * base with base = dx1^2 + dx2^2 + a(x1)^2 dphi^2, a = rho or
//! sin(theta). Interior stencils are conservative second-order fluxes with
//! exact control volumes at the axis poles; chart-edge rows use one-sided
//! (cubic-ghost) stencils. Values at hole-carrier nodes of the meridian chart
//! are not defined by these monitors (the neck charts cover those points) and
//! are returned as zero.

#pragma once

#include "mpglue/fields.hpp"

namespace mpglue::geometry {

//! Covariant gradient components (f_{,1}, f_{,2}); three-point stencils.
VectorField gradient(const ScalarField& f);

//! Laplace-Beltrami operator of g = w^4 * base:
//!   w^{-6} (1/a) [ d1(a w^2 f_{,1}) + d2(a w^2 f_{,2}) ].
ScalarField laplace_beltrami(const ScalarField& f, const MetricState& g);

//! Divergence of a covector field: w^{-6} (1/a)[ d1(a w^2 X1) + d2(a w^2 X2) ].
ScalarField divergence(const VectorField& X, const MetricState& g);

//! Conformal Laplacian via the flat-kernel identity
//!   L_g f = w^{-5} [ Delta_base (w f) - (R_base/8) w f ].
ScalarField conformal_laplacian(const ScalarField& f, const MetricState& g);

//! Scalar curvature R_g = -8 L_g(1).
ScalarField scalar_curvature(const MetricState& g);

//! |X|_g^2 = w^{-4} (X1^2 + X2^2) for covector components.
ScalarField norm2(const VectorField& X, const MetricState& g);

//! Axisymmetric profile curve sampled in one chart's coordinates.
struct ProfileCurve {
  int chart = 0;
  std::vector<double> x1, x2;
};

//! Integral of f over the revolved profile in the metric g:
//!   2*pi * sum w^4 a(x1) f |dx|  (composite trapezoid).
//! Throws if the profile leaves the chart domain.
double integrate_surface(const ProfileCurve& S, const ScalarField& f,
                         const MetricState& g);
double surface_area(const ProfileCurve& S, const MetricState& g);

//! Bilinear stencil at chart coordinates (no coordinate conversion).
InterpStencil chart_stencil(const Chart& c, double x1, double x2);

//! Bilinear value of a field at chart coordinates.
double interp_at(const ScalarField& f, int chart, double x1, double x2);

}  // namespace mpglue::geometry
