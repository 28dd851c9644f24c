// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file fields.hpp
//! \brief Discrete scalar/vector fields over an atlas and the metric state.

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpglue/atlas.hpp"

namespace mpglue::geometry {

struct ScalarField {
  const Atlas* atlas = nullptr;
  std::vector<std::vector<double>> chart;  // per chart, size n1*n2

  ScalarField() = default;
  explicit ScalarField(const Atlas& a, double fill = 0.0);

  double& at(int c, int node) { return chart[c][node]; }
  double at(int c, int node) const { return chart[c][node]; }
};

//! Covector components in chart coordinates: a1 along x1 (rho | theta),
//! a2 along x2 (z | s).
struct VectorField {
  const Atlas* atlas = nullptr;
  std::vector<std::vector<double>> a1, a2;

  VectorField() = default;
  explicit VectorField(const Atlas& a, double fill = 0.0);
};

enum class ChartMetricKind : uint8_t { ConformallyFlat, CylinderBlend };

//! Physical metric g = w^4 * (chart base metric). On the meridian chart w is
//! the Cartesian conformal factor v; on neck charts w = v*sqrt(r_i), which is
//! exactly sqrt(cylinder_scale) on the deep glued neck.
struct MetricState {
  const Atlas* atlas = nullptr;
  ScalarField w;
  std::vector<ChartMetricKind> kind;
  double cylinder_scale = 0.0;

  MetricState() = default;
  explicit MetricState(const Atlas& a);
};

//! Evaluate f(rho, z) at every node that carries data (class != Inactive).
ScalarField sample_meridian_function(
    const Atlas& atlas, const std::function<double(double, double)>& f);

//! sup over carried nodes of sigma(r)^beta |f|; sigma is 1 on neck charts.
double weighted_sup_norm(const ScalarField& f, double beta);
//! Same restricted to nodes where the PDE stencil is interior.
double interior_sup_norm(const ScalarField& f);

//! Resample donor-chart values onto the receiver nodes of one interface set.
std::vector<double> resample(const ScalarField& f, const InterfaceSet& set);

//! Max disagreement of f across all overlap sample sets.
double overlap_disagreement(const ScalarField& f);

//! CSV export: chart id, coord1, coord2, value (17 significant digits).
void write_field_csv(std::ostream& os, const ScalarField& f);

double interp(const ScalarField& f, int chart, const InterpStencil& st);

}  // namespace mpglue::geometry
