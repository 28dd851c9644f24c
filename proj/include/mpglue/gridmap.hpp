// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file gridmap.hpp
//! \brief Smoothly graded 1D node placement for the meridian chart axes.

#pragma once

#include <vector>

namespace mpglue::geometry {

//! Reciprocal-spacing density for one coordinate axis.
//!
//! Nodes are placed by equidistributing D(x) = 1/h_bg(x) + sum_k 1/h_k(x),
//! where the background spacing grows smoothly from h_mid near the center
//! to h_cap far out, and each well pins fine spacing h_min near a center
//! (soft |x - c| so the map stays smooth). A smooth map keeps the
//! nonuniform three-point stencils second-order accurate.
struct GradingSpec {
  double h_mid = 0.05;
  double h_cap = 1.2;
  double growth_scale = 6.0;  // background transition length
  struct Well {
    double center = 0.0;
    double h_min = 0.005;
    double alpha = 0.075;  // spacing growth rate away from the well
    double width = 0.04;   // soft-distance smoothing
    double taper = 0.0;    // Gaussian reach; 0 disables the taper
  };
  std::vector<Well> wells;

  double density(double x) const;  // D(x) = 1/h(x), smooth, positive
};

//! Nodes of one graded axis, ascending.
struct GradedAxis {
  std::vector<double> x;

  int size() const { return static_cast<int>(x.size()); }
  //! Largest i with x[i] <= v, clamped to [0, size()-2]; for cell lookup.
  int find_cell(double v) const;
};

//! Place nodes on [0, xmax] by marching unit density mass per cell.
//! The density is rescaled so the last node lands exactly on xmax.
GradedAxis build_graded_axis(double xmax, const GradingSpec& spec);

//! Odd mirror of build_graded_axis: nodes on [-xmax, xmax], x=0 included.
GradedAxis build_symmetric_axis(double xmax, const GradingSpec& spec);

GradedAxis build_uniform_axis(double a, double b, int npts);

}  // namespace mpglue::geometry
