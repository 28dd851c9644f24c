// Distributed under the MIT License.
// See LICENSE.txt for details.

//! \file atlas.hpp
//! \brief Overlapping chart atlas for the half manifold: one graded meridian
//!        chart plus one uniform (s,theta) chart per neck.
//!
//! Both chart types carry a base metric of the form dx1^2 + dx2^2 +
//! a(x1)^2 dphi^2 with azimuthal weight a = rho (meridian, flat base) or
//! a = sin(theta) (neck, unit round cylinder base). Physical metrics are
//! stored as w^4 * base, so every discrete operator has a single code path.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mpglue/gridmap.hpp"

namespace mpglue::geometry {

enum class ChartKind : uint8_t { Meridian, Neck };

enum class NodeClass : uint8_t {
  Inactive = 0,   // excised interior of a puncture hole; never read
  Interior,       // PDE row (includes axis/pole nodes)
  Interface,      // Dirichlet carrier resampled from the partner chart
  Cut,            // s = 0 row of a neck chart (gluing symmetry boundary)
  Outer,          // outer rectangle face of the meridian chart (Robin)
};

struct InterpStencil {
  std::array<int, 4> node{};  // donor-chart node indices
  std::array<double, 4> w{};  // bilinear weights
};

struct Puncture {
  double z = 0.0;
};

//! One chart. Node index: idx = j*n1 + i with (x1[i], x2[j]).
//! Meridian: x1 = rho, x2 = z. Neck: x1 = theta, x2 = s.
struct Chart {
  ChartKind kind = ChartKind::Meridian;
  int id = 0;
  int puncture = -1;       // neck charts: puncture index in the atlas
  double center_z = 0.0;   // neck charts: puncture location on the axis
  double axis_sign = 1.0;  // neck charts: theta = 0 points along axis_sign * z
  int side = +1;           // doubled atlases: +1 for M_+ copies, -1 for M_-
  double T = 0.0;          // neck charts: gluing scale of the s map
  std::vector<double> x1, x2;
  std::vector<NodeClass> cls;

  int n1 = 0, n2 = 0;
  int size() const { return n1 * n2; }
  int idx(int i, int j) const { return j * n1 + i; }
  bool is_neck() const { return kind == ChartKind::Neck; }

  //! Azimuthal weight of the base metric and base scalar curvature.
  double azimuth(double x1v) const;
  double base_curvature() const { return is_neck() ? 2.0 : 0.0; }

  //! Meridian-plane position of a chart point (half-plane coordinates).
  void position(double x1v, double x2v, double* rho, double* z) const;
  //! Neck charts: Euclidean puncture distance of an s value.
  double radius_of_s(double s) const;
};

//! Receiver boundary nodes plus donor interpolation stencils.
struct InterfaceSet {
  int chart = -1;
  int donor = -1;
  std::vector<int> nodes;
  std::vector<InterpStencil> stencils;
};

struct GridSpec {
  int exterior_n = 32;   // resolution scale of the meridian chart
  int neck_ntheta = 97;  // theta nodes per neck chart (poles included)
  double r_out = 40.0;

  void validate() const;
  GridSpec refined(int factor) const {
    GridSpec s = *this;
    s.exterior_n *= factor;
    s.neck_ntheta = (s.neck_ntheta - 1) * factor + 1;
    return s;
  }
};

struct Atlas {
  double T = 0.0;
  double r_match = 0.1;  // neck charts cover e^{-T} <= r_i <= r_match
  double r_cut = 0.05;   // meridian chart covers r_i >= r_cut
  GridSpec spec;
  bool doubled = false;
  std::vector<Puncture> punctures;
  std::vector<Chart> charts;  // [0] meridian (and [1] mirror copy when doubled)

  //! Dirichlet interfaces used by the Schwarz solver.
  std::vector<InterfaceSet> interfaces;
  //! Interior overlap samples used by consistency monitors (receiver nodes
  //! lie strictly inside both charts).
  std::vector<InterfaceSet> overlap_samples;
  //! Monitor ownership: in the overlap annulus each point is owned by the
  //! chart that resolves it (necks for r_i <= r_own, meridian beyond).
  std::vector<std::vector<uint8_t>> owned;
  double r_own = 0.075;
  //! Estimated resampling error of a unit-curvature smooth field.
  double overlap_tolerance = 0.0;

  double s_max() const { return T + std::log(r_match); }
  int n_necks() const { return static_cast<int>(punctures.size()); }
  const Chart& exterior() const { return charts[0]; }

  //! Distance from the origin in the meridian plane of a chart node.
  double origin_radius(const Chart& c, int i, int j) const;
  //! Distances to every puncture of a meridian-plane point.
  void puncture_radii(double rho, double z, std::vector<double>* r) const;

  //! Bilinear stencil of chart `donor` at a meridian-plane point.
  //! Throws if the point is outside the donor's coverage.
  InterpStencil stencil_at(int donor, double rho, double z) const;

  //! Weight function: 1 for r <= 3, r for r >= 4, C^1 monotone blend between.
  static double sigma_weight(double r);
};

//! Build the production atlas (half manifold, punctures on the axis).
//! Rejects T < 3, nonpositive resolutions, and r_out < 20.
Atlas build_atlas(double T, const GridSpec& spec,
                  const std::vector<double>& puncture_z = {1.0, -1.0});

//! Doubled-manifold atlas used by the symmetry cross-check: two mirror
//! meridian charts and neck charts spanning s in [-s_max, s_max].
Atlas build_doubled_atlas(double T, const GridSpec& spec,
                          const std::vector<double>& puncture_z = {1.0, -1.0});

}  // namespace mpglue::geometry
