// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpglue::geometry {

double Chart::azimuth(double x1v) const {
  return is_neck() ? std::sin(x1v) : x1v;
}

double Chart::radius_of_s(double s) const {
  return std::exp(std::abs(s) - T);
}

void Chart::position(double x1v, double x2v, double* rho, double* z) const {
  if (is_neck()) {
    const double r = radius_of_s(x2v);
    *rho = r * std::sin(x1v);
    *z = center_z + axis_sign * r * std::cos(x1v);
  } else {
    *rho = x1v;
    *z = x2v;
  }
}

void GridSpec::validate() const {
  if (exterior_n < 4) throw std::invalid_argument("GridSpec: exterior_n < 4");
  if (neck_ntheta < 9) throw std::invalid_argument("GridSpec: neck_ntheta < 9");
  if (r_out < 20.0) throw std::invalid_argument("GridSpec: r_out < 20");
}

double Atlas::origin_radius(const Chart& c, int i, int j) const {
  double rho, z;
  c.position(c.x1[i], c.x2[j], &rho, &z);
  return std::hypot(rho, z);
}

void Atlas::puncture_radii(double rho, double z, std::vector<double>* r) const {
  r->resize(punctures.size());
  for (size_t k = 0; k < punctures.size(); ++k) {
    (*r)[k] = std::hypot(rho, z - punctures[k].z);
  }
}

double Atlas::sigma_weight(double r) {
  if (r <= 3.0) return 1.0;
  if (r >= 4.0) return r;
  const double t = r - 3.0;
  const double s = t * t * (3.0 - 2.0 * t);
  return (1.0 - s) + s * r;
}

namespace {

int find_cell_in(const std::vector<double>& ax, double val) {
  auto it = std::upper_bound(ax.begin(), ax.end(), val);
  int i = static_cast<int>(it - ax.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(ax.size()) - 2);
}

InterpStencil bilinear_stencil(const Chart& d, double u, double v) {
  if (u < d.x1.front() - 1e-9 || u > d.x1.back() + 1e-9 ||
      v < d.x2.front() - 1e-9 || v > d.x2.back() + 1e-9) {
    throw std::runtime_error("atlas: interpolation point outside donor chart");
  }
  u = std::clamp(u, d.x1.front(), d.x1.back());
  v = std::clamp(v, d.x2.front(), d.x2.back());
  const int i = find_cell_in(d.x1, u);
  const int j = find_cell_in(d.x2, v);
  const double tx = (u - d.x1[i]) / (d.x1[i + 1] - d.x1[i]);
  const double ty = (v - d.x2[j]) / (d.x2[j + 1] - d.x2[j]);
  InterpStencil st;
  st.node = {d.idx(i, j), d.idx(i + 1, j), d.idx(i, j + 1),
             d.idx(i + 1, j + 1)};
  st.w = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return st;
}

// `branch` selects the s sign for doubled neck donors (+1 on M_+, -1 on M_-).
InterpStencil stencil_impl(const Atlas& atlas, int donor, double rho, double z,
                           int branch) {
  const Chart& d = atlas.charts[donor];
  if (!d.is_neck()) return bilinear_stencil(d, rho, z);
  const double dz = z - d.center_z;
  const double r = std::hypot(rho, dz);
  if (r <= 0) throw std::runtime_error("atlas: interpolation at a puncture");
  // Radial clamp onto the covered band; engages only for T near the minimum
  // where the excision edge can poke below the cut.
  double s = branch * (std::log(r) + atlas.T);
  s = std::clamp(s, d.x2.front(), d.x2.back());
  const double theta = std::atan2(rho, d.axis_sign * dz);
  return bilinear_stencil(d, theta, s);
}

}  // namespace

InterpStencil Atlas::stencil_at(int donor, double rho, double z) const {
  return stencil_impl(*this, donor, rho, z, +1);
}

namespace {

GradingSpec meridian_rho_grading(const GridSpec& spec) {
  const double n = spec.exterior_n;
  GradingSpec g;
  g.h_mid = 1.6 / n;
  g.h_cap = 36.0 / n;
  g.growth_scale = 7.0;
  g.wells.push_back({0.0, 0.08 / n, 1.6 / n, 0.03, 1.3});
  return g;
}

GradingSpec meridian_z_grading(const GridSpec& spec,
                               const std::vector<double>& puncture_z) {
  const double n = spec.exterior_n;
  GradingSpec g;
  g.h_mid = 1.6 / n;
  g.h_cap = 36.0 / n;
  g.growth_scale = 7.0;
  for (double zp : puncture_z) {
    g.wells.push_back({zp, 0.08 / n, 1.6 / n, 0.03, 1.3});
  }
  return g;
}

Chart make_meridian_chart(int id, int side, const GridSpec& spec,
                          const std::vector<double>& puncture_z) {
  Chart c;
  c.kind = ChartKind::Meridian;
  c.id = id;
  c.side = side;
  c.x1 = build_graded_axis(spec.r_out, meridian_rho_grading(spec)).x;
  c.x2 =
      build_symmetric_axis(spec.r_out, meridian_z_grading(spec, puncture_z)).x;
  c.n1 = static_cast<int>(c.x1.size());
  c.n2 = static_cast<int>(c.x2.size());
  c.cls.assign(c.size(), NodeClass::Inactive);
  return c;
}

Chart make_neck_chart(int id, int puncture, double center_z, double axis_sign,
                      double T, double r_match, const GridSpec& spec,
                      bool doubled) {
  Chart c;
  c.kind = ChartKind::Neck;
  c.id = id;
  c.puncture = puncture;
  c.center_z = center_z;
  c.axis_sign = axis_sign;
  c.T = T;
  const double smax = T + std::log(r_match);
  const double htheta = M_PI / (spec.neck_ntheta - 1);
  const int ns_half = std::max(8, static_cast<int>(std::lround(smax / htheta)));
  c.x1 = build_uniform_axis(0.0, M_PI, spec.neck_ntheta).x;
  if (doubled) {
    // exact mirror with s = 0 as a node
    const auto half = build_uniform_axis(0.0, smax, ns_half + 1).x;
    c.x2.clear();
    for (int k = ns_half; k >= 1; --k) c.x2.push_back(-half[k]);
    for (double s : half) c.x2.push_back(s);
  } else {
    c.x2 = build_uniform_axis(0.0, smax, ns_half + 1).x;
  }
  c.n1 = static_cast<int>(c.x1.size());
  c.n2 = static_cast<int>(c.x2.size());
  c.cls.assign(c.size(), NodeClass::Interior);
  if (!doubled) {
    for (int i = 0; i < c.n1; ++i) c.cls[c.idx(i, 0)] = NodeClass::Cut;
  }
  return c;
}

void classify_meridian(const Atlas& atlas, Chart* c) {
  const int n1 = c->n1, n2 = c->n2;
  std::vector<double> r;
  std::vector<uint8_t> active(c->size(), 0);
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      atlas.puncture_radii(c->x1[i], c->x2[j], &r);
      bool act = true;
      for (double rk : r) act = act && (rk >= atlas.r_cut);
      active[c->idx(i, j)] = act ? 1 : 0;
    }
  }
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      const int id = c->idx(i, j);
      if (active[id]) {
        const bool outer = (i == n1 - 1) || (j == 0) || (j == n2 - 1);
        c->cls[id] = outer ? NodeClass::Outer : NodeClass::Interior;
      } else {
        bool adj = false;
        if (i > 0) adj = adj || active[c->idx(i - 1, j)];
        if (i + 1 < n1) adj = adj || active[c->idx(i + 1, j)];
        if (j > 0) adj = adj || active[c->idx(i, j - 1)];
        if (j + 1 < n2) adj = adj || active[c->idx(i, j + 1)];
        c->cls[id] = adj ? NodeClass::Interface : NodeClass::Inactive;
      }
    }
  }
}

void check_donor_valid(const Atlas& atlas, const InterpStencil& st, int donor) {
  for (int n : st.node) {
    if (atlas.charts[donor].cls[n] == NodeClass::Inactive) {
      throw std::runtime_error(
          "atlas: interface stencil touches an excised node");
    }
  }
}

void wire_interfaces(Atlas* atlas) {
  // Neck outer rows take Dirichlet data from their meridian copy.
  for (auto& c : atlas->charts) {
    if (!c.is_neck()) continue;
    const int npass = atlas->doubled ? 2 : 1;
    for (int pass = 0; pass < npass; ++pass) {
      const int j = (pass == 0) ? c.n2 - 1 : 0;
      const int donor = (pass == 0) ? 0 : 1;
      InterfaceSet set;
      set.chart = c.id;
      set.donor = donor;
      for (int i = 0; i < c.n1; ++i) {
        const int id = c.idx(i, j);
        c.cls[id] = NodeClass::Interface;
        set.nodes.push_back(id);
        double rho, z;
        c.position(c.x1[i], c.x2[j], &rho, &z);
        InterpStencil st = stencil_impl(*atlas, donor, rho, z, +1);
        check_donor_valid(*atlas, st, donor);
        set.stencils.push_back(st);
      }
      atlas->interfaces.push_back(std::move(set));
    }
  }

  // Meridian hole-boundary nodes take Dirichlet data from the nearest neck.
  for (auto& c : atlas->charts) {
    if (c.is_neck()) continue;
    const int branch = (c.side > 0) ? +1 : -1;
    std::vector<double> r;
    std::vector<InterfaceSet> sets(atlas->n_necks());
    for (int k = 0; k < atlas->n_necks(); ++k) {
      sets[k].chart = c.id;
      sets[k].donor = (atlas->doubled ? 2 : 1) + k;
    }
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        const int id = c.idx(i, j);
        if (c.cls[id] != NodeClass::Interface) continue;
        atlas->puncture_radii(c.x1[i], c.x2[j], &r);
        const int k = static_cast<int>(
            std::min_element(r.begin(), r.end()) - r.begin());
        InterpStencil st =
            stencil_impl(*atlas, sets[k].donor, c.x1[i], c.x2[j], branch);
        sets[k].nodes.push_back(id);
        sets[k].stencils.push_back(st);
      }
    }
    for (auto& s : sets) {
      if (!s.nodes.empty()) atlas->interfaces.push_back(std::move(s));
    }
  }
}

void build_overlap_samples(Atlas* atlas) {
  if (atlas->doubled) return;  // monitors run on production atlases
  const double r_lo = atlas->r_cut * 1.35;
  // Neck interior nodes resampled from the meridian chart.
  for (auto& c : atlas->charts) {
    if (!c.is_neck()) continue;
    InterfaceSet set;
    set.chart = c.id;
    set.donor = 0;
    for (int j = 0; j < c.n2 - 1; ++j) {
      const double rr = c.radius_of_s(c.x2[j]);
      if (rr < r_lo) continue;
      for (int i = 0; i < c.n1; ++i) {
        double rho, z;
        c.position(c.x1[i], c.x2[j], &rho, &z);
        InterpStencil st = stencil_impl(*atlas, 0, rho, z, +1);
        bool ok = true;
        for (int n : st.node) {
          ok = ok && atlas->charts[0].cls[n] != NodeClass::Inactive;
        }
        if (!ok) continue;
        set.nodes.push_back(c.idx(i, j));
        set.stencils.push_back(st);
      }
    }
    if (!set.nodes.empty()) atlas->overlap_samples.push_back(std::move(set));
  }
  // Meridian interior nodes resampled from the necks.
  {
    const Chart& c = atlas->charts[0];
    std::vector<double> r;
    std::vector<InterfaceSet> sets(atlas->n_necks());
    for (int k = 0; k < atlas->n_necks(); ++k) {
      sets[k].chart = 0;
      sets[k].donor = 1 + k;
    }
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        const int id = c.idx(i, j);
        if (c.cls[id] != NodeClass::Interior) continue;
        atlas->puncture_radii(c.x1[i], c.x2[j], &r);
        for (int k = 0; k < atlas->n_necks(); ++k) {
          if (r[k] > r_lo && r[k] < atlas->r_match * 0.97) {
            sets[k].nodes.push_back(id);
            sets[k].stencils.push_back(
                atlas->stencil_at(1 + k, c.x1[i], c.x2[j]));
          }
        }
      }
    }
    for (auto& s : sets) {
      if (!s.nodes.empty()) atlas->overlap_samples.push_back(std::move(s));
    }
  }
}

double measure_overlap_tolerance(const Atlas& atlas) {
  // Resample a smooth probe both ways and record the worst error.
  auto probe = [](double rho, double z) {
    return std::sin(3.0 * rho + 0.7) * std::cos(2.5 * z - 0.4);
  };
  double worst = 0.0;
  for (const auto& set : atlas.overlap_samples) {
    const Chart& rec = atlas.charts[set.chart];
    const Chart& don = atlas.charts[set.donor];
    std::vector<double> donor_vals(don.size(), 0.0);
    for (int j = 0; j < don.n2; ++j) {
      for (int i = 0; i < don.n1; ++i) {
        double rho, z;
        don.position(don.x1[i], don.x2[j], &rho, &z);
        donor_vals[don.idx(i, j)] = probe(rho, z);
      }
    }
    for (size_t q = 0; q < set.nodes.size(); ++q) {
      const int id = set.nodes[q];
      const int i = id % rec.n1, j = id / rec.n1;
      double rho, z;
      rec.position(rec.x1[i], rec.x2[j], &rho, &z);
      double v = 0;
      for (int t = 0; t < 4; ++t) {
        v += set.stencils[q].w[t] * donor_vals[set.stencils[q].node[t]];
      }
      worst = std::max(worst, std::abs(v - probe(rho, z)));
    }
  }
  return worst;
}

Atlas build_atlas_impl(double T, const GridSpec& spec,
                       const std::vector<double>& puncture_z, bool doubled) {
  if (T < 3.0) {
    throw std::invalid_argument(
        "build_atlas: T < 3 (cutoff bands would overlap the matching region)");
  }
  spec.validate();
  if (puncture_z.empty() || puncture_z.size() > 2) {
    throw std::invalid_argument("build_atlas: 1 or 2 punctures supported");
  }
  Atlas atlas;
  atlas.T = T;
  atlas.spec = spec;
  atlas.doubled = doubled;
  for (double z : puncture_z) atlas.punctures.push_back({z});

  atlas.charts.push_back(make_meridian_chart(0, +1, spec, puncture_z));
  if (doubled) {
    atlas.charts.push_back(make_meridian_chart(1, -1, spec, puncture_z));
  }
  const int first_neck = doubled ? 2 : 1;
  for (size_t k = 0; k < puncture_z.size(); ++k) {
    double sign = 1.0;
    if (puncture_z.size() == 2) {
      sign = (puncture_z[k] >= puncture_z[1 - k]) ? 1.0 : -1.0;
    }
    atlas.charts.push_back(make_neck_chart(first_neck + static_cast<int>(k),
                                           static_cast<int>(k), puncture_z[k],
                                           sign, T, atlas.r_match, spec,
                                           doubled));
  }
  for (auto& c : atlas.charts) {
    if (!c.is_neck()) classify_meridian(atlas, &c);
  }
  atlas.owned.resize(atlas.charts.size());
  {
    std::vector<double> r;
    for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
      const Chart& c = atlas.charts[cc];
      atlas.owned[cc].assign(c.size(), 0);
      for (int j = 0; j < c.n2; ++j) {
        for (int i = 0; i < c.n1; ++i) {
          const int id = c.idx(i, j);
          if (c.cls[id] == NodeClass::Inactive) continue;
          if (c.is_neck()) {
            atlas.owned[cc][id] = c.radius_of_s(c.x2[j]) <= atlas.r_own;
          } else {
            double rho, z;
            c.position(c.x1[i], c.x2[j], &rho, &z);
            atlas.puncture_radii(rho, z, &r);
            double rmin = r[0];
            for (double rv : r) rmin = std::min(rmin, rv);
            atlas.owned[cc][id] = rmin > atlas.r_own;
          }
        }
      }
    }
  }
  wire_interfaces(&atlas);
  build_overlap_samples(&atlas);
  atlas.overlap_tolerance = measure_overlap_tolerance(atlas);
  return atlas;
}

}  // namespace

Atlas build_atlas(double T, const GridSpec& spec,
                  const std::vector<double>& puncture_z) {
  return build_atlas_impl(T, spec, puncture_z, false);
}

Atlas build_doubled_atlas(double T, const GridSpec& spec,
                          const std::vector<double>& puncture_z) {
  return build_atlas_impl(T, spec, puncture_z, true);
}

}  // namespace mpglue::geometry
