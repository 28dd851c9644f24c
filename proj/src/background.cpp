// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/background.hpp"

#include <cmath>
#include <stdexcept>

namespace mpglue::background {

using geometry::Chart;
using geometry::ChartMetricKind;
using geometry::NodeClass;

void MPParams::validate() const {
  if (masses.empty() || masses.size() != centers_z.size()) {
    throw std::invalid_argument("MPParams: masses/centers size mismatch");
  }
  for (double m : masses) {
    if (m < 0.0 || !std::isfinite(m)) {
      throw std::invalid_argument("MPParams: negative mass");
    }
  }
  for (size_t a = 0; a < centers_z.size(); ++a) {
    for (size_t b = a + 1; b < centers_z.size(); ++b) {
      if (centers_z[a] == centers_z[b]) {
        throw std::invalid_argument("MPParams: coincident centers");
      }
    }
  }
  if (field_sign != 1.0 && field_sign != -1.0) {
    throw std::invalid_argument("MPParams: field_sign must be +1 or -1");
  }
}

double CutoffProfile::value(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  // seventh-order smoothstep: C^3 across the band edges
  const double t4 = t * t * t * t;
  return t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)));
}

double CutoffProfile::slope(double t) const {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double omt = 1.0 - t;
  return 140.0 * t * t * t * omt * omt * omt;
}

void GlueParams::validate() const {
  if (!(m > 0.0)) throw std::invalid_argument("GlueParams: m must be positive");
  if (T < 3.0) throw std::invalid_argument("GlueParams: T < 3");
}

double GlueParams::chi(double r) const {
  return profile.value(std::log(r) + T - 1.0);
}

double GlueParams::chi_prime(double r) const {
  return profile.slope(std::log(r) + T - 1.0) / r;
}

namespace {

void check_atlas_matches(const MPParams& p, const Atlas& atlas) {
  if (p.centers_z.size() != atlas.punctures.size()) {
    throw std::invalid_argument("evaluate_mp: atlas/params puncture mismatch");
  }
  for (size_t k = 0; k < p.centers_z.size(); ++k) {
    if (std::abs(p.centers_z[k] - atlas.punctures[k].z) > 1e-12) {
      throw std::invalid_argument("evaluate_mp: atlas/params puncture mismatch");
    }
  }
}

// Geometry of a neck chart point relative to the other punctures.
struct NeckPoint {
  double r1;     // radius to the chart's own puncture
  double theta;  // chart polar angle
  double s;
};

}  // namespace

ConformalData evaluate_mp(const MPParams& params,
                          std::shared_ptr<const Atlas> atlas_ptr) {
  params.validate();
  const Atlas& atlas = *atlas_ptr;
  check_atlas_matches(params, atlas);
  const double sign = params.field_sign;
  const size_t np = params.masses.size();

  ConformalData data;
  data.atlas = atlas_ptr;
  data.metric = MetricState(atlas);
  data.electric = VectorField(atlas);
  data.provenance = Provenance::ExactMP;

  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    data.metric.kind[cc] = ChartMetricKind::ConformallyFlat;
    if (!c.is_neck()) {
      for (int j = 0; j < c.n2; ++j) {
        for (int i = 0; i < c.n1; ++i) {
          const int id = c.idx(i, j);
          if (c.cls[id] == NodeClass::Inactive) continue;
          const double rho = c.x1[i], z = c.x2[j];
          // two-operand groupings keep the z-mirror exact in floating point
          double tu[2] = {0.0, 0.0}, tr[2] = {0.0, 0.0}, tz[2] = {0.0, 0.0};
          for (size_t k = 0; k < np; ++k) {
            const double rk = std::hypot(rho, z - params.centers_z[k]);
            const double rk3 = rk * rk * rk;
            tu[k % 2] += params.masses[k] / rk;
            tr[k % 2] -= params.masses[k] * rho / rk3;
            tz[k % 2] -= params.masses[k] * (z - params.centers_z[k]) / rk3;
          }
          const double u2 = 1.0 + (tu[0] + tu[1]);
          const double du2_r = tr[0] + tr[1];
          const double du2_z = tz[0] + tz[1];
          data.metric.w.chart[cc][id] = std::sqrt(u2);
          data.electric.a1[cc][id] = sign * du2_r / u2;
          data.electric.a2[cc][id] = sign * du2_z / u2;
        }
      }
    } else {
      const int own = c.puncture;
      for (int j = 0; j < c.n2; ++j) {
        const double s = c.x2[j];
        const double r1 = c.radius_of_s(s);
        for (int i = 0; i < c.n1; ++i) {
          const int id = c.idx(i, j);
          const double th = c.x1[i];
          // w^2 = u^2 r1 = r1 + m_own + sum_other m_k r1/r_k
          double w2 = r1 + params.masses[own];
          double ds_w2 = r1;
          double dth_w2 = 0.0;
          for (size_t k = 0; k < np; ++k) {
            if (static_cast<int>(k) == own) continue;
            const double b = (c.center_z - params.centers_z[k]) * c.axis_sign;
            const double D2 =
                (c.center_z - params.centers_z[k]) *
                (c.center_z - params.centers_z[k]);
            const double rk = std::sqrt(r1 * r1 + D2 + 2.0 * b * r1 *
                                                          std::cos(th));
            const double rk3 = rk * rk * rk;
            w2 += params.masses[k] * r1 / rk;
            ds_w2 += params.masses[k] * r1 * (D2 + b * r1 * std::cos(th)) / rk3;
            dth_w2 += params.masses[k] * b * r1 * r1 * std::sin(th) / rk3;
          }
          data.metric.w.chart[cc][id] = std::sqrt(w2);
          // log u^2 = log w^2 - (s - T)
          data.electric.a1[cc][id] = sign * dth_w2 / w2;
          data.electric.a2[cc][id] = sign * (ds_w2 / w2 - 1.0);
        }
      }
    }
  }
  return data;
}

ConformalData evaluate_glued(const GlueParams& glue,
                             std::shared_ptr<const Atlas> atlas_ptr) {
  glue.validate();
  const Atlas& atlas = *atlas_ptr;
  if (std::abs(glue.T - atlas.T) > 1e-12) {
    throw std::invalid_argument("evaluate_glued: atlas built with different T");
  }
  const size_t np = atlas.punctures.size();
  if (np != 1 && np != 2) {
    throw std::invalid_argument("evaluate_glued: 1 or 2 punctures supported");
  }
  const double m = glue.m;
  const double sign = glue.field_sign;

  ConformalData data;
  data.atlas = atlas_ptr;
  data.metric = MetricState(atlas);
  data.electric = VectorField(atlas);
  data.provenance = Provenance::Glued;
  data.glue_m = m;
  data.glue_T = glue.T;
  data.metric.cylinder_scale = m;

  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    data.metric.kind[cc] = c.is_neck() ? ChartMetricKind::CylinderBlend
                                       : ChartMetricKind::ConformallyFlat;
    // M_- copies carry the opposite field sign (doubled atlases only).
    const double copy_sign = (c.side < 0) ? -sign : sign;
    if (!c.is_neck()) {
      for (int j = 0; j < c.n2; ++j) {
        for (int i = 0; i < c.n1; ++i) {
          const int id = c.idx(i, j);
          if (c.cls[id] == NodeClass::Inactive) continue;
          const double rho = c.x1[i], z = c.x2[j];
          double u2, du2_r, du2_z;
          if (np == 1) {
            const double r1 = std::hypot(rho, z - atlas.punctures[0].z);
            const double c1 = glue.chi(r1), c1p = glue.chi_prime(r1);
            const double dr1_r = rho / r1;
            const double dr1_z = (z - atlas.punctures[0].z) / r1;
            u2 = c1 + m / r1;
            const double g1 = c1p - m / (r1 * r1);
            du2_r = g1 * dr1_r;
            du2_z = g1 * dr1_z;
          } else {
            const double r1 = std::hypot(rho, z - atlas.punctures[0].z);
            const double r2 = std::hypot(rho, z - atlas.punctures[1].z);
            const double c1 = glue.chi(r1), c1p = glue.chi_prime(r1);
            const double c2 = glue.chi(r2), c2p = glue.chi_prime(r2);
            // grouped so the z-mirror (r1 <-> r2) is bitwise exact
            u2 = c1 * c2 + (c2 * m / r1 + c1 * m / r2);
            const double g1 = c1p * (c2 + m / r2) - c2 * m / (r1 * r1);
            const double g2 = c2p * (c1 + m / r1) - c1 * m / (r2 * r2);
            du2_r = g1 * rho / r1 + g2 * rho / r2;
            du2_z = g1 * (z - atlas.punctures[0].z) / r1 +
                    g2 * (z - atlas.punctures[1].z) / r2;
          }
          data.metric.w.chart[cc][id] = std::sqrt(u2);
          data.electric.a1[cc][id] = copy_sign * du2_r / u2;
          data.electric.a2[cc][id] = copy_sign * du2_z / u2;
        }
      }
    } else {
      const int own = c.puncture;
      const int other = (np == 2) ? 1 - own : -1;
      for (int j = 0; j < c.n2; ++j) {
        const double s = c.x2[j];
        const double r1 = c.radius_of_s(s);
        // Doubled charts: d r1/d s flips sign with s.
        const double ds_r1 = (s < 0.0) ? -r1 : r1;
        for (int i = 0; i < c.n1; ++i) {
          const int id = c.idx(i, j);
          const double th = c.x1[i];
          const double cA = glue.chi(r1), cAp = glue.chi_prime(r1);
          double w2, ds_w2, dth_w2;
          if (other < 0) {
            // w^2 = chi1 r1 + m
            w2 = cA * r1 + m;
            ds_w2 = (cAp * r1 + cA) * ds_r1;
            dth_w2 = 0.0;
          } else {
            const double b =
                (c.center_z - atlas.punctures[other].z) * c.axis_sign;
            const double D2 = (c.center_z - atlas.punctures[other].z) *
                              (c.center_z - atlas.punctures[other].z);
            const double r2 =
                std::sqrt(r1 * r1 + D2 + 2.0 * b * r1 * std::cos(th));
            const double ds_r2 = ds_r1 * (r1 + b * std::cos(th)) / r2;
            const double dth_r2 = -b * r1 * std::sin(th) / r2;
            const double cB = glue.chi(r2), cBp = glue.chi_prime(r2);
            // w^2 = chiA chiB r1 + m chiB + m chiA r1/r2
            w2 = cA * cB * r1 + m * cB + m * cA * r1 / r2;
            auto dw2 = [&](double dr1, double dr2) {
              double d = 0.0;
              d += (cAp * dr1 * cB + cA * cBp * dr2) * r1 + cA * cB * dr1;
              d += m * cBp * dr2;
              d += m * (cAp * dr1 * r1 / r2 +
                        cA * (dr1 * r2 - r1 * dr2) / (r2 * r2));
              return d;
            };
            ds_w2 = dw2(ds_r1, ds_r2);
            dth_w2 = dw2(0.0, dth_r2);
          }
          data.metric.w.chart[cc][id] = std::sqrt(w2);
          // log uhat^2 = log w^2 - (|s| - T); on the s < 0 branch of a
          // doubled chart the copy carries the opposite charge, which makes
          // the global E_s continuous across the cut (E_theta flips).
          const double dabs = (s < 0.0) ? -1.0 : 1.0;
          const double branch_sign = (s < 0.0) ? -copy_sign : copy_sign;
          data.electric.a1[cc][id] = branch_sign * dth_w2 / w2;
          data.electric.a2[cc][id] = branch_sign * (ds_w2 / w2 - dabs);
        }
      }
    }
  }
  return data;
}

AnalyticSummary analytic_summary(double m) {
  if (!(m > 0.0)) {
    throw std::invalid_argument("analytic_summary: m must be positive");
  }
  AnalyticSummary s;
  s.m = m;
  s.mu = 2.0 * m;
  s.Q = 2.0 * m;
  s.A_necks = 8.0 * M_PI * m * m;
  s.R = std::sqrt(2.0) * m;
  s.deficit = m * (2.0 - 3.0 / std::sqrt(2.0));
  s.lambda_crit = std::pow(std::sqrt(2.0) - 0.5, -0.25);
  return s;
}

ConstraintResiduals constraint_residuals(const ConformalData& data) {
  const Atlas& atlas = data.at();
  ConstraintResiduals out;
  out.gauss = geometry::scalar_curvature(data.metric);
  const ScalarField e2 = geometry::norm2(data.electric, data.metric);
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    for (int id = 0; id < atlas.charts[cc].size(); ++id) {
      out.gauss.chart[cc][id] -= 2.0 * e2.chart[cc][id];
    }
  }
  out.div = geometry::divergence(data.electric, data.metric);
  // Norm monitors run where the stencil is interior and the chart owns the
  // point; overlap points are measured on the chart that resolves them.
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    for (int id = 0; id < c.size(); ++id) {
      if (c.cls[id] != NodeClass::Interior || !atlas.owned[cc][id]) {
        out.gauss.chart[cc][id] = 0.0;
        out.div.chart[cc][id] = 0.0;
      }
    }
  }
  out.norms.gauss_w3 = geometry::weighted_sup_norm(out.gauss, 3.0);
  out.norms.gauss_sup = geometry::weighted_sup_norm(out.gauss, 0.0);
  out.norms.div_w3 = geometry::weighted_sup_norm(out.div, 3.0);
  out.norms.div_sup = geometry::weighted_sup_norm(out.div, 0.0);
  return out;
}

ConformalData sample_factor_state(
    std::shared_ptr<const Atlas> atlas_ptr,
    const std::function<double(double, double)>& v, Provenance tag) {
  const Atlas& atlas = *atlas_ptr;
  ConformalData data;
  data.atlas = atlas_ptr;
  data.metric = MetricState(atlas);
  data.electric = VectorField(atlas);
  data.provenance = tag;
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        const int id = c.idx(i, j);
        if (c.cls[id] == NodeClass::Inactive) continue;
        double rho, z;
        c.position(c.x1[i], c.x2[j], &rho, &z);
        double w = v(rho, z);
        if (c.is_neck()) w *= std::sqrt(c.radius_of_s(c.x2[j]));
        data.metric.w.chart[cc][id] = w;
      }
    }
  }
  return data;
}

}  // namespace mpglue::background
