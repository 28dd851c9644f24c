// Distributed under the MIT License.
// See LICENSE.txt for details.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <memory>

#include "doctest.h"
#include "mpglue/background.hpp"
#include "mpglue/operators.hpp"

using namespace mpglue;
using namespace mpglue::background;
using geometry::Atlas;
using geometry::Chart;
using geometry::GridSpec;
using geometry::NodeClass;
using geometry::ScalarField;

namespace {
std::shared_ptr<const Atlas> make_atlas(double T, int n, int ntheta,
                                        std::vector<double> pz = {1.0, -1.0}) {
  GridSpec spec;
  spec.exterior_n = n;
  spec.neck_ntheta = ntheta;
  return std::make_shared<const Atlas>(geometry::build_atlas(T, spec, pz));
}

double u_of_point(const MPParams& p, double rho, double z) {
  double u2 = 1.0;
  for (size_t k = 0; k < p.masses.size(); ++k) {
    u2 += p.masses[k] / std::hypot(rho, z - p.centers_z[k]);
  }
  return std::sqrt(u2);
}
}  // namespace

TEST_CASE("MP point values: hand-evaluated oracles") {
  const auto p = MPParams::standard(1.0);
  // point (0,0,0): r1 = r2 = 1 -> u = sqrt(3)
  CHECK(u_of_point(p, 0.0, 0.0) == doctest::Approx(1.7320508075688772).epsilon(1e-15));
  // point (0,0,3): r1 = 2, r2 = 4 -> u = sqrt(1.75)
  CHECK(u_of_point(p, 0.0, 3.0) == doctest::Approx(1.3228756555322954).epsilon(1e-15));
}

TEST_CASE("evaluate_mp samples u on the charts") {
  auto atlas = make_atlas(8.0, 12, 17);
  auto mp = evaluate_mp(MPParams::standard(1.0), atlas);
  const Chart& ext = atlas->exterior();
  // find the node nearest (0,0): z-axis symmetric grid contains it exactly
  int i0 = 0, j0 = 0;
  for (int j = 0; j < ext.n2; ++j) {
    if (ext.x2[j] == 0.0) j0 = j;
  }
  CHECK(mp.metric.w.chart[0][ext.idx(i0, j0)] ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
}

TEST_CASE("masses zero give flat data") {
  auto atlas = make_atlas(8.0, 10, 13);
  auto mp = evaluate_mp(MPParams{{0.0, 0.0}, {1.0, -1.0}, -1.0}, atlas);
  for (size_t c = 0; c < atlas->charts.size(); ++c) {
    const Chart& ch = atlas->charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] == NodeClass::Inactive) continue;
        double expect = 1.0;
        if (ch.is_neck()) expect = std::sqrt(ch.radius_of_s(ch.x2[j]));
        CHECK(mp.metric.w.chart[c][id] == doctest::Approx(expect).epsilon(1e-14));
        CHECK(mp.electric.a1[c][id] == 0.0);
        CHECK(mp.electric.a2[c][id] == 0.0);
      }
    }
  }
}

TEST_CASE("MPParams validation") {
  CHECK_THROWS_AS(MPParams({{-0.1, 0.1}, {1.0, -1.0}, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(MPParams({{0.1, 0.1}, {1.0, 1.0}, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(MPParams({{0.1}, {1.0}, 0.5}).validate(),
                  std::invalid_argument);
  auto atlas = make_atlas(8.0, 10, 13);
  // centers must match atlas punctures
  CHECK_THROWS_AS(evaluate_mp(MPParams{{0.1, 0.1}, {1.5, -1.5}, 1.0}, atlas),
                  std::invalid_argument);
}

TEST_CASE("analytic summary oracles") {
  const auto s = analytic_summary(1.0);
  CHECK(s.mu == 2.0);
  CHECK(s.Q == 2.0);
  CHECK(s.A_necks == doctest::Approx(25.132741228718345).epsilon(1e-15));
  CHECK(s.R == doctest::Approx(1.4142135623730951).epsilon(1e-15));
  CHECK(s.deficit == doctest::Approx(-0.12132034355964261).epsilon(1e-14));
  CHECK(s.deficit < 0.0);
  CHECK(s.lambda_crit == doctest::Approx(std::pow(std::sqrt(2.0) - 0.5, -0.25))
                             .epsilon(1e-15));
  CHECK(s.lambda_crit == doctest::Approx(1.02268).epsilon(1e-5));
  const auto s2 = analytic_summary(0.05);
  CHECK(s2.deficit == doctest::Approx(-0.0060660171779821305).epsilon(1e-14));
  CHECK_THROWS_AS(analytic_summary(0.0), std::invalid_argument);
  CHECK_THROWS_AS(analytic_summary(-1.0), std::invalid_argument);
}

TEST_CASE("glued data equals exact MP outside the cutoff bands") {
  auto atlas = make_atlas(9.0, 12, 17);
  GlueParams glue;
  glue.m = 0.1;
  glue.T = 9.0;
  glue.field_sign = 1.0;
  auto hat = evaluate_glued(glue, atlas);
  auto mp = evaluate_mp(MPParams{{0.1, 0.1}, {1.0, -1.0}, 1.0}, atlas);
  const double band_hi = glue.band_hi();
  std::vector<double> r;
  for (size_t c = 0; c < atlas->charts.size(); ++c) {
    const Chart& ch = atlas->charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] == NodeClass::Inactive) continue;
        double rho, z;
        ch.position(ch.x1[i], ch.x2[j], &rho, &z);
        atlas->puncture_radii(rho, z, &r);
        if (std::min(r[0], r[1]) <= band_hi) continue;
        CHECK(hat.metric.w.chart[c][id] ==
              doctest::Approx(mp.metric.w.chart[c][id]).epsilon(1e-14));
        CHECK(hat.electric.a2[c][id] ==
              doctest::Approx(mp.electric.a2[c][id]).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("deep glued neck is the exact round cylinder with |E| = 1/m") {
  auto atlas = make_atlas(9.0, 12, 17);
  GlueParams glue;
  glue.m = 0.1;
  glue.T = 9.0;
  auto hat = evaluate_glued(glue, atlas);
  const auto e2 = geometry::norm2(hat.electric, hat.metric);
  for (int c = 1; c <= 2; ++c) {
    const Chart& neck = atlas->charts[c];
    CHECK(hat.metric.kind[c] == geometry::ChartMetricKind::CylinderBlend);
    for (int j = 0; j < neck.n2; ++j) {
      if (neck.x2[j] > 1.0) continue;  // cylinder region s <= 1
      for (int i = 0; i < neck.n1; ++i) {
        const int id = neck.idx(i, j);
        CHECK(hat.metric.w.chart[c][id] ==
              doctest::Approx(std::sqrt(glue.m)).epsilon(1e-15));
        CHECK(e2.chart[c][id] ==
              doctest::Approx(1.0 / (glue.m * glue.m)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("glued/MP band difference is exponentially small in T") {
  // max over the band of |1 - (uhat/u)^4| <= C e^{-T}
  auto run = [](double T) {
    auto atlas = make_atlas(T, 12, 17);
    GlueParams glue;
    glue.m = 0.1;
    glue.T = T;
    auto hat = evaluate_glued(glue, atlas);
    auto mp = evaluate_mp(MPParams{{0.1, 0.1}, {1.0, -1.0}, -1.0}, atlas);
    double worst = 0.0;
    for (size_t c = 0; c < atlas->charts.size(); ++c) {
      const Chart& ch = atlas->charts[c];
      if (!ch.is_neck()) continue;
      for (int id = 0; id < ch.size(); ++id) {
        const double q =
            std::pow(hat.metric.w.chart[c][id] / mp.metric.w.chart[c][id], 4);
        worst = std::max(worst, std::abs(1.0 - q));
      }
    }
    return worst;
  };
  const double d10 = run(10.0);
  const double d12 = run(12.0);
  CHECK(d10 < 80.0 * std::exp(-10.0));  // measured C ~ 65
  // decay rate ~ e^{-T}
  CHECK(d10 / d12 > 0.5 * std::exp(2.0));
  CHECK(d10 / d12 < 2.0 * std::exp(2.0));
}

TEST_CASE("exact MP satisfies the constraints to O(h^2)") {
  auto run = [](int n, int ntheta) {
    auto atlas = make_atlas(7.0, n, ntheta);
    auto mp = evaluate_mp(MPParams::standard(0.15), atlas);
    const auto res = constraint_residuals(mp);
    return std::max(res.norms.gauss_sup, res.norms.div_sup);
  };
  const double e1 = run(10, 13);
  const double e2 = run(20, 25);
  CHECK(e1 / e2 > 2.2);
}

TEST_CASE("glued residuals are supported in the cutoff bands") {
  auto atlas = make_atlas(6.0, 32, 49);
  GlueParams glue;
  glue.m = 0.1;
  glue.T = 6.0;
  auto hat = evaluate_glued(glue, atlas);
  const auto res = constraint_residuals(hat);
  // deep cylinder (s < 1): machine zeros
  for (int c = 1; c <= 2; ++c) {
    const Chart& neck = atlas->charts[c];
    for (int j = 0; j < neck.n2; ++j) {
      if (neck.x2[j] >= 0.9) continue;
      for (int i = 0; i < neck.n1; ++i) {
        const int id = neck.idx(i, j);
        if (neck.cls[id] != NodeClass::Interior) continue;
        CHECK(std::abs(res.gauss.chart[c][id]) < 1e-9 * res.norms.gauss_sup);
        CHECK(std::abs(res.div.chart[c][id]) < 1e-9 * res.norms.div_sup);
      }
    }
  }
  // outside the padded band: small relative to the in-band sup
  double out_gauss = 0.0, out_div = 0.0;
  std::vector<double> r;
  const double pad_lo = glue.band_lo() * std::exp(-0.3);
  const double pad_hi = glue.band_hi() * std::exp(0.3);
  for (size_t c = 0; c < atlas->charts.size(); ++c) {
    const Chart& ch = atlas->charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] != NodeClass::Interior) continue;
        double rho, z;
        ch.position(ch.x1[i], ch.x2[j], &rho, &z);
        atlas->puncture_radii(rho, z, &r);
        const double rmin = std::min(r[0], r[1]);
        if (rmin > pad_lo && rmin < pad_hi) continue;
        out_gauss = std::max(out_gauss, std::abs(res.gauss.chart[c][id]));
        out_div = std::max(out_div, std::abs(res.div.chart[c][id]));
      }
    }
  }
  CHECK(out_gauss < 0.02 * res.norms.gauss_sup);
  CHECK(out_div < 0.02 * res.norms.div_sup);
}

TEST_CASE("glued residual norms decay like e^{-T} at fixed grid") {
  GridSpec spec;
  spec.exterior_n = 32;
  spec.neck_ntheta = 49;
  std::vector<double> lg, ld, ts;
  for (double T : {5.0, 6.0, 7.0}) {
    auto atlas = std::make_shared<const Atlas>(geometry::build_atlas(T, spec));
    GlueParams glue;
    glue.m = 0.1;
    glue.T = T;
    auto hat = evaluate_glued(glue, atlas);
    const auto res = constraint_residuals(hat);
    ts.push_back(T);
    lg.push_back(std::log(res.norms.gauss_w3));
    ld.push_back(std::log(res.norms.div_w3));
  }
  auto slope = [&](const std::vector<double>& y) {
    // least squares on 3 points
    const double tbar = (ts[0] + ts[1] + ts[2]) / 3.0;
    const double ybar = (y[0] + y[1] + y[2]) / 3.0;
    double num = 0, den = 0;
    for (int k = 0; k < 3; ++k) {
      num += (ts[k] - tbar) * (y[k] - ybar);
      den += (ts[k] - tbar) * (ts[k] - tbar);
    }
    return num / den;
  };
  CHECK(slope(lg) == doctest::Approx(-1.0).epsilon(0.3));
  CHECK(slope(ld) == doctest::Approx(-1.0).epsilon(0.3));
}

TEST_CASE("reflection symmetry of the default configuration is exact on the grid") {
  auto atlas = make_atlas(8.0, 12, 17);
  GlueParams glue;
  glue.m = 0.1;
  glue.T = 8.0;
  auto hat = evaluate_glued(glue, atlas);
  const Chart& ext = atlas->exterior();
  // z-axis is mirror-symmetric by construction: match nodes (i, j) <-> (i, n2-1-j)
  for (int j = 0; j < ext.n2; ++j) {
    CHECK(ext.x2[j] == -ext.x2[ext.n2 - 1 - j]);
  }
  for (int j = 0; j < ext.n2; ++j) {
    for (int i = 0; i < ext.n1; ++i) {
      const int id = ext.idx(i, j);
      const int mid = ext.idx(i, ext.n2 - 1 - j);
      if (ext.cls[id] == NodeClass::Inactive) continue;
      CHECK(hat.metric.w.chart[0][id] == hat.metric.w.chart[0][mid]);
      CHECK(hat.electric.a1[0][id] == hat.electric.a1[0][mid]);
      CHECK(hat.electric.a2[0][id] == -hat.electric.a2[0][mid]);
    }
  }
  // the two neck charts carry identical fields
  for (int id = 0; id < atlas->charts[1].size(); ++id) {
    CHECK(hat.metric.w.chart[1][id] == hat.metric.w.chart[2][id]);
    CHECK(hat.electric.a2[1][id] == hat.electric.a2[2][id]);
  }
}

TEST_CASE("MP scaling covariance") {
  // u_{lambda m, lambda p}(lambda x) == u_{m,p}(x)
  const double lam = 2.5;
  MPParams p1{{0.2, 0.2}, {1.0, -1.0}, 1.0};
  MPParams p2{{lam * 0.2, lam * 0.2}, {lam, -lam}, 1.0};
  for (double rho : {0.3, 1.7, 5.0}) {
    for (double z : {0.0, 0.9, -2.2}) {
      CHECK(u_of_point(p2, lam * rho, lam * z) ==
            doctest::Approx(u_of_point(p1, rho, z)).epsilon(1e-14));
    }
  }
  // AnalyticSummary scaling: mu,Q,R ~ lambda; A ~ lambda^2; deficit ~ lambda
  const auto s1 = analytic_summary(0.2);
  const auto s2 = analytic_summary(lam * 0.2);
  CHECK(s2.mu == doctest::Approx(lam * s1.mu).epsilon(1e-14));
  CHECK(s2.A_necks == doctest::Approx(lam * lam * s1.A_necks).epsilon(1e-14));
  CHECK(s2.deficit == doctest::Approx(lam * s1.deficit).epsilon(1e-14));
}

TEST_CASE("cutoff profile invariants") {
  CutoffProfile chi;
  CHECK(chi.value(-0.2) == 0.0);
  CHECK(chi.value(0.0) == 0.0);
  CHECK(chi.value(1.0) == 1.0);
  CHECK(chi.value(1.3) == 1.0);
  double prev = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double t = k / 200.0;
    const double v = chi.value(t);
    CHECK(v >= prev - 1e-15);
    prev = v;
    // C^2 at edges: slope and curvature vanish at t = 0, 1
  }
  CHECK(chi.slope(1e-9) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(chi.slope(1.0 - 1e-9) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("N=1 atlas and extreme Reissner-Nordstrom data") {
  auto atlas = make_atlas(8.0, 10, 13, {1.0});
  CHECK(atlas->charts.size() == 2);
  auto mp = evaluate_mp(MPParams{{1.0}, {1.0}, -1.0}, atlas);
  // neck w^2 = r + m: exact for the single puncture
  const Chart& neck = atlas->charts[1];
  for (int j = 0; j < neck.n2; ++j) {
    const double r = neck.radius_of_s(neck.x2[j]);
    for (int i = 0; i < neck.n1; ++i) {
      CHECK(mp.metric.w.chart[1][neck.idx(i, j)] ==
            doctest::Approx(std::sqrt(r + 1.0)).epsilon(1e-14));
    }
  }
}
