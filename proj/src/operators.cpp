// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace mpglue::geometry {

namespace {

// Cubic Lagrange extrapolation of samples (xs[k], fs[k]) to xq.
double lagrange_extrap(const double* xs, const double* fs, int n, double xq) {
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    double lk = 1.0;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      lk *= (xq - xs[l]) / (xs[k] - xs[l]);
    }
    acc += lk * fs[k];
  }
  return acc;
}

// Per-chart view bundling what the stencil loops need.
struct ChartView {
  const Chart* c;
  const std::vector<double>* f;   // operand samples
  const std::vector<double>* w2;  // metric factor squared (may be null => 1)

  double w2_at(int id) const { return w2 ? (*w2)[id] : 1.0; }
  bool carries(int i, int j) const {
    return c->cls[c->idx(i, j)] != NodeClass::Inactive;
  }
};

// Value of q(i,j) where q = f or w2, with cubic ghost extrapolation along
// direction `dir` (0: x1, 1: x2) when the requested index is one step past a
// chart edge. Only called with indices in range or exactly one step outside.
double extended_value(const ChartView& v, bool want_w2, int i, int j) {
  const Chart& c = *v.c;
  auto val = [&](int ii, int jj) {
    const int id = c.idx(ii, jj);
    return want_w2 ? v.w2_at(id) : (*v.f)[id];
  };
  if (i >= 0 && i < c.n1 && j >= 0 && j < c.n2) return val(i, j);
  // one-step ghost beyond an edge: extrapolate along the offending direction
  double xs[4], fs[4];
  if (i < 0 || i >= c.n1) {
    const int dir = (i < 0) ? +1 : -1;
    const int i0 = (i < 0) ? 0 : c.n1 - 1;
    const double xg = 2.0 * c.x1[i0] - c.x1[i0 + dir];  // mirror position
    int n = 0;
    for (int k = 0; k < 4 && i0 + dir * k >= 0 && i0 + dir * k < c.n1; ++k) {
      xs[n] = c.x1[i0 + dir * k];
      fs[n] = val(i0 + dir * k, j);
      ++n;
    }
    return lagrange_extrap(xs, fs, n, xg);
  }
  const int dir = (j < 0) ? +1 : -1;
  const int j0 = (j < 0) ? 0 : c.n2 - 1;
  const double xg = 2.0 * c.x2[j0] - c.x2[j0 + dir];  // mirror position
  int n = 0;
  for (int k = 0; k < 4 && j0 + dir * k >= 0 && j0 + dir * k < c.n2; ++k) {
    xs[n] = c.x2[j0 + dir * k];
    fs[n] = val(i, j0 + dir * k);
    ++n;
  }
  return lagrange_extrap(xs, fs, n, xg);
}

double coord1(const Chart& c, int i) {
  if (i >= 0 && i < c.n1) return c.x1[i];
  return (i < 0) ? c.x1[0] - (c.x1[1] - c.x1[0])
                 : c.x1[c.n1 - 1] + (c.x1[c.n1 - 1] - c.x1[c.n1 - 2]);
}
double coord2(const Chart& c, int j) {
  if (j >= 0 && j < c.n2) return c.x2[j];
  return (j < 0) ? c.x2[0] - (c.x2[1] - c.x2[0])
                 : c.x2[c.n2 - 1] + (c.x2[c.n2 - 1] - c.x2[c.n2 - 2]);
}

// Flux divergence (1/a)[d1(a w2 f1) + d2(w2 f2 a)]/1 at a node; the operand
// enters through half-point fluxes of q = f (Laplacian) with gradient fluxes,
// so this helper handles the Laplacian case. Meridian hole carriers are the
// caller's business.
double flux_laplacian_at(const ChartView& v, int i, int j) {
  const Chart& c = *v.c;
  const bool pole_lo = c.azimuth(c.x1[0]) == 0.0 && i == 0;
  const bool pole_hi = c.is_neck() && i == c.n1 - 1;

  auto fval = [&](int ii, int jj) { return extended_value(v, false, ii, jj); };
  auto w2val = [&](int ii, int jj) { return extended_value(v, true, ii, jj); };

  // direction 1
  double part1 = 0.0;
  {
    const double x0 = c.x1[i];
    if (pole_lo) {
      const double xp = coord1(c, i + 1);
      const double xh = 0.5 * (x0 + xp);
      const double ah = c.azimuth(xh);
      const double w2h = 0.5 * (w2val(i, j) + w2val(i + 1, j));
      const double flux = ah * w2h * (fval(i + 1, j) - fval(i, j)) / (xp - x0);
      const double vol = c.is_neck() ? (1.0 - std::cos(xh)) : 0.5 * xh * xh;
      part1 = flux / vol;
    } else if (pole_hi) {
      const double xm = coord1(c, i - 1);
      const double xh = 0.5 * (x0 + xm);
      const double ah = c.azimuth(xh);
      const double w2h = 0.5 * (w2val(i, j) + w2val(i - 1, j));
      const double flux = ah * w2h * (fval(i, j) - fval(i - 1, j)) / (x0 - xm);
      const double vol = 1.0 + std::cos(xh);
      part1 = -flux / vol;
    } else {
      const double xm = coord1(c, i - 1), xp = coord1(c, i + 1);
      const double hm = x0 - xm, hp = xp - x0;
      const double ahp = c.azimuth(0.5 * (x0 + xp));
      const double ahm = c.azimuth(0.5 * (x0 + xm));
      const double w2p = 0.5 * (w2val(i, j) + w2val(i + 1, j));
      const double w2m = 0.5 * (w2val(i, j) + w2val(i - 1, j));
      const double fp = ahp * w2p * (fval(i + 1, j) - fval(i, j)) / hp;
      const double fm = ahm * w2m * (fval(i, j) - fval(i - 1, j)) / hm;
      part1 = (fp - fm) / (c.azimuth(x0) * 0.5 * (hp + hm));
    }
  }
  // direction 2 (azimuth weight independent of x2)
  double part2 = 0.0;
  {
    const double x0 = c.x2[j];
    const double xm = coord2(c, j - 1), xp = coord2(c, j + 1);
    const double hm = x0 - xm, hp = xp - x0;
    const double w2p = 0.5 * (w2val(i, j) + w2val(i, j + 1));
    const double w2m = 0.5 * (w2val(i, j) + w2val(i, j - 1));
    const double fp = w2p * (fval(i, j + 1) - fval(i, j)) / hp;
    const double fm = w2m * (fval(i, j) - fval(i, j - 1)) / hm;
    part2 = (fp - fm) / (0.5 * (hp + hm));
  }
  return part1 + part2;
}

// Same flux structure for a covector field: fluxes are half-point averages of
// the products a w2 X.
double flux_divergence_at(const ChartView& v, const std::vector<double>& X1,
                          const std::vector<double>& X2, int i, int j) {
  const Chart& c = *v.c;
  const bool pole_lo = c.azimuth(c.x1[0]) == 0.0 && i == 0;
  const bool pole_hi = c.is_neck() && i == c.n1 - 1;

  ChartView v1 = v;
  v1.f = &X1;
  ChartView v2 = v;
  v2.f = &X2;
  // Face fluxes average the smooth factors (w2, X) separately and evaluate
  // the azimuth weight at the face; averaging the product a w2 X would be
  // O(1) wrong at the axis poles where it vanishes quadratically. The vector
  // component is interpolated to the face at fourth order where the stencil
  // allows, so divergence(gradient(f)) tracks the Laplacian at the h^2/24
  // level of the latter's face difference.
  auto carried = [&](int ii, int jj) {
    return ii >= 0 && ii < c.n1 && jj >= 0 && jj < c.n2 &&
           c.cls[c.idx(ii, jj)] != NodeClass::Inactive;
  };
  auto face_interp = [&](const ChartView& vv, bool dir1, int ii, int jj,
                         int ia_lo) {
    // face between index ia_lo and ia_lo+1 along the chosen direction; the
    // a1 component of an axisymmetric covector is odd across the axis
    // poles, which supplies the missing fourth sample there by reflection
    auto val = [&](int k) {
      if (dir1) {
        const bool pole_lo = c.azimuth(c.x1[0]) == 0.0;
        const bool pole_hi = c.is_neck();
        if (k < 0 && pole_lo) return -extended_value(vv, false, -k, jj);
        if (k > c.n1 - 1 && pole_hi) {
          return -extended_value(vv, false, 2 * (c.n1 - 1) - k, jj);
        }
        return extended_value(vv, false, k, jj);
      }
      return extended_value(vv, false, ii, k);
    };
    auto has = [&](int k) {
      if (dir1) {
        if (k < 0 && c.azimuth(c.x1[0]) == 0.0) return carried(-k, jj);
        if (k > c.n1 - 1 && c.is_neck()) {
          return carried(2 * (c.n1 - 1) - k, jj);
        }
        return carried(k, jj);
      }
      return carried(ii, k);
    };
    auto coord = [&](int k) {
      const auto& ax = dir1 ? c.x1 : c.x2;
      const int n = dir1 ? c.n1 : c.n2;
      if (k < 0) return 2.0 * ax[0] - ax[-k];
      if (k > n - 1) return 2.0 * ax[n - 1] - ax[2 * (n - 1) - k];
      return ax[k];
    };
    if (has(ia_lo - 1) && has(ia_lo) && has(ia_lo + 1) && has(ia_lo + 2)) {
      // cubic Lagrange at the face midpoint (the flux evaluation point)
      const double xq = 0.5 * (coord(ia_lo) + coord(ia_lo + 1));
      double xs[4], fs[4];
      for (int t = 0; t < 4; ++t) {
        xs[t] = coord(ia_lo - 1 + t);
        fs[t] = val(ia_lo - 1 + t);
      }
      return lagrange_extrap(xs, fs, 4, xq);
    }
    return 0.5 * (val(ia_lo) + val(ia_lo + 1));
  };
  auto flux1 = [&](int ia, int ib, int jj) {
    const double xh = 0.5 * (coord1(c, ia) + coord1(c, ib));
    const double w2h = 0.5 * (extended_value(v1, true, ia, jj) +
                              extended_value(v1, true, ib, jj));
    const double xh1 = face_interp(v1, true, ia, jj, std::min(ia, ib));
    return c.azimuth(xh) * w2h * xh1;
  };
  auto flux2 = [&](int ii, int ja, int jb) {
    const double w2h = 0.5 * (extended_value(v2, true, ii, ja) +
                              extended_value(v2, true, ii, jb));
    const double xh2 = face_interp(v2, false, ii, ja, std::min(ja, jb));
    return w2h * xh2;
  };

  double part1 = 0.0;
  {
    const double x0 = c.x1[i];
    if (pole_lo) {
      const double xp = coord1(c, i + 1);
      const double xh = 0.5 * (x0 + xp);
      const double vol = c.is_neck() ? (1.0 - std::cos(xh)) : 0.5 * xh * xh;
      part1 = flux1(i, i + 1, j) / vol;
    } else if (pole_hi) {
      const double xm = coord1(c, i - 1);
      const double xh = 0.5 * (x0 + xm);
      const double vol = 1.0 + std::cos(xh);
      part1 = -flux1(i, i - 1, j) / vol;
    } else {
      const double xm = coord1(c, i - 1), xp = coord1(c, i + 1);
      part1 = (flux1(i, i + 1, j) - flux1(i - 1, i, j)) /
              (c.azimuth(x0) * 0.5 * (xp - xm));
    }
  }
  double part2 = 0.0;
  {
    const double xm = coord2(c, j - 1), xp = coord2(c, j + 1);
    part2 = (flux2(i, j, j + 1) - flux2(i, j - 1, j)) / (0.5 * (xp - xm));
  }
  return part1 + part2;
}

bool monitor_node(const Chart& c, int i, int j) {
  const NodeClass cl = c.cls[c.idx(i, j)];
  if (cl == NodeClass::Inactive) return false;
  if (cl == NodeClass::Interface && !c.is_neck()) return false;  // hole carrier
  return true;
}

// Derivative at xq of the Lagrange polynomial through (xs[k], fs[k]).
double lagrange_deriv(const double* xs, const double* fs, int n, double xq) {
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    double dk = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      double term = 1.0;
      for (int m = 0; m < n; ++m) {
        if (m == k || m == l) continue;
        term *= (xq - xs[m]) / (xs[k] - xs[m]);
      }
      dk += term / (xs[k] - xs[l]);
    }
    acc += dk * fs[k];
  }
  return acc;
}

// First derivative along one direction: centered three-point stencils in the
// interior, four-point one-sided at run edges (third order, so downstream
// flux differences next to chart edges stay second order).
double deriv1d(const std::vector<double>& x, const std::vector<double>& f,
               const std::vector<int>& ids, int k) {
  const int n = static_cast<int>(ids.size());
  if (n == 1) return 0.0;
  if (n == 2) return (f[ids[1]] - f[ids[0]]) / (x[1] - x[0]);
  double xs[5], fs[5];
  int k0, m;
  if (n == 5) {  // centered 5-point
    m = 5;
    k0 = 0;
  } else if (k == 0 || k == n - 1) {
    m = std::min(4, n);
    k0 = (k == 0) ? 0 : n - m;
  } else {
    m = 3;
    k0 = k - 1;
  }
  for (int t = 0; t < m; ++t) {
    xs[t] = x[k0 + t];
    fs[t] = f[ids[k0 + t]];
  }
  return lagrange_deriv(xs, fs, m, x[k]);
}

}  // namespace

VectorField gradient(const ScalarField& f) {
  const Atlas& atlas = *f.atlas;
  VectorField out(atlas);
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    const auto& fv = f.chart[cc];
    // gather the run of carried nodes around the target: five-point centered
    // where both sides carry two neighbors (fourth order, keeps the
    // divergence-of-gradient composition at the h^2/24 level), three-point
    // centered next to edges, up to four points one-sided at edges
    // Scalars are even across the axis poles, so direction-1 runs extend
    // through them by reflection; that keeps five-point centering (and the
    // divergence-of-gradient composition) uniform up to the axis.
    const bool pole_lo1 = c.azimuth(c.x1[0]) == 0.0;
    const bool pole_hi1 = c.is_neck();
    auto run_deriv = [&](int i, int j, bool dir1) {
      const int n = dir1 ? c.n1 : c.n2;
      const int pos = dir1 ? i : j;
      auto mirror1 = [&](int k) {
        if (dir1 && k < 0 && pole_lo1) return -k;
        if (dir1 && k > n - 1 && pole_hi1) return 2 * (n - 1) - k;
        return k;
      };
      auto ok = [&](int k) {
        const int km = mirror1(k);
        if (km < 0 || km >= n) return false;
        const int id = dir1 ? c.idx(km, j) : c.idx(i, km);
        return c.cls[id] != NodeClass::Inactive;
      };
      int lo = pos, hi = pos;
      while (ok(lo - 1) && pos - lo < 3) --lo;
      while (ok(hi + 1) && hi - pos < 3) ++hi;
      if (lo <= pos - 2 && hi >= pos + 2) {  // centered 5-point
        lo = pos - 2;
        hi = pos + 2;
      } else if (lo < pos && hi > pos) {  // centered 3-point
        lo = pos - 1;
        hi = pos + 1;
      } else if (lo == pos) {  // one-sided up
        hi = std::min(hi, pos + 3);
      } else {  // one-sided down
        lo = std::max(lo, pos - 3);
      }
      std::vector<double> xs;
      std::vector<int> ids;
      for (int k = lo; k <= hi; ++k) {
        const int km = mirror1(k);
        if (dir1) {
          double xk = c.x1[km];
          if (k < 0) xk = 2.0 * c.x1[0] - xk;
          if (k > n - 1) xk = 2.0 * c.x1[n - 1] - xk;
          xs.push_back(xk);
          ids.push_back(c.idx(km, j));
        } else {
          xs.push_back(c.x2[k]);
          ids.push_back(c.idx(i, k));
        }
      }
      return deriv1d(xs, fv, ids, pos - lo);
    };
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        const int id = c.idx(i, j);
        if (c.cls[id] == NodeClass::Inactive) continue;
        out.a1[cc][id] = run_deriv(i, j, true);
        out.a2[cc][id] = run_deriv(i, j, false);
      }
    }
  }
  return out;
}

ScalarField laplace_beltrami(const ScalarField& f, const MetricState& g) {
  const Atlas& atlas = *f.atlas;
  ScalarField out(atlas);
  std::vector<double> w2;
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    w2.resize(c.size());
    for (int id = 0; id < c.size(); ++id) {
      w2[id] = g.w.chart[cc][id] * g.w.chart[cc][id];
    }
    ChartView v{&c, &f.chart[cc], &w2};
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        if (!monitor_node(c, i, j)) continue;
        const int id = c.idx(i, j);
        const double w = g.w.chart[cc][id];
        out.chart[cc][id] = flux_laplacian_at(v, i, j) / std::pow(w, 6);
      }
    }
  }
  return out;
}

ScalarField divergence(const VectorField& X, const MetricState& g) {
  const Atlas& atlas = *X.atlas;
  ScalarField out(atlas);
  std::vector<double> w2;
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    w2.resize(c.size());
    for (int id = 0; id < c.size(); ++id) {
      w2[id] = g.w.chart[cc][id] * g.w.chart[cc][id];
    }
    ChartView v{&c, nullptr, &w2};
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        if (!monitor_node(c, i, j)) continue;
        const int id = c.idx(i, j);
        const double w = g.w.chart[cc][id];
        out.chart[cc][id] =
            flux_divergence_at(v, X.a1[cc], X.a2[cc], i, j) / std::pow(w, 6);
      }
    }
  }
  return out;
}

ScalarField conformal_laplacian(const ScalarField& f, const MetricState& g) {
  const Atlas& atlas = *f.atlas;
  ScalarField out(atlas);
  ScalarField wf(atlas);
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    for (int id = 0; id < atlas.charts[cc].size(); ++id) {
      wf.chart[cc][id] = g.w.chart[cc][id] * f.chart[cc][id];
    }
  }
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    ChartView v{&c, &wf.chart[cc], nullptr};  // base metric: w2 == 1
    const double r0 = c.base_curvature();
    for (int j = 0; j < c.n2; ++j) {
      for (int i = 0; i < c.n1; ++i) {
        if (!monitor_node(c, i, j)) continue;
        const int id = c.idx(i, j);
        const double w = g.w.chart[cc][id];
        const double lap0 = flux_laplacian_at(v, i, j);
        out.chart[cc][id] =
            (lap0 - 0.125 * r0 * wf.chart[cc][id]) / std::pow(w, 5);
      }
    }
  }
  return out;
}

ScalarField scalar_curvature(const MetricState& g) {
  ScalarField one(*g.atlas, 1.0);
  ScalarField l = conformal_laplacian(one, g);
  for (auto& ch : l.chart) {
    for (double& v : ch) v *= -8.0;
  }
  return l;
}

ScalarField norm2(const VectorField& X, const MetricState& g) {
  const Atlas& atlas = *X.atlas;
  ScalarField out(atlas);
  for (size_t cc = 0; cc < atlas.charts.size(); ++cc) {
    const Chart& c = atlas.charts[cc];
    for (int id = 0; id < c.size(); ++id) {
      if (c.cls[id] == NodeClass::Inactive) continue;
      const double w = g.w.chart[cc][id];
      out.chart[cc][id] = (X.a1[cc][id] * X.a1[cc][id] +
                           X.a2[cc][id] * X.a2[cc][id]) /
                          std::pow(w, 4);
    }
  }
  return out;
}

InterpStencil chart_stencil(const Chart& c, double x1, double x2) {
  if (x1 < c.x1.front() - 1e-9 || x1 > c.x1.back() + 1e-9 ||
      x2 < c.x2.front() - 1e-9 || x2 > c.x2.back() + 1e-9) {
    throw std::runtime_error("chart_stencil: point outside chart domain");
  }
  x1 = std::clamp(x1, c.x1.front(), c.x1.back());
  x2 = std::clamp(x2, c.x2.front(), c.x2.back());
  auto find = [](const std::vector<double>& ax, double val) {
    auto it = std::upper_bound(ax.begin(), ax.end(), val);
    int i = static_cast<int>(it - ax.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(ax.size()) - 2);
  };
  const int i = find(c.x1, x1);
  const int j = find(c.x2, x2);
  const double tx = (x1 - c.x1[i]) / (c.x1[i + 1] - c.x1[i]);
  const double ty = (x2 - c.x2[j]) / (c.x2[j + 1] - c.x2[j]);
  InterpStencil st;
  st.node = {c.idx(i, j), c.idx(i + 1, j), c.idx(i, j + 1),
             c.idx(i + 1, j + 1)};
  st.w = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return st;
}

double interp_at(const ScalarField& f, int chart, double x1, double x2) {
  const InterpStencil st = chart_stencil(f.atlas->charts[chart], x1, x2);
  return interp(f, chart, st);
}

double integrate_surface(const ProfileCurve& S, const ScalarField& f,
                         const MetricState& g) {
  const Atlas& atlas = *g.atlas;
  const Chart& c = atlas.charts[S.chart];
  const size_t n = S.x1.size();
  if (n < 2 || S.x2.size() != n) {
    throw std::invalid_argument("integrate_surface: bad profile");
  }
  std::vector<double> dens(n);
  for (size_t k = 0; k < n; ++k) {
    const InterpStencil st = chart_stencil(c, S.x1[k], S.x2[k]);
    const double w = interp(g.w, S.chart, st);
    const double fv = f.atlas ? interp(f, S.chart, st) : 1.0;
    dens[k] = std::pow(w, 4) * c.azimuth(S.x1[k]) * fv;
  }
  double acc = 0.0;
  for (size_t k = 0; k + 1 < n; ++k) {
    const double dl = std::hypot(S.x1[k + 1] - S.x1[k], S.x2[k + 1] - S.x2[k]);
    acc += 0.5 * (dens[k] + dens[k + 1]) * dl;
  }
  return 2.0 * M_PI * acc;
}

double surface_area(const ProfileCurve& S, const MetricState& g) {
  ScalarField unit;  // sentinel: integrate_surface treats null atlas as f == 1
  return integrate_surface(S, unit, g);
}

}  // namespace mpglue::geometry
