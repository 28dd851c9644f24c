// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpglue::constraints {

using geometry::Chart;
using geometry::ChartKind;
using geometry::NodeClass;

void BandedSPD::init(int n, int bandwidth) {
  n_ = n;
  bw_ = bandwidth;
  factored_ = false;
  a_.assign(static_cast<size_t>(n) * (bw_ + 1), 0.0);
}

double& BandedSPD::at(int i, int j) {
  return a_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
}

double BandedSPD::get(int i, int j) const {
  if (j > i) std::swap(i, j);
  if (i - j > bw_) return 0.0;
  return a_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
}

void BandedSPD::factor() {
  // in-place banded Cholesky A = L L^T, L stored in the band
  for (int i = 0; i < n_; ++i) {
    const int j0 = std::max(0, i - bw_);
    for (int j = j0; j <= i; ++j) {
      double sum = a_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
      const int k0 = std::max(j0, j - bw_);
      for (int k = k0; k < j; ++k) {
        sum -= a_[static_cast<size_t>(i) * (bw_ + 1) + (i - k)] *
               a_[static_cast<size_t>(j) * (bw_ + 1) + (j - k)];
      }
      if (i == j) {
        if (sum <= 0.0) {
          throw std::runtime_error("BandedSPD: matrix not positive definite");
        }
        a_[static_cast<size_t>(i) * (bw_ + 1)] = std::sqrt(sum);
      } else {
        a_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)] =
            sum / a_[static_cast<size_t>(j) * (bw_ + 1)];
      }
    }
  }
  factored_ = true;
}

void BandedSPD::solve(std::vector<double>* x) const {
  if (!factored_) throw std::logic_error("BandedSPD: solve before factor");
  std::vector<double>& b = *x;
  for (int i = 0; i < n_; ++i) {
    double sum = b[i];
    const int k0 = std::max(0, i - bw_);
    for (int k = k0; k < i; ++k) {
      sum -= a_[static_cast<size_t>(i) * (bw_ + 1) + (i - k)] * b[k];
    }
    b[i] = sum / a_[static_cast<size_t>(i) * (bw_ + 1)];
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double sum = b[i];
    const int k1 = std::min(n_ - 1, i + bw_);
    for (int k = i + 1; k <= k1; ++k) {
      sum -= a_[static_cast<size_t>(k) * (bw_ + 1) + (k - i)] * b[k];
    }
    b[i] = sum / a_[static_cast<size_t>(i) * (bw_ + 1)];
  }
}

void BandedSPD::multiply(const std::vector<double>& x,
                         std::vector<double>* y) const {
  if (factored_) throw std::logic_error("BandedSPD: multiply after factor");
  y->assign(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    const int j0 = std::max(0, i - bw_);
    double acc = 0.0;
    for (int j = j0; j < i; ++j) {
      const double v = a_[static_cast<size_t>(i) * (bw_ + 1) + (i - j)];
      acc += v * x[j];
      (*y)[j] += v * x[i];
    }
    acc += a_[static_cast<size_t>(i) * (bw_ + 1)] * x[i];
    (*y)[i] += acc;
  }
}

namespace {

// Exact azimuthal control-volume integral over [lo, hi] of the x1 axis.
double v1_integral(const Chart& c, double lo, double hi) {
  if (c.is_neck()) return std::cos(lo) - std::cos(hi);
  return 0.5 * (hi * hi - lo * lo);
}

struct NodeGeom {
  double x1lo, x1hi, x2lo, x2hi, v1, l2;
};

NodeGeom node_geom(const Chart& c, int i, int j) {
  NodeGeom g;
  g.x1lo = (i == 0) ? c.x1[0] : 0.5 * (c.x1[i - 1] + c.x1[i]);
  g.x1hi = (i == c.n1 - 1) ? c.x1[c.n1 - 1] : 0.5 * (c.x1[i] + c.x1[i + 1]);
  g.x2lo = (j == 0) ? c.x2[0] : 0.5 * (c.x2[j - 1] + c.x2[j]);
  g.x2hi = (j == c.n2 - 1) ? c.x2[c.n2 - 1] : 0.5 * (c.x2[j] + c.x2[j + 1]);
  g.v1 = v1_integral(c, g.x1lo, g.x1hi);
  g.l2 = g.x2hi - g.x2lo;
  return g;
}

}  // namespace

CompositeElliptic::CompositeElliptic(const MetricState& metric,
                                     const EllipticSpec& spec,
                                     const SolveOptions& opts)
    : atlas_(metric.atlas), metric_(&metric), spec_(spec), opts_(opts) {
  systems_.resize(atlas_->charts.size());
  for (size_t c = 0; c < atlas_->charts.size(); ++c) {
    systems_[c].chart = static_cast<int>(c);
    assemble_chart(static_cast<int>(c), &systems_[c]);
  }
}

void CompositeElliptic::assemble_chart(int cc, ChartSystem* sys) {
  const Chart& c = atlas_->charts[cc];
  const auto& wv = metric_->w.chart[cc];
  const bool kernel = spec_.kind == OperatorKind::ConformalKernel;

  sys->scale.assign(c.size(), 1.0);
  if (kernel) {
    for (int id = 0; id < c.size(); ++id) sys->scale[id] = wv[id];
  }

  auto is_unknown = [&](int id) {
    switch (c.cls[id]) {
      case NodeClass::Interior:
        return true;
      case NodeClass::Outer:
        return spec_.outer == OuterBC::Robin;
      case NodeClass::Cut:
        return spec_.cut == CutBC::ZeroFlux;
      default:
        return false;
    }
  };

  sys->unknown_of_node.assign(c.size(), -1);
  sys->node_of_unknown.clear();
  for (int j = 0; j < c.n2; ++j) {
    for (int i = 0; i < c.n1; ++i) {
      const int id = c.idx(i, j);
      if (is_unknown(id)) {
        sys->unknown_of_node[id] =
            static_cast<int>(sys->node_of_unknown.size());
        sys->node_of_unknown.push_back(id);
      }
    }
  }
  const int n = static_cast<int>(sys->node_of_unknown.size());

  int bw = 1;
  for (int u = 0; u < n; ++u) {
    const int id = sys->node_of_unknown[u];
    const int i = id % c.n1, j = id / c.n1;
    for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
      const int ii = i + di, jj = j + dj;
      if (ii >= c.n1 || jj >= c.n2) continue;
      const int v = sys->unknown_of_node[c.idx(ii, jj)];
      if (v >= 0) bw = std::max(bw, v - u);
    }
  }
  sys->band_plain.init(n, bw);
  sys->couplings.clear();
  sys->rhs_weight.assign(n, 0.0);
  sys->robin_coeff.assign(n, 0.0);

  auto w2_at = [&](int id) { return kernel ? 1.0 : wv[id] * wv[id]; };

  for (int u = 0; u < n; ++u) {
    const int id = sys->node_of_unknown[u];
    const int i = id % c.n1, j = id / c.n1;
    const NodeGeom g = node_geom(c, i, j);
    const double vol = g.v1 * g.l2;
    double diag = 0.0;

    if (kernel) {
      diag += 0.125 * c.base_curvature() * vol;
      if (spec_.diag) diag += spec_.diag->chart[cc][id] * vol;
      sys->rhs_weight[u] = std::pow(wv[id], 5) * vol;
    } else {
      const double w6 = std::pow(wv[id], 6);
      if (spec_.diag) diag += spec_.diag->chart[cc][id] * w6 * vol;
      sys->rhs_weight[u] = w6 * vol;
    }

    auto couple = [&](int nb_id, double coeff) {
      diag += coeff;
      const int v = sys->unknown_of_node[nb_id];
      if (v >= 0) {
        if (v < u) sys->band_plain.at(u, v) -= coeff;
      } else {
        sys->couplings.push_back({u, nb_id, coeff * sys->scale[nb_id]});
      }
    };

    if (i + 1 < c.n1) {
      const int nb = c.idx(i + 1, j);
      if (c.cls[nb] != NodeClass::Inactive) {
        const double xh = 0.5 * (c.x1[i] + c.x1[i + 1]);
        const double cf = c.azimuth(xh) * g.l2 * 0.5 *
                          (w2_at(id) + w2_at(nb)) / (c.x1[i + 1] - c.x1[i]);
        couple(nb, cf);
      }
    } else if (!c.is_neck() && spec_.outer == OuterBC::Robin) {
      const double rho = c.x1[i], z = c.x2[j];
      const double cr =
          c.azimuth(rho) * g.l2 * w2_at(id) * rho / (rho * rho + z * z);
      diag += cr;
      sys->robin_coeff[u] += cr;
    }
    if (i > 0) {
      const int nb = c.idx(i - 1, j);
      if (c.cls[nb] != NodeClass::Inactive) {
        const double xh = 0.5 * (c.x1[i - 1] + c.x1[i]);
        const double cf = c.azimuth(xh) * g.l2 * 0.5 *
                          (w2_at(id) + w2_at(nb)) / (c.x1[i] - c.x1[i - 1]);
        couple(nb, cf);
      }
    }
    if (j + 1 < c.n2) {
      const int nb = c.idx(i, j + 1);
      if (c.cls[nb] != NodeClass::Inactive) {
        const double cf =
            g.v1 * 0.5 * (w2_at(id) + w2_at(nb)) / (c.x2[j + 1] - c.x2[j]);
        couple(nb, cf);
      }
    } else if (!c.is_neck() && spec_.outer == OuterBC::Robin) {
      const double rho = c.x1[i], z = c.x2[j];
      const double cr = g.v1 * w2_at(id) * z / (rho * rho + z * z);
      diag += cr;
      sys->robin_coeff[u] += cr;
    }
    if (j > 0) {
      const int nb = c.idx(i, j - 1);
      if (c.cls[nb] != NodeClass::Inactive) {
        const double cf =
            g.v1 * 0.5 * (w2_at(id) + w2_at(nb)) / (c.x2[j] - c.x2[j - 1]);
        couple(nb, cf);
      }
    } else if (!c.is_neck() && spec_.outer == OuterBC::Robin) {
      const double rho = c.x1[i], z = c.x2[j];
      const double cr = g.v1 * w2_at(id) * (-z) / (rho * rho + z * z);
      diag += cr;
      sys->robin_coeff[u] += cr;
    }
    sys->band_plain.at(u, u) += diag;
  }

  sys->band = sys->band_plain;
  sys->band.factor();
}

void CompositeElliptic::chart_rhs(const ChartSystem& sys,
                                  const ScalarField& rhs, const ScalarField& x,
                                  double robin_offset,
                                  std::vector<double>* b) const {
  const int cc = sys.chart;
  const int n = static_cast<int>(sys.node_of_unknown.size());
  b->assign(n, 0.0);
  for (int u = 0; u < n; ++u) {
    (*b)[u] = rhs.chart[cc][sys.node_of_unknown[u]] * sys.rhs_weight[u];
    if (robin_offset != 0.0) (*b)[u] += sys.robin_coeff[u] * robin_offset;
  }
  for (const auto& cp : sys.couplings) {
    (*b)[cp.row] += cp.coeff * x.chart[cc][cp.node];
  }
}

double CompositeElliptic::chart_residual(const ChartSystem& sys,
                                         const ScalarField& rhs,
                                         const ScalarField& x,
                                         double robin_offset) const {
  const int cc = sys.chart;
  const int n = static_cast<int>(sys.node_of_unknown.size());
  std::vector<double> chi(n), b, ax;
  for (int u = 0; u < n; ++u) {
    const int id = sys.node_of_unknown[u];
    chi[u] = sys.scale[id] * x.chart[cc][id];
  }
  chart_rhs(sys, rhs, x, robin_offset, &b);
  sys.band_plain.multiply(chi, &ax);
  // residual in physical operator units so tiny near-pole control volumes
  // are weighted fairly
  double worst = 0.0;
  for (int u = 0; u < n; ++u) {
    worst = std::max(worst, std::abs(ax[u] - b[u]) / sys.rhs_weight[u]);
  }
  return worst;
}

void CompositeElliptic::refresh_interfaces(ScalarField* x) const {
  for (const auto& set : atlas_->interfaces) {
    for (size_t q = 0; q < set.nodes.size(); ++q) {
      double v = 0.0;
      for (int t = 0; t < 4; ++t) {
        v += set.stencils[q].w[t] *
             x->chart[set.donor][set.stencils[q].node[t]];
      }
      x->chart[set.chart][set.nodes[q]] = v;
    }
  }
}

namespace {

// PCG with a symmetric Gauss-Seidel preconditioner on the band matrix.
int pcg_solve(const BandedSPD& a, int bw, const std::vector<double>& b,
              std::vector<double>* x, double tol, int maxit) {
  const int n = a.size();
  auto sgs_apply = [&](const std::vector<double>& r, std::vector<double>* z) {
    std::vector<double>& zz = *z;
    zz.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double s = r[i];
      for (int j = std::max(0, i - bw); j < i; ++j) {
        const double v = a.get(i, j);
        if (v != 0.0) s -= v * zz[j];
      }
      zz[i] = s / a.get(i, i);
    }
    for (int i = 0; i < n; ++i) zz[i] *= a.get(i, i);
    for (int i = n - 1; i >= 0; --i) {
      double s = zz[i];
      for (int j = i + 1; j <= std::min(n - 1, i + bw); ++j) {
        const double v = a.get(i, j);
        if (v != 0.0) s -= v * zz[j];
      }
      zz[i] = s / a.get(i, i);
    }
  };
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(*x, &ap);
  double bnorm = 0.0;
  for (int i = 0; i < n; ++i) {
    r[i] = b[i] - ap[i];
    bnorm = std::max(bnorm, std::abs(b[i]));
  }
  if (bnorm == 0.0) bnorm = 1.0;
  sgs_apply(r, &z);
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  int it = 0;
  for (; it < maxit; ++it) {
    double rmax = 0.0;
    for (int i = 0; i < n; ++i) rmax = std::max(rmax, std::abs(r[i]));
    if (rmax <= tol * bnorm) break;
    a.multiply(p, &ap);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) break;
    const double alpha = rz / pap;
    for (int i = 0; i < n; ++i) {
      (*x)[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    sgs_apply(r, &z);
    double rz_new = 0.0;
    for (int i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return it;
}

}  // namespace

SolveStats CompositeElliptic::solve(const ScalarField& rhs, ScalarField* x,
                                    double robin_offset) const {
  SolveStats stats;
  if (spec_.cut == CutBC::DirichletZero) {
    for (size_t cc = 0; cc < atlas_->charts.size(); ++cc) {
      const Chart& c = atlas_->charts[cc];
      for (int id = 0; id < c.size(); ++id) {
        if (c.cls[id] == NodeClass::Cut) x->chart[cc][id] = 0.0;
      }
    }
  }
  refresh_interfaces(x);

  std::vector<double> b;
  double scale = 0.0;
  for (const auto& sys : systems_) {
    chart_rhs(sys, rhs, *x, robin_offset, &b);
    for (size_t u = 0; u < b.size(); ++u) {
      scale = std::max(scale, std::abs(b[u]) / sys.rhs_weight[u]);
    }
  }
  if (scale == 0.0) scale = 1.0;
  stats.rhs_scale = scale;

  std::vector<double> chi;
  for (int sweep = 0; sweep < opts_.max_sweeps; ++sweep) {
    for (const auto& sys : systems_) {
      const int cc = sys.chart;
      for (const auto& set : atlas_->interfaces) {
        if (set.chart != cc) continue;
        for (size_t q = 0; q < set.nodes.size(); ++q) {
          double v = 0.0;
          for (int t = 0; t < 4; ++t) {
            v += set.stencils[q].w[t] *
                 x->chart[set.donor][set.stencils[q].node[t]];
          }
          x->chart[cc][set.nodes[q]] = v;
        }
      }
      chart_rhs(sys, rhs, *x, robin_offset, &b);
      const int n = static_cast<int>(sys.node_of_unknown.size());
      if (opts_.use_pcg) {
        chi.assign(n, 0.0);
        for (int u = 0; u < n; ++u) {
          const int id = sys.node_of_unknown[u];
          chi[u] = sys.scale[id] * x->chart[cc][id];
        }
        pcg_solve(sys.band_plain, sys.band_plain.bandwidth(), b, &chi,
                  opts_.pcg_tol, opts_.pcg_max_iter);
      } else {
        chi = b;
        sys.band.solve(&chi);
      }
      for (int u = 0; u < n; ++u) {
        const int id = sys.node_of_unknown[u];
        x->chart[cc][id] = chi[u] / sys.scale[id];
      }
    }
    refresh_interfaces(x);
    double res = 0.0;
    for (const auto& sys : systems_) {
      res = std::max(res, chart_residual(sys, rhs, *x, robin_offset));
    }
    stats.residual_history.push_back(res / scale);
    stats.sweeps = sweep + 1;
    stats.final_residual = res / scale;
    if (res <= opts_.tol * scale) {
      stats.converged = true;
      break;
    }
    // roundoff floor: residual stagnates within a decade of the tolerance
    const auto& h = stats.residual_history;
    if (h.size() >= 4 && res <= 10.0 * opts_.tol * scale &&
        h[h.size() - 1] > 0.9 * h[h.size() - 4]) {
      stats.converged = true;
      break;
    }
  }
  return stats;
}

ScalarField CompositeElliptic::apply(const ScalarField& x,
                                     double robin_offset) const {
  ScalarField out(*atlas_);
  std::vector<double> chi, ax, b;
  for (const auto& sys : systems_) {
    const int cc = sys.chart;
    const int n = static_cast<int>(sys.node_of_unknown.size());
    chi.resize(n);
    for (int u = 0; u < n; ++u) {
      const int id = sys.node_of_unknown[u];
      chi[u] = sys.scale[id] * x.chart[cc][id];
    }
    sys.band_plain.multiply(chi, &ax);
    b.assign(n, 0.0);
    for (const auto& cp : sys.couplings) {
      b[cp.row] += cp.coeff * x.chart[cc][cp.node];
    }
    for (int u = 0; u < n; ++u) {
      const double off = sys.robin_coeff[u] * robin_offset;
      out.chart[cc][sys.node_of_unknown[u]] =
          (ax[u] - b[u] - off) / sys.rhs_weight[u];
    }
  }
  return out;
}

}  // namespace mpglue::constraints
