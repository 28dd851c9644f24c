// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/fields.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mpglue::geometry {

ScalarField::ScalarField(const Atlas& a, double fill) : atlas(&a) {
  chart.resize(a.charts.size());
  for (size_t c = 0; c < a.charts.size(); ++c) {
    chart[c].assign(a.charts[c].size(), fill);
  }
}

VectorField::VectorField(const Atlas& a, double fill) : atlas(&a) {
  a1.resize(a.charts.size());
  a2.resize(a.charts.size());
  for (size_t c = 0; c < a.charts.size(); ++c) {
    a1[c].assign(a.charts[c].size(), fill);
    a2[c].assign(a.charts[c].size(), fill);
  }
}

MetricState::MetricState(const Atlas& a)
    : atlas(&a), w(a, 1.0), kind(a.charts.size(), ChartMetricKind::ConformallyFlat) {}

ScalarField sample_meridian_function(
    const Atlas& atlas, const std::function<double(double, double)>& f) {
  ScalarField out(atlas);
  for (size_t c = 0; c < atlas.charts.size(); ++c) {
    const Chart& ch = atlas.charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] == NodeClass::Inactive) continue;
        double rho, z;
        ch.position(ch.x1[i], ch.x2[j], &rho, &z);
        out.chart[c][id] = f(rho, z);
      }
    }
  }
  return out;
}

double weighted_sup_norm(const ScalarField& f, double beta) {
  if (beta < 0.0 || beta > 3.0) {
    throw std::invalid_argument("weighted_sup_norm: beta outside [0,3]");
  }
  const Atlas& atlas = *f.atlas;
  double sup = 0.0;
  for (size_t c = 0; c < atlas.charts.size(); ++c) {
    const Chart& ch = atlas.charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] == NodeClass::Inactive) continue;
        double sigma = 1.0;
        if (!ch.is_neck()) {
          sigma = Atlas::sigma_weight(std::hypot(ch.x1[i], ch.x2[j]));
        }
        sup = std::max(sup, std::pow(sigma, beta) * std::abs(f.chart[c][id]));
      }
    }
  }
  return sup;
}

double interior_sup_norm(const ScalarField& f) {
  const Atlas& atlas = *f.atlas;
  double sup = 0.0;
  for (size_t c = 0; c < atlas.charts.size(); ++c) {
    const Chart& ch = atlas.charts[c];
    for (int id = 0; id < ch.size(); ++id) {
      if (ch.cls[id] != NodeClass::Interior) continue;
      sup = std::max(sup, std::abs(f.chart[c][id]));
    }
  }
  return sup;
}

double interp(const ScalarField& f, int chart, const InterpStencil& st) {
  double v = 0.0;
  for (int t = 0; t < 4; ++t) v += st.w[t] * f.chart[chart][st.node[t]];
  return v;
}

std::vector<double> resample(const ScalarField& f, const InterfaceSet& set) {
  std::vector<double> out(set.nodes.size());
  for (size_t q = 0; q < set.nodes.size(); ++q) {
    out[q] = interp(f, set.donor, set.stencils[q]);
  }
  return out;
}

double overlap_disagreement(const ScalarField& f) {
  const Atlas& atlas = *f.atlas;
  double worst = 0.0;
  for (const auto& set : atlas.overlap_samples) {
    const auto vals = resample(f, set);
    for (size_t q = 0; q < set.nodes.size(); ++q) {
      worst = std::max(worst,
                       std::abs(vals[q] - f.chart[set.chart][set.nodes[q]]));
    }
  }
  return worst;
}

void write_field_csv(std::ostream& os, const ScalarField& f) {
  os << "chart,coord1,coord2,value\n";
  char buf[64];
  const Atlas& atlas = *f.atlas;
  for (size_t c = 0; c < atlas.charts.size(); ++c) {
    const Chart& ch = atlas.charts[c];
    for (int j = 0; j < ch.n2; ++j) {
      for (int i = 0; i < ch.n1; ++i) {
        const int id = ch.idx(i, j);
        if (ch.cls[id] == NodeClass::Inactive) continue;
        os << ch.id << ',';
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,", ch.x1[i], ch.x2[j]);
        os << buf;
        std::snprintf(buf, sizeof(buf), "%.17g\n", f.chart[c][id]);
        os << buf;
      }
    }
  }
}

}  // namespace mpglue::geometry
