// Distributed under the MIT License.
// See LICENSE.txt for details.

#include "mpglue/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpglue::geometry {

double GradingSpec::density(double x) const {
  const double s2 = x * x;
  const double g2 = growth_scale * growth_scale;
  const double h_bg = h_mid + (h_cap - h_mid) * s2 / (s2 + g2);
  double d = 1.0 / h_bg;
  for (const auto& w : wells) {
    const double dx = x - w.center;
    const double soft = std::sqrt(dx * dx + w.width * w.width);
    double dw = 1.0 / (w.h_min + w.alpha * soft);
    if (w.taper > 0.0) dw *= std::exp(-(dx * dx) / (w.taper * w.taper));
    d += dw;
  }
  return d;
}

int GradedAxis::find_cell(double v) const {
  const int n = size();
  auto it = std::upper_bound(x.begin(), x.end(), v);
  int i = static_cast<int>(it - x.begin()) - 1;
  return std::clamp(i, 0, n - 2);
}

namespace {

// Composite Simpson of D over [a,b] with n panels (n even).
double integrate_density(const GradingSpec& spec, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = spec.density(a) + spec.density(b);
  for (int i = 1; i < n; ++i) {
    s += spec.density(a + i * h) * (i % 2 ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

// Solve \int_{x0}^{t} gamma*D = 1 for t by Newton with a bisection guard.
double march_one(const GradingSpec& spec, double gamma, double x0,
                 double xmax) {
  double lo = x0;
  double hi = xmax;
  double t = x0 + 1.0 / (gamma * spec.density(x0));
  t = std::min(t, xmax);
  for (int it = 0; it < 60; ++it) {
    const double mass = gamma * integrate_density(spec, x0, t, 8);
    const double f = mass - 1.0;
    if (std::abs(f) < 1e-14) break;
    if (f > 0) {
      hi = t;
    } else {
      lo = t;
    }
    double tn = t - f / (gamma * spec.density(t));
    if (tn <= lo || tn >= hi) tn = 0.5 * (lo + hi);
    t = tn;
  }
  return t;
}

}  // namespace

GradedAxis build_graded_axis(double xmax, const GradingSpec& spec) {
  if (xmax <= 0) throw std::invalid_argument("gridmap: xmax must be positive");
  const double total = integrate_density(spec, 0.0, xmax, 4096);
  const int ncells = std::max(4, static_cast<int>(std::lround(total)));
  const double gamma = ncells / total;

  GradedAxis axis;
  axis.x.reserve(ncells + 1);
  axis.x.push_back(0.0);
  for (int j = 0; j < ncells; ++j) {
    const double prev = axis.x.back();
    double next = (j + 1 == ncells) ? xmax : march_one(spec, gamma, prev, xmax);
    if (next <= prev) {
      throw std::runtime_error("gridmap: node marching failed to advance");
    }
    axis.x.push_back(next);
  }
  axis.x.back() = xmax;
  return axis;
}

GradedAxis build_symmetric_axis(double xmax, const GradingSpec& spec) {
  // Grade the positive half with the full well set (wells at negative centers
  // contribute their mirror tails), then mirror exactly.
  GradedAxis half = build_graded_axis(xmax, spec);
  GradedAxis axis;
  axis.x.reserve(2 * half.size() - 1);
  for (int i = half.size() - 1; i >= 1; --i) axis.x.push_back(-half.x[i]);
  for (int i = 0; i < half.size(); ++i) axis.x.push_back(half.x[i]);
  return axis;
}

GradedAxis build_uniform_axis(double a, double b, int npts) {
  if (npts < 2 || b <= a) throw std::invalid_argument("gridmap: bad uniform axis");
  GradedAxis axis;
  axis.x.resize(npts);
  const double h = (b - a) / (npts - 1);
  for (int i = 0; i < npts; ++i) axis.x[i] = a + i * h;
  axis.x.back() = b;
  return axis;
}

}  // namespace mpglue::geometry
