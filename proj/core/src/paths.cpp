#include "mfgc/paths.hpp"

#include "mfgc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfgc {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw invalid_argument("time horizon must be positive and finite");
  }
  if (steps < 2) throw invalid_argument("time grid needs at least 2 steps");
}

ControlPath::ControlPath(TimeGrid grid, Mat values) : grid_(grid), values_(std::move(values)) {
  if (values_.cols() != grid_.nodes()) {
    throw invalid_argument("control path must have one column per grid node");
  }
  if (values_.rows() < 1) throw invalid_argument("control path dimension must be positive");
  if (!values_.allFinite()) throw invalid_argument("control path values must be finite");
}

ControlPath ControlPath::constant(const TimeGrid& grid, const Vec& value) {
  return ControlPath(grid, value.replicate(1, grid.nodes()));
}

ControlPath ControlPath::zero(const TimeGrid& grid, int dim) {
  return ControlPath(grid, Mat::Zero(dim, grid.nodes()));
}

Vec ControlPath::sample(double t) const {
  const double u = std::clamp(t / grid_.dt(), 0.0, static_cast<double>(grid_.steps()));
  const int k = std::min(static_cast<int>(u), grid_.steps() - 1);
  const double frac = u - k;
  return (1.0 - frac) * values_.col(k) + frac * values_.col(k + 1);
}

Vec ControlPath::mean() const {
  Vec acc = Vec::Zero(dim());
  for (int k = 0; k < grid_.nodes(); ++k) acc += grid_.weight(k) * values_.col(k);
  return acc / grid_.horizon();
}

double ControlPath::max_deviation_from_mean() const {
  const Vec m = mean();
  double worst = 0.0;
  for (int k = 0; k < grid_.nodes(); ++k) worst = std::max(worst, (values_.col(k) - m).norm());
  return worst;
}

double l2_inner(const TimeGrid& grid, const Mat& a, const Mat& b) {
  if (a.cols() != grid.nodes() || b.cols() != grid.nodes() || a.rows() != b.rows()) {
    throw Error(ErrorKind::GridMismatch, "paths do not share the grid");
  }
  double acc = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) acc += grid.weight(k) * a.col(k).dot(b.col(k));
  return acc;
}

}  // namespace mfgc

namespace mfgc {

ControlPath random_path(const TimeGrid& grid, int dim, const CounterRng& rng,
                        std::uint64_t stream, double lo, double hi, int modes) {
  if (!(hi >= lo)) throw invalid_argument("random_path: empty range");
  Mat values(dim, grid.nodes());
  std::uint64_t counter = 0;
  for (int i = 0; i < dim; ++i) {
    const double center = rng.uniform(stream, counter++, lo, hi);
    const double budget = std::min(center - lo, hi - center);
    Vec a(modes), b(modes);
    for (int m = 0; m < modes; ++m) {
      a[m] = rng.uniform(stream, counter++, -1.0, 1.0) * budget / (2.0 * modes);
      b[m] = rng.uniform(stream, counter++, -1.0, 1.0) * budget / (2.0 * modes);
    }
    for (int k = 0; k < grid.nodes(); ++k) {
      const double theta = std::numbers::pi * grid.node(k) / grid.horizon();
      double v = center;
      for (int m = 0; m < modes; ++m) {
        v += a[m] * std::cos((m + 1) * theta) + b[m] * std::sin((m + 1) * theta);
      }
      values(i, k) = std::clamp(v, lo, hi);
    }
  }
  return ControlPath(grid, std::move(values));
}

}  // namespace mfgc
