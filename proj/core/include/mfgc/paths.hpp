#pragma once

#include "mfgc/counter_rng.hpp"
#include "mfgc/model.hpp"

namespace mfgc {

// Uniform grid t_k = k T / n on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  int nodes() const { return steps_ + 1; }
  double dt() const { return horizon_ / steps_; }
  double node(int k) const { return horizon_ * k / steps_; }

  // Trapezoid quadrature weight of node k.
  double weight(int k) const { return (k == 0 || k == steps_) ? 0.5 * dt() : dt(); }

  bool operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && steps_ == other.steps_;
  }

 private:
  double horizon_;
  int steps_;
};

// A d-vector valued function sampled on a TimeGrid. Column k holds the value
// at t_k; values between nodes are linear interpolants.
class ControlPath {
 public:
  ControlPath(TimeGrid grid, Mat values);

  static ControlPath constant(const TimeGrid& grid, const Vec& value);
  static ControlPath zero(const TimeGrid& grid, int dim);

  const TimeGrid& grid() const { return grid_; }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }
  int dim() const { return static_cast<int>(values_.rows()); }

  Vec at(int k) const { return values_.col(k); }
  // Linear interpolation at t in [0, T].
  Vec sample(double t) const;

  // Midpoint of interval k (used by RK4 stages).
  Vec midpoint(int k) const { return 0.5 * (values_.col(k) + values_.col(k + 1)); }

  // Trapezoid time average and sup-norm deviation from it.
  Vec mean() const;
  double max_deviation_from_mean() const;

 private:
  TimeGrid grid_;
  Mat values_;
};

// Trapezoid L2([0,T]) inner product of two node-sampled paths (d x nodes).
double l2_inner(const TimeGrid& grid, const Mat& a, const Mat& b);
inline double l2_norm(const TimeGrid& grid, const Mat& a) {
  return std::sqrt(std::max(0.0, l2_inner(grid, a, a)));
}

// Random smooth path with every component inside [lo, hi]:
// c + sum_{m=1..modes} a_m cos(m pi t / T) + b_m sin(m pi t / T), all draws
// from `rng` on the given stream. With modes = 0 the path is constant.
ControlPath random_path(const TimeGrid& grid, int dim, const CounterRng& rng,
                        std::uint64_t stream, double lo, double hi, int modes = 2);

}  // namespace mfgc
