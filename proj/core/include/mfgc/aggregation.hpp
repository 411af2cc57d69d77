#pragma once

#include "mfgc/paths.hpp"
#include "mfgc/trajectory.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mfgc {

struct ExplicitProvenance {};

struct GaussianProvenance {
  Vec mean;
  Mat covariance;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct GridProvenance {
  Vec lower;
  Vec upper;
  int points_per_axis = 0;
};

// Weighted particles x0^i with weights summing to one.
class ParticleEnsemble {
 public:
  enum class Provenance { Explicit, Gaussian, Grid };

  ParticleEnsemble(Mat points, Vec weights);

  static ParticleEnsemble dirac(const Vec& point);
  // Equal weights; draw i uses counter stream i, so the first n particles of a
  // larger ensemble with the same seed coincide with a smaller one.
  static ParticleEnsemble gaussian(const Vec& mean, const Mat& covariance, int samples,
                                   std::uint64_t seed);
  // Tensor grid of cell midpoints, equal weights.
  static ParticleEnsemble uniform_grid(const Vec& lower, const Vec& upper, int points_per_axis);

  static ParticleEnsemble read_csv(std::istream& in);
  static ParticleEnsemble read_csv_file(const std::string& path);
  void write_csv(std::ostream& out) const;

  int dim() const { return static_cast<int>(points_.rows()); }
  int size() const { return static_cast<int>(points_.cols()); }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  Vec point(int i) const { return points_.col(i); }
  double weight(int i) const { return weights_[i]; }

  Provenance provenance() const { return provenance_; }
  const GaussianProvenance& gaussian_spec() const { return gaussian_; }
  const GridProvenance& grid_spec() const { return grid_; }

  Vec mean() const;

 private:
  Mat points_;  // d x n
  Vec weights_;
  Provenance provenance_ = Provenance::Explicit;
  GaussianProvenance gaussian_;
  GridProvenance grid_;
};

std::string_view to_string(ParticleEnsemble::Provenance provenance);

class ErrorPath {
 public:
  ErrorPath(TimeGrid grid, Mat values);

  const TimeGrid& grid() const { return grid_; }
  const Mat& values() const { return values_; }
  Vec at(int k) const { return values_.col(k); }
  double l2_norm() const { return l2_norm_; }

 private:
  TimeGrid grid_;
  Mat values_;
  double l2_norm_;
};

// E[Q](t_k) = Q(t_k) + sum_i w_i xdot(t_k; x0^i, Q). Particle solves run in
// parallel; the weighted sum is reduced in index order.
ErrorPath error_map(const ModelSpec& model, const ParticleEnsemble& m0, const ControlPath& Q);

// Same, also returning every particle trajectory.
ErrorPath error_map(const ModelSpec& model, const ParticleEnsemble& m0, const ControlPath& Q,
                    std::vector<Trajectory>* trajectories);

struct Pairing {
  double inner = 0.0;   // <E1 - E0, Q1 - Q0>
  double gap_sq = 0.0;  // |Q1 - Q0|^2
};

Pairing pairing(const ErrorPath& e1, const ErrorPath& e0, const ControlPath& q1,
                const ControlPath& q0);

}  // namespace mfgc
