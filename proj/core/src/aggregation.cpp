#include "mfgc/aggregation.hpp"

#include "mfgc/counter_rng.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/parallel.hpp"
#include "mfgc/serialize.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mfgc {
namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_number(const std::string& text, int line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && *begin == ' ') ++begin;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    std::ostringstream os;
    os << "ensemble CSV line " << line << ": not a number: '" << text << "'";
    throw Error(ErrorKind::Io, os.str());
  }
  return value;
}

}  // namespace

std::string_view to_string(ParticleEnsemble::Provenance provenance) {
  switch (provenance) {
    case ParticleEnsemble::Provenance::Explicit: return "explicit";
    case ParticleEnsemble::Provenance::Gaussian: return "gaussian";
    case ParticleEnsemble::Provenance::Grid: return "grid";
  }
  return "explicit";
}

ParticleEnsemble::ParticleEnsemble(Mat points, Vec weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.cols() == 0 || points_.rows() == 0) {
    throw invalid_argument("ensemble needs at least one particle of positive dimension");
  }
  if (weights_.size() != points_.cols()) {
    throw invalid_argument("ensemble: one weight per particle required");
  }
  if (!points_.allFinite()) throw invalid_argument("ensemble points must be finite");
  if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
    throw invalid_argument("ensemble weights must be finite and nonnegative");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "ensemble weights must sum to 1 (got " << total << ")";
    throw invalid_argument(os.str());
  }
}

ParticleEnsemble ParticleEnsemble::dirac(const Vec& point) {
  return ParticleEnsemble(Mat(point), Vec::Ones(1));
}

ParticleEnsemble ParticleEnsemble::gaussian(const Vec& mean, const Mat& covariance, int samples,
                                            std::uint64_t seed) {
  const int d = static_cast<int>(mean.size());
  if (samples <= 0) throw invalid_argument("gaussian ensemble: samples must be positive");
  if (covariance.rows() != d || covariance.cols() != d) {
    throw invalid_argument("gaussian ensemble: covariance must be d x d");
  }
  // Symmetric square root tolerates singular (PSD) covariances.
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (covariance + covariance.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    throw invalid_argument("gaussian ensemble: covariance must be positive semidefinite");
  }
  const Mat root = es.eigenvectors() *
                   es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                   es.eigenvectors().transpose();
  const CounterRng rng(seed);
  Mat points(d, samples);
  for (int i = 0; i < samples; ++i) {
    Vec z(d);
    for (int j = 0; j < d; ++j) z[j] = rng.normal(static_cast<std::uint64_t>(i), j);
    points.col(i) = mean + root * z;
  }
  ParticleEnsemble out(std::move(points), Vec::Constant(samples, 1.0 / samples));
  // Equal weights 1/n can miss 1 by an ulp or two per particle.
  out.weights_ /= out.weights_.sum();
  out.provenance_ = Provenance::Gaussian;
  out.gaussian_ = {mean, covariance, samples, seed};
  return out;
}

ParticleEnsemble ParticleEnsemble::uniform_grid(const Vec& lower, const Vec& upper,
                                                int points_per_axis) {
  const int d = static_cast<int>(lower.size());
  if (upper.size() != d || points_per_axis <= 0) {
    throw invalid_argument("grid ensemble: bounds must match and points_per_axis > 0");
  }
  if ((upper.array() < lower.array()).any()) {
    throw invalid_argument("grid ensemble: upper bound below lower bound");
  }
  long total = 1;
  for (int j = 0; j < d; ++j) {
    total *= points_per_axis;
    if (total > 10'000'000) throw invalid_argument("grid ensemble: too many points");
  }
  Mat points(d, total);
  for (long i = 0; i < total; ++i) {
    long rest = i;
    for (int j = 0; j < d; ++j) {
      const long idx = rest % points_per_axis;
      rest /= points_per_axis;
      points(j, i) = lower[j] + (upper[j] - lower[j]) * (idx + 0.5) / points_per_axis;
    }
  }
  ParticleEnsemble out(std::move(points), Vec::Constant(total, 1.0 / static_cast<double>(total)));
  out.weights_ /= out.weights_.sum();
  out.provenance_ = Provenance::Grid;
  out.grid_ = {lower, upper, points_per_axis};
  return out;
}

ParticleEnsemble ParticleEnsemble::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "ensemble CSV is empty");
  const auto header = split_csv_line(line);
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1 || header.back() != "weight") {
    throw Error(ErrorKind::Io, "ensemble CSV header must be x_1,...,x_d,weight");
  }
  for (int j = 0; j < d; ++j) {
    if (header[j] != "x_" + std::to_string(j + 1)) {
      throw Error(ErrorKind::Io, "ensemble CSV header must be x_1,...,x_d,weight");
    }
  }
  std::vector<Vec> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != d + 1) {
      throw Error(ErrorKind::Io, "ensemble CSV line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(d + 1) + " fields");
    }
    Vec row(d + 1);
    for (int j = 0; j <= d; ++j) row[j] = parse_number(fields[j], line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Io, "ensemble CSV has no particles");
  Mat points(d, rows.size());
  Vec weights(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    points.col(i) = rows[i].head(d);
    weights[i] = rows[i][d];
  }
  return ParticleEnsemble(std::move(points), std::move(weights));
}

ParticleEnsemble ParticleEnsemble::read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open ensemble file " + path);
  return read_csv(in);
}

void ParticleEnsemble::write_csv(std::ostream& out) const {
  for (int j = 0; j < dim(); ++j) out << "x_" << (j + 1) << ',';
  out << "weight\r\n";
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < dim(); ++j) out << format_double(points_(j, i)) << ',';
    out << format_double(weights_[i]) << "\r\n";
  }
}

Vec ParticleEnsemble::mean() const { return points_ * weights_; }

ErrorPath::ErrorPath(TimeGrid grid, Mat values)
    : grid_(grid), values_(std::move(values)), l2_norm_(mfgc::l2_norm(grid_, values_)) {
  if (values_.cols() != grid_.nodes()) {
    throw Error(ErrorKind::GridMismatch, "error path: node count does not match grid");
  }
}

ErrorPath error_map(const ModelSpec& model, const ParticleEnsemble& m0, const ControlPath& Q) {
  return error_map(model, m0, Q, nullptr);
}

ErrorPath error_map(const ModelSpec& model, const ParticleEnsemble& m0, const ControlPath& Q,
                    std::vector<Trajectory>* trajectories) {
  if (m0.dim() != model.dim() || Q.dim() != model.dim()) {
    throw invalid_argument("error_map: dimension mismatch between model, m0 and Q");
  }
  std::vector<Trajectory> solved(m0.size());
  parallel_for(m0.size(), [&](std::size_t i) {
    try {
      solved[i] = solve_el(model, m0.point(static_cast<int>(i)), Q);
    } catch (const Error& e) {
      throw e.with_context("particle " + std::to_string(i) + ": ");
    }
  });
  Mat values = Q.values();
  for (int i = 0; i < m0.size(); ++i) values += m0.weight(i) * solved[i].xdot;
  if (trajectories) *trajectories = std::move(solved);
  return ErrorPath(Q.grid(), std::move(values));
}

Pairing pairing(const ErrorPath& e1, const ErrorPath& e0, const ControlPath& q1,
                const ControlPath& q0) {
  const auto& grid = e1.grid();
  if (!(e0.grid() == grid) || !(q1.grid() == grid) || !(q0.grid() == grid)) {
    throw Error(ErrorKind::GridMismatch, "pairing: all paths must share one grid");
  }
  const Mat dq = q1.values() - q0.values();
  return {l2_inner(grid, e1.values() - e0.values(), dq), l2_inner(grid, dq, dq)};
}

}  // namespace mfgc
