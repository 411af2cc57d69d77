#include "mfgc/serialize.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace mfgc {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  std::string text(buf, res.ptr);
  // Prefer the shortest round-trip form when it is shorter.
  char shortest[32];
  const auto r2 = std::to_chars(shortest, shortest + sizeof shortest, value);
  std::string alt(shortest, r2.ptr);
  return alt.size() < text.size() ? alt : text;
}

void write_path_csv(std::ostream& out, const ControlPath& path, const std::string& prefix) {
  out << "t";
  for (int i = 0; i < path.dim(); ++i) out << ',' << prefix << '_' << (i + 1);
  out << "\r\n";
  const auto& grid = path.grid();
  for (int k = 0; k < grid.nodes(); ++k) {
    out << format_double(grid.node(k));
    for (int i = 0; i < path.dim(); ++i) out << ',' << format_double(path.values()(i, k));
    out << "\r\n";
  }
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const TimeGrid& grid) {
  const int d = static_cast<int>(traj.x.rows());
  out << "t";
  for (const char* name : {"x", "xdot", "p"}) {
    for (int i = 0; i < d; ++i) out << ',' << name << '_' << (i + 1);
  }
  out << "\r\n";
  for (int k = 0; k < grid.nodes(); ++k) {
    out << format_double(grid.node(k));
    for (const Mat* m : {&traj.x, &traj.xdot, &traj.p}) {
      for (int i = 0; i < d; ++i) out << ',' << format_double((*m)(i, k));
    }
    out << "\r\n";
  }
}

nlohmann::json to_json(const Vec& v) {
  auto out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json to_json(const Mat& m) {
  auto out = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) out.push_back(to_json(Vec(m.row(r).transpose())));
  return out;
}

nlohmann::json to_json(const ControlPath& path) {
  nlohmann::json out;
  out["horizon"] = path.grid().horizon();
  out["steps"] = path.grid().steps();
  out["values"] = to_json(Mat(path.values().transpose()));
  return out;
}

nlohmann::json to_json(const ParticleEnsemble& ensemble) {
  nlohmann::json out;
  out["provenance"] = std::string(to_string(ensemble.provenance()));
  out["points"] = to_json(Mat(ensemble.points().transpose()));
  out["weights"] = to_json(ensemble.weights());
  return out;
}

}  // namespace mfgc
