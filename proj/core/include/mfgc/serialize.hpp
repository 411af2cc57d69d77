#pragma once

#include "mfgc/aggregation.hpp"
#include "mfgc/paths.hpp"
#include "mfgc/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace mfgc {

// Shortest text that reads back to the same double, at most 17 significant
// digits, locale independent.
std::string format_double(double value);

// RFC-4180 with CRLF row terminators.
void write_path_csv(std::ostream& out, const ControlPath& path, const std::string& prefix);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const TimeGrid& grid);

nlohmann::json to_json(const Vec& v);
nlohmann::json to_json(const Mat& m);  // list of rows
nlohmann::json to_json(const ControlPath& path);
nlohmann::json to_json(const ParticleEnsemble& ensemble);

}  // namespace mfgc
