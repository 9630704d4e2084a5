#pragma once

// CSV writers for run metrics and field grids. Formatting is pinned: fixed
// header, 9 significant digits, rows ordered by (density, mode, seed,
// iteration), so repeated runs produce byte-identical files.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "vorocover/sim.hpp"

namespace vorocover {

struct MetricsRow {
  std::string density_id;
  std::string mode;
  std::uint64_t seed = 0;
  int iteration = 0;
  double error = 0.0;
  double regret = 0.0;
  long team_cumulative_transfers = 0;
  double mean_per_robot_transfers = 0.0;
  int inner_loop_steps = 0;
  unsigned warn_flags = 0;
};

inline constexpr const char* kMetricsHeader =
    "density_id,mode,seed,iteration,error,regret,team_cumulative_transfers,"
    "mean_per_robot_transfers,inner_loop_steps,warn_flags";

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void sort_metrics(std::vector<MetricsRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.density_id, a.mode, a.seed, a.iteration) <
           std::tie(b.density_id, b.mode, b.seed, b.iteration);
  });
}

inline void write_metrics(std::vector<MetricsRow> rows, const std::string& path) {
  sort_metrics(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_metrics: cannot open '" + path + "'");
  out << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) {
    out << r.density_id << ',' << r.mode << ',' << r.seed << ',' << r.iteration << ','
        << format_double(r.error) << ',' << format_double(r.regret) << ','
        << r.team_cumulative_transfers << ',' << format_double(r.mean_per_robot_transfers) << ','
        << r.inner_loop_steps << ',' << r.warn_flags << "\n";
  }
  if (!out) throw std::runtime_error("write_metrics: write failed for '" + path + "'");
}

inline std::vector<MetricsRow> parse_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("parse_metrics: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_metrics: empty file");
  if (line != kMetricsHeader) throw std::runtime_error("parse_metrics: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) throw std::runtime_error("parse_metrics: malformed row '" + line + "'");
    MetricsRow r;
    r.density_id = fields[0];
    r.mode = fields[1];
    r.seed = std::stoull(fields[2]);
    r.iteration = std::stoi(fields[3]);
    r.error = std::stod(fields[4]);
    r.regret = std::stod(fields[5]);
    r.team_cumulative_transfers = std::stol(fields[6]);
    r.mean_per_robot_transfers = std::stod(fields[7]);
    r.inner_loop_steps = std::stoi(fields[8]);
    r.warn_flags = static_cast<unsigned>(std::stoul(fields[9]));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetricsRow> rows_from_run(const RunMetrics& metrics, const std::string& density_id,
                                             RunMode mode, std::uint64_t seed) {
  std::vector<MetricsRow> rows;
  rows.reserve(metrics.per_iteration.size());
  for (const IterationMetrics& it : metrics.per_iteration) {
    MetricsRow r;
    r.density_id = density_id;
    r.mode = mode_name(mode);
    r.seed = seed;
    r.iteration = it.iteration;
    r.error = it.error;
    r.regret = it.regret;
    r.team_cumulative_transfers = it.team_cumulative_transfers;
    r.mean_per_robot_transfers = it.mean_per_robot_transfers;
    r.inner_loop_steps = it.inner_loop_steps;
    r.warn_flags = it.warn_flags;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace io_detail {

inline void write_field(const ScalarField2D& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_fields: cannot open '" + path + "'");
  out << "x,y,value\n";
  const ConvexDomain& d = *field.domain;
  for (int id : d.interior_ids()) {
    const Point2 p = d.lattice_point(id);
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(field.values[id])
        << "\n";
  }
  if (!out) throw std::runtime_error("export_fields: write failed for '" + path + "'");
}

}  // namespace io_detail

// Grid tables for external plotting: the true density, each robot's final
// estimate and the composed estimate.
inline void export_fields(const RunResult& result, const std::string& directory) {
  std::filesystem::create_directories(directory);
  io_detail::write_field(result.true_field, directory + "/true_density.csv");
  io_detail::write_field(result.composite, directory + "/composite.csv");
  for (const RobotState& robot : result.robots)
    io_detail::write_field(robot.estimate, directory + "/robot_" + std::to_string(robot.id) + ".csv");
}

}  // namespace vorocover
