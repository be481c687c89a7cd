#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridloc/pose.hpp"
#include "gridloc/sim.hpp"

namespace gridloc {

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

[[nodiscard]] inline std::vector<double> parse_row(const std::string& line,
                                                   std::size_t want,
                                                   std::size_t line_no,
                                                   const std::string& what) {
  std::vector<double> out;
  out.reserve(want);
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t comma = line.find(',', pos);
    const std::string tok =
        line.substr(pos, comma == std::string::npos ? comma : comma - pos);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) {
      throw std::runtime_error(what + ": malformed number at line " +
                               std::to_string(line_no));
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.size() != want) {
    throw std::runtime_error(what + ": expected " + std::to_string(want) +
                             " columns at line " + std::to_string(line_no));
  }
  return out;
}

}  // namespace detail

/// Rows: t,x,y,refl,laser,incidence,range. Incidence and range are those of
/// the emitting laser. Scans are delimited by changes of t.
inline void write_scans_csv(const std::string& path,
                            const std::vector<Scan>& scans,
                            const std::vector<LaserModel>& lasers) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,x,y,refl,laser,incidence,range\n";
  std::string row;
  for (const Scan& s : scans) {
    for (const Return& r : s.returns) {
      row.clear();
      detail::append_double(row, s.t);
      row += ',';
      detail::append_double(row, r.x);
      row += ',';
      detail::append_double(row, r.y);
      row += ',';
      row += std::to_string(static_cast<long>(r.reflectivity));
      row += ',';
      row += std::to_string(r.laser);
      row += ',';
      detail::append_double(row, lasers[r.laser].incidence);
      row += ',';
      detail::append_double(row, lasers[r.laser].range);
      row += '\n';
      out << row;
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

[[nodiscard]] inline std::vector<Scan> read_scans_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scan file: " + path);
  std::vector<Scan> scans;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;  // header
    }
    const auto row = detail::parse_row(line, 7, line_no, "scan csv");
    if (scans.empty() || scans.back().t != row[0]) {
      scans.push_back(Scan{row[0], {}});
    }
    scans.back().returns.push_back(
        Return{row[1], row[2], static_cast<float>(row[3]),
               static_cast<std::uint16_t>(row[4])});
  }
  return scans;
}

/// Rows: t,x,y,h,odo_dx,odo_dy,odo_dh. The odometry columns hold the noisy
/// body-frame increment from the previous row (zeros on the first row).
inline void write_trajectory_csv(const std::string& path,
                                 const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,x,y,h,odo_dx,odo_dy,odo_dh\n";
  std::string row;
  for (const TimedPose& p : traj) {
    row.clear();
    detail::append_double(row, p.t);
    for (const double v : {p.pose.x, p.pose.y, p.pose.h, p.odo.dx, p.odo.dy,
                           p.odo.dh}) {
      row += ',';
      detail::append_double(row, v);
    }
    row += '\n';
    out << row;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

[[nodiscard]] inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;
    }
    const auto row = detail::parse_row(line, 7, line_no, "trajectory csv");
    traj.push_back(TimedPose{row[0], Pose2{row[1], row[2], row[3]},
                             Twist2{row[4], row[5], row[6]}});
  }
  return traj;
}

/// One localization step of output: truth, estimate, body-frame errors, and
/// the registration diagnostics that produced the update.
struct DiagnosticsRow {
  double t = 0.0;
  Pose2 truth{};
  Pose2 est{};
  double err_lon = 0.0;
  double err_lat = 0.0;
  double err_h = 0.0;
  double nmi = 0.0;
  double overlap = 0.0;
  bool coasted = false;
};

inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<DiagnosticsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,truth_x,truth_y,truth_h,est_x,est_y,est_h,err_lon,err_lat,err_h,"
         "nmi,overlap,coasted\n";
  std::string row;
  for (const DiagnosticsRow& d : rows) {
    row.clear();
    detail::append_double(row, d.t);
    for (const double v :
         {d.truth.x, d.truth.y, d.truth.h, d.est.x, d.est.y, d.est.h,
          d.err_lon, d.err_lat, d.err_h, d.nmi, d.overlap}) {
      row += ',';
      detail::append_double(row, v);
    }
    row += ',';
    row += d.coasted ? '1' : '0';
    row += '\n';
    out << row;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

[[nodiscard]] inline std::vector<DiagnosticsRow> read_diagnostics_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open diagnostics file: " + path);
  std::vector<DiagnosticsRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;
    }
    const auto row = detail::parse_row(line, 13, line_no, "diagnostics csv");
    DiagnosticsRow d;
    d.t = row[0];
    d.truth = Pose2{row[1], row[2], row[3]};
    d.est = Pose2{row[4], row[5], row[6]};
    d.err_lon = row[7];
    d.err_lat = row[8];
    d.err_h = row[9];
    d.nmi = row[10];
    d.overlap = row[11];
    d.coasted = row[12] != 0.0;
    rows.push_back(d);
  }
  return rows;
}

}  // namespace gridloc
