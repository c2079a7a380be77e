#include "wpr/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wpr {

std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (result.ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buffer, result.ptr);
}

double parse_number(std::string_view text) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::invalid_argument("CSV is missing column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::invalid_argument("CSV row has " + std::to_string(fields.size()) +
                                  " fields, header has " +
                                  std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (first) throw std::invalid_argument("CSV is empty");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_csv(in);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_trajectory_csv(std::ostream& out, const TargetTrajectory& trajectory) {
  out << "t,x,y,v,psi\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Waypoint& w = trajectory.waypoints[i];
    out << format_number(static_cast<double>(i + 1) / trajectory.rate_hz) << ','
        << format_number(w.x) << ',' << format_number(w.y) << ',' << format_number(w.v) << ','
        << format_number(w.psi) << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const TargetTrajectory& trajectory) {
  auto out = open_output(path);
  write_trajectory_csv(out, trajectory);
}

TargetTrajectory parse_trajectory_csv(std::istream& in) {
  const CsvTable table = parse_csv(in);
  const auto ct = table.column("t");
  const auto cx = table.column("x");
  const auto cy = table.column("y");
  const auto cv = table.column("v");
  const auto cp = table.column("psi");
  TargetTrajectory trajectory;
  std::vector<double> times;
  for (const auto& row : table.rows) {
    times.push_back(parse_number(row[ct]));
    trajectory.waypoints.push_back({parse_number(row[cx]), parse_number(row[cy]),
                                    parse_number(row[cv]), parse_number(row[cp])});
  }
  if (times.size() < 2) throw std::invalid_argument("trajectory CSV needs at least 2 rows");
  const double spacing = times[1] - times[0];
  if (!(spacing > 0.0)) throw std::invalid_argument("trajectory CSV times must increase");
  double rate = 1.0 / spacing;
  // Times are written as (i + 1) / rate, so integral rates come back exactly.
  if (std::abs(rate - std::round(rate)) < 1e-6) rate = std::round(rate);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) * rate - 1.0) > 1e-6) {
      throw std::invalid_argument("trajectory CSV is not uniformly sampled");
    }
  }
  trajectory.rate_hz = rate;
  trajectory.validate();
  return trajectory;
}

TargetTrajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_trajectory_csv(in);
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  out << "t,x,y,yaw,v_lon,gear,steer_cmd,pedal_cmd,reward,d\n";
  for (std::size_t i = 0; i < trace.actions.size(); ++i) {
    const VehicleState& s = trace.states[i + 1];
    out << (i + 1) << ',' << format_number(s.x) << ',' << format_number(s.y) << ','
        << format_number(s.yaw) << ',' << format_number(s.v_lon) << ',' << s.gear << ','
        << format_number(trace.actions[i].steer_cmd()) << ','
        << format_number(trace.actions[i].pedal_cmd()) << ','
        << format_number(trace.rewards[i]) << ',' << format_number(trace.distances[i]) << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const EpisodeTrace& trace) {
  auto out = open_output(path);
  write_trace_csv(out, trace);
}

}  // namespace wpr
