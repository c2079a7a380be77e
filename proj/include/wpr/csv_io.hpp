#ifndef WPR_CSV_IO_HPP_
#define WPR_CSV_IO_HPP_

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "wpr/waypoint_env.hpp"

namespace wpr {

/// Shortest decimal text that parses back to the identical double.
std::string format_number(double value);
double parse_number(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws if absent.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Header t,x,y,v,psi; t is the waypoint time in seconds after the start state.
void write_trajectory_csv(std::ostream& out, const TargetTrajectory& trajectory);
void write_trajectory_csv(const std::filesystem::path& path, const TargetTrajectory& trajectory);
TargetTrajectory read_trajectory_csv(const std::filesystem::path& path);
TargetTrajectory parse_trajectory_csv(std::istream& in);

/// Header t,x,y,yaw,v_lon,gear,steer_cmd,pedal_cmd,reward,d; one row per step.
void write_trace_csv(std::ostream& out, const EpisodeTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const EpisodeTrace& trace);

/// Opens a file for writing, creating parent directories; throws on failure.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace wpr

#endif  // WPR_CSV_IO_HPP_
