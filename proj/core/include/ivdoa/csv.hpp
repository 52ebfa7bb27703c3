#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivdoa {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Event metadata row, TAU-style: onset_s,offset_s,azimuth_deg,elevation_deg
// with azimuth in (-180, 180] and elevation in [-90, 90].
struct EventRow {
  double onset_s = 0.0;
  double offset_s = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

std::vector<EventRow> read_event_csv(const std::string& path);
void write_event_csv(const std::string& path, const std::vector<EventRow>& rows);

// Frame-level estimate row: frame_index,active,azimuth_deg,elevation_deg.
struct FrameRow {
  std::size_t frame_index = 0;
  int active = 0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

std::vector<FrameRow> read_frame_csv(const std::string& path);
void write_frame_csv(const std::string& path, const std::vector<FrameRow>& rows);

}  // namespace ivdoa
