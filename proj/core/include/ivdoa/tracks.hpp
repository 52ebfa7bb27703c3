#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ivdoa {

// Per-frame direction estimates or labels, angles in radians,
// 20 ms frame period by default.
struct DoaTrack {
  std::vector<double> azimuth;
  std::vector<double> elevation;
  std::vector<std::uint8_t> degenerate;
  double frame_period_s = 0.02;

  std::size_t size() const { return azimuth.size(); }
};

// Activity per frame: ground truth holds {0,1}, predictions hold [0,1].
struct ActivityTrack {
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
};

// Frame interval, onset inclusive, offset exclusive.
struct EventSegment {
  std::size_t begin = 0;
  std::size_t end = 0;
};

}  // namespace ivdoa
