#include "ivdoa/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ivdoa {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CsvError("bad numeric field '" + s + "' in " + context);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open CSV file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<EventRow> read_event_csv(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<EventRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i].find("onset") != std::string::npos) continue;  // header
    const auto f = split(lines[i], ',');
    if (f.size() != 4) throw CsvError("expected 4 columns in " + path + " line " + std::to_string(i + 1));
    EventRow r;
    r.onset_s = parse_double(f[0], path);
    r.offset_s = parse_double(f[1], path);
    r.azimuth_deg = parse_double(f[2], path);
    r.elevation_deg = parse_double(f[3], path);
    if (!(r.onset_s >= 0.0 && r.onset_s < r.offset_s))
      throw CsvError("bad event interval in " + path);
    if (!(r.azimuth_deg > -180.0 - 1e-9 && r.azimuth_deg <= 180.0 + 1e-9 &&
          r.elevation_deg >= -90.0 - 1e-9 && r.elevation_deg <= 90.0 + 1e-9))
      throw CsvError("angles out of range in " + path);
    rows.push_back(r);
  }
  return rows;
}

void write_event_csv(const std::string& path, const std::vector<EventRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CsvError("cannot write CSV file: " + path);
  out << "onset_s,offset_s,azimuth_deg,elevation_deg\n";
  for (const auto& r : rows)
    out << fmt(r.onset_s) << ',' << fmt(r.offset_s) << ',' << fmt(r.azimuth_deg) << ','
        << fmt(r.elevation_deg) << '\n';
}

std::vector<FrameRow> read_frame_csv(const std::string& path) {
  const auto lines = read_lines(path);
  std::vector<FrameRow> rows;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i].find("frame_index") != std::string::npos) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 4) throw CsvError("expected 4 columns in " + path + " line " + std::to_string(i + 1));
    FrameRow r;
    r.frame_index = static_cast<std::size_t>(parse_double(f[0], path));
    r.active = parse_double(f[1], path) != 0.0 ? 1 : 0;
    r.azimuth_deg = parse_double(f[2], path);
    r.elevation_deg = parse_double(f[3], path);
    rows.push_back(r);
  }
  return rows;
}

void write_frame_csv(const std::string& path, const std::vector<FrameRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CsvError("cannot write CSV file: " + path);
  out << "frame_index,active,azimuth_deg,elevation_deg\n";
  for (const auto& r : rows)
    out << r.frame_index << ',' << r.active << ',' << fmt(r.azimuth_deg) << ','
        << fmt(r.elevation_deg) << '\n';
}

}  // namespace ivdoa
