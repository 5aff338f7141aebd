// Copyright 2026, the scanba authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scanba/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts unsupported");

namespace scanba::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc()) throw std::runtime_error("bad number: " + std::string(s));
  return v;
}

template <typename T>
void write_raw(std::ostream& out, const std::vector<T>& data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
}

template <typename T>
void read_raw(std::istream& in, std::vector<T>& data) {
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (!in) throw std::runtime_error("truncated binary payload");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fnv1a_hex(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  return fnv1a_hex(bytes.data(), bytes.size());
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "timestamp_s,x_m,y_m,theta_rad\n";
  for (const StampedPose& s : traj) {
    out << format_double(s.timestamp_s) << ',' << format_double(s.pose.x) << ','
        << format_double(s.pose.y) << ',' << format_double(s.pose.theta) << '\n';
  }
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file: " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<std::string_view, 4> fields;
    std::string_view rest = line;
    for (int i = 0; i < 4; ++i) {
      const std::size_t comma = rest.find(',');
      if (i < 3 && comma == std::string_view::npos) {
        throw std::runtime_error("malformed trajectory row: " + line);
      }
      fields[i] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    StampedPose s;
    s.timestamp_s = parse_double(fields[0]);
    s.pose.x = parse_double(fields[1]);
    s.pose.y = parse_double(fields[2]);
    s.pose.theta = parse_double(fields[3]);
    traj.push_back(s);
  }
  return traj;
}

void write_scan(const std::filesystem::path& stem, const ScanRecord& rec) {
  json j;
  j["id"] = rec.scan.id;
  j["timestamp_s"] = rec.scan.timestamp_s;
  j["width"] = rec.scan.width;
  j["height"] = rec.scan.height;
  j["resolution_m"] = rec.scan.resolution_m;
  j["pose_hint"] = {rec.pose_hint.x, rec.pose_hint.y, rec.pose_hint.theta};
  write_text(stem.string() + ".json", j.dump(2) + "\n");

  auto bin = open_out(stem.string() + ".bin", std::ios::out | std::ios::binary);
  write_raw(bin, rec.scan.pixels);
}

ScanRecord read_scan(const std::filesystem::path& stem) {
  const json j = json::parse(read_text(stem.string() + ".json"));
  ScanRecord rec;
  rec.scan.id = j.at("id").get<int>();
  rec.scan.timestamp_s = j.at("timestamp_s").get<double>();
  rec.scan.width = j.at("width").get<int>();
  rec.scan.height = j.at("height").get<int>();
  rec.scan.resolution_m = j.at("resolution_m").get<double>();
  const auto& hint = j.at("pose_hint");
  rec.pose_hint = {hint.at(2).get<double>(), hint.at(0).get<double>(), hint.at(1).get<double>()};
  if (rec.scan.width < 2 || rec.scan.height < 2) {
    throw std::runtime_error("scan smaller than 2x2: " + stem.string());
  }
  rec.scan.pixels.assign(static_cast<std::size_t>(rec.scan.width) * rec.scan.height, 0.0f);
  auto bin = open_in(stem.string() + ".bin", std::ios::in | std::ios::binary);
  read_raw(bin, rec.scan.pixels);
  return rec;
}

std::vector<std::filesystem::path> list_scan_stems(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> stems;
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    std::filesystem::path stem = entry.path();
    stem.replace_extension();
    if (std::filesystem::exists(stem.string() + ".bin")) stems.push_back(stem);
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

void write_map(const std::filesystem::path& stem, const GridMap& map) {
  json j;
  j["origin_m"] = {map.origin_m.x(), map.origin_m.y()};
  j["resolution_m"] = map.resolution_m;
  j["cols"] = map.cols;
  j["rows"] = map.rows;
  write_text(stem.string() + ".json", j.dump(2) + "\n");

  std::vector<float> intensity(map.size()), weight(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    intensity[i] = static_cast<float>(map.intensity[i]);
    weight[i] = static_cast<float>(map.weight_sum[i]);
  }
  auto bin = open_out(stem.string() + ".bin", std::ios::out | std::ios::binary);
  write_raw(bin, intensity);
  write_raw(bin, weight);
  write_raw(bin, map.count);
}

GridMap read_map(const std::filesystem::path& stem) {
  const json j = json::parse(read_text(stem.string() + ".json"));
  GridMap map;
  map.origin_m = {j.at("origin_m").at(0).get<double>(), j.at("origin_m").at(1).get<double>()};
  map.resolution_m = j.at("resolution_m").get<double>();
  map.cols = j.at("cols").get<int>();
  map.rows = j.at("rows").get<int>();

  std::vector<float> intensity(map.size()), weight(map.size());
  map.count.assign(map.size(), 0);
  auto bin = open_in(stem.string() + ".bin", std::ios::in | std::ios::binary);
  read_raw(bin, intensity);
  read_raw(bin, weight);
  read_raw(bin, map.count);
  map.intensity.assign(intensity.begin(), intensity.end());
  map.weight_sum.assign(weight.begin(), weight.end());
  return map;
}

void export_map_image(const std::filesystem::path& stem, const GridMap& map) {
  // 16-bit grayscale PGM (big-endian samples per the format) plus an 8-bit
  // observed-cell mask.
  {
    auto out = open_out(stem.string() + ".pgm", std::ios::out | std::ios::binary);
    out << "P5\n" << map.cols << " " << map.rows << "\n65535\n";
    for (int row = map.rows - 1; row >= 0; --row) {  // north-up image
      for (int col = 0; col < map.cols; ++col) {
        const std::size_t i = map.index(col, row);
        const double v = map.count[i] > 0 ? std::clamp(map.intensity[i], 0.0, 1.0) : 0.0;
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        out.write(bytes, 2);
      }
    }
  }
  {
    auto out = open_out(stem.string() + "_mask.pgm", std::ios::out | std::ios::binary);
    out << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    for (int row = map.rows - 1; row >= 0; --row) {
      for (int col = 0; col < map.cols; ++col) {
        const char b = map.count[map.index(col, row)] > 0 ? static_cast<char>(255) : 0;
        out.write(&b, 1);
      }
    }
  }
}

std::string report_to_json(const ConvergenceReport& report) {
  json j;
  j["iterations"] = report.iterations;
  j["costs"] = report.costs;
  j["update_norms"] = report.update_norms;
  j["h_nnz"] = report.h_nnz;
  j["wall_time_s"] = report.wall_time_s;
  j["converged"] = report.converged;
  j["message"] = report.message;
  return j.dump(2) + "\n";
}

std::string metric_report_to_json(const MetricReport& report) {
  json j;
  j["ate_m"] = report.ate_m;
  j["epe_m"] = report.epe_m;
  if (report.self_consistency) {
    j["self_consistency"] = {{"translation_m", report.self_consistency->translation_m},
                             {"rotation_deg", report.self_consistency->rotation_deg},
                             {"pairs", report.self_consistency->pairs}};
  } else {
    j["self_consistency"] = nullptr;
  }
  if (report.loc_rpe) {
    j["loc_rpe"] = {{"longitudinal_m", report.loc_rpe->longitudinal_m},
                    {"lateral_m", report.loc_rpe->lateral_m},
                    {"yaw_deg", report.loc_rpe->yaw_deg},
                    {"pairs", report.loc_rpe->pairs}};
  } else {
    j["loc_rpe"] = nullptr;
  }
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace scanba::io
