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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scanba/ba_solver.hpp"
#include "scanba/mapgrid.hpp"
#include "scanba/metrics.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

// File formats are documented in formats.md at the repository root. All
// writers are deterministic: write(read(f)) reproduces f byte for byte.

namespace scanba::io {

/// Shortest round-trip decimal rendering of a double (std::to_chars).
std::string format_double(double v);

/// FNV-1a 64-bit content hash as a 16-digit hex string.
std::string fnv1a_hex(const void* data, std::size_t size);
std::string file_hash(const std::filesystem::path& path);

// Trajectory: CSV with header "timestamp_s,x_m,y_m,theta_rad"; poses are
// sensor-to-world. The same format holds relative odometry increments.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& path);

// Scan: <stem>.json sidecar + <stem>.bin of height*width little-endian
// float32, row-major (v-major then u).
struct ScanRecord {
  Scan scan;
  Pose2 pose_hint;
};
void write_scan(const std::filesystem::path& stem, const ScanRecord& rec);
ScanRecord read_scan(const std::filesystem::path& stem);
/// Sorted scan stems ("<dir>/<name>" without extension) found in a directory.
std::vector<std::filesystem::path> list_scan_stems(const std::filesystem::path& dir);

// Map: <stem>.json header + <stem>.bin holding the float32 intensity grid,
// float32 weight grid, and uint32 count grid, in that order.
void write_map(const std::filesystem::path& stem, const GridMap& map);
GridMap read_map(const std::filesystem::path& stem);

/// 16-bit grayscale PGM of the intensity grid plus an 8-bit PGM sidecar mask
/// (255 = observed). Unobserved cells are written as 0.
void export_map_image(const std::filesystem::path& stem, const GridMap& map);

std::string report_to_json(const ConvergenceReport& report);
std::string metric_report_to_json(const MetricReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace scanba::io
