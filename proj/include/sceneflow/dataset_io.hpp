#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "sceneflow/flow.hpp"
#include "sceneflow/geometry.hpp"
#include "sceneflow/metrics.hpp"

namespace sceneflow {

/// On-disk sequence layout: "manifest.txt" ("PCSEQ 1" header, one line per
/// frame: index, timestamp, 12 row-major pose floats, points file, optional
/// gt file) plus per-frame binaries. Points: magic "PCSF", u32 count,
/// count x 3 f32 little-endian. Ground truth: magic "FLGT", u32 count, then
/// per point f32x3 flow, i32 class_id, u8 valid, u8 is_foreground.
/// Coordinates are quantized to f32 on disk; save-load-save is byte-stable.
void save_sequence(const PointCloudSequence& sequence, const std::filesystem::path& directory);
PointCloudSequence load_sequence(const std::filesystem::path& directory);

/// Per-frame flow files "flow_%06d.bin": magic "FLOW", u32 count, 3 f32 per
/// point.
void save_flow_field(const FlowField& flow, const std::filesystem::path& directory);
FlowField load_flow_field(const std::filesystem::path& directory);

/// Plain text, one "timestamp x y z" line per sample.
void save_trajectory(const Trajectory& track, const std::filesystem::path& file);

/// Human-readable report at `path` plus machine-readable "name=value" lines
/// at `path` + ".kv".
void save_metric_report(const MetricReport& report, const std::filesystem::path& path);
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

/// Flat "key=value" config file; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

}  // namespace sceneflow
