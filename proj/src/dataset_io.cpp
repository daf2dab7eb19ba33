#include "sceneflow/dataset_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"

namespace sceneflow {

namespace fs = std::filesystem;

namespace {

constexpr char kPointsMagic[5] = "PCSF";
constexpr char kGtMagic[5] = "FLGT";
constexpr char kFlowMagic[5] = "FLOW";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string frame_file_name(std::size_t index, const char* ext) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.%s", index, ext);
  return buf;
}

void save_points(const PointCloud& cloud, const fs::path& path) {
  auto os = detail::open_output(path);
  detail::write_magic(os, kPointsMagic);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  for (const auto& p : cloud.points) {
    detail::write_le<float>(os, static_cast<float>(p.x));
    detail::write_le<float>(os, static_cast<float>(p.y));
    detail::write_le<float>(os, static_cast<float>(p.z));
  }
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

PointCloud load_points(const fs::path& path) {
  auto is = detail::open_input(path);
  detail::expect_magic(is, kPointsMagic, path.string());
  const auto count = detail::read_le<std::uint32_t>(is, "point count");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const double x = detail::read_le<float>(is, "point x");
    const double y = detail::read_le<float>(is, "point y");
    const double z = detail::read_le<float>(is, "point z");
    cloud.points.push_back({x, y, z});
  }
  return cloud;
}

void save_gt(const GroundTruth& gt, const fs::path& path) {
  auto os = detail::open_output(path);
  detail::write_magic(os, kGtMagic);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(gt.size()));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    detail::write_le<float>(os, static_cast<float>(gt.flow[i].x));
    detail::write_le<float>(os, static_cast<float>(gt.flow[i].y));
    detail::write_le<float>(os, static_cast<float>(gt.flow[i].z));
    detail::write_le<std::int32_t>(os, gt.class_id[i]);
    detail::write_le<std::uint8_t>(os, gt.valid[i]);
    detail::write_le<std::uint8_t>(os, gt.is_foreground[i]);
  }
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

GroundTruth load_gt(const fs::path& path, std::size_t expected_count) {
  auto is = detail::open_input(path);
  detail::expect_magic(is, kGtMagic, path.string());
  const auto count = detail::read_le<std::uint32_t>(is, "gt count");
  if (count != expected_count)
    throw DataError("'" + path.string() + "': gt count " + std::to_string(count) +
                    " does not match point count " + std::to_string(expected_count));
  GroundTruth gt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const double x = detail::read_le<float>(is, "flow x");
    const double y = detail::read_le<float>(is, "flow y");
    const double z = detail::read_le<float>(is, "flow z");
    gt.flow.push_back({x, y, z});
    gt.class_id.push_back(detail::read_le<std::int32_t>(is, "class_id"));
    gt.valid.push_back(detail::read_le<std::uint8_t>(is, "valid"));
    gt.is_foreground.push_back(detail::read_le<std::uint8_t>(is, "is_foreground"));
  }
  return gt;
}

}  // namespace

void save_sequence(const PointCloudSequence& sequence, const fs::path& directory) {
  sequence.validate();
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw DataError("cannot create directory '" + directory.string() + "'");

  std::ofstream manifest(directory / "manifest.txt", std::ios::trunc);
  if (!manifest) throw DataError("cannot write '" + (directory / "manifest.txt").string() + "'");
  manifest << "PCSEQ 1\n";
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    const Frame& f = sequence.frames[t];
    const std::string points_file = frame_file_name(t, "pcsf");
    save_points(f.cloud, directory / points_file);
    manifest << t << ' ' << format_double(f.timestamp);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) manifest << ' ' << format_double(f.ego_pose.rotation(r, c));
    for (int c = 0; c < 3; ++c) manifest << ' ' << format_double(f.ego_pose.translation(c));
    manifest << ' ' << points_file;
    if (f.gt) {
      const std::string gt_file = frame_file_name(t, "flgt");
      save_gt(*f.gt, directory / gt_file);
      manifest << ' ' << gt_file;
    }
    manifest << '\n';
  }
  if (!manifest) throw DataError("failed writing manifest in '" + directory.string() + "'");
}

PointCloudSequence load_sequence(const fs::path& directory) {
  const fs::path manifest_path = directory / "manifest.txt";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw DataError("cannot open '" + manifest_path.string() + "'");

  std::string header;
  if (!std::getline(manifest, header) || header != "PCSEQ 1")
    throw DataError("'" + manifest_path.string() + "': bad header '" + header + "'");

  PointCloudSequence sequence;
  sequence.name = directory.filename().string();
  std::string line;
  std::size_t expected_index = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t index;
    Frame frame;
    std::string points_file, gt_file;
    ss >> index >> frame.timestamp;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) ss >> frame.ego_pose.rotation(r, c);
    for (int c = 0; c < 3; ++c) ss >> frame.ego_pose.translation(c);
    ss >> points_file;
    ss >> gt_file;  // optional
    if (!points_file.size() || (!ss && points_file.empty()))
      throw DataError("'" + manifest_path.string() + "': malformed frame line '" + line + "'");
    if (index != expected_index)
      throw DataError("'" + manifest_path.string() + "': frame indices not contiguous at " +
                      std::to_string(index));
    if (!frame.ego_pose.valid())
      throw DataError("'" + manifest_path.string() + "': invalid pose at frame " +
                      std::to_string(index));
    frame.cloud = load_points(directory / points_file);
    if (!gt_file.empty()) frame.gt = load_gt(directory / gt_file, frame.cloud.size());
    sequence.frames.push_back(std::move(frame));
    ++expected_index;
  }
  sequence.validate();
  return sequence;
}

void save_flow_field(const FlowField& flow, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw DataError("cannot create directory '" + directory.string() + "'");
  for (std::size_t t = 0; t < flow.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "flow_%06zu.bin", t);
    auto os = detail::open_output(directory / name);
    detail::write_magic(os, kFlowMagic);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(flow.frames[t].size()));
    for (const auto& v : flow.frames[t]) {
      detail::write_le<float>(os, static_cast<float>(v.x));
      detail::write_le<float>(os, static_cast<float>(v.y));
      detail::write_le<float>(os, static_cast<float>(v.z));
    }
    if (!os) throw DataError(std::string("failed writing '") + name + "'");
  }
}

FlowField load_flow_field(const fs::path& directory) {
  FlowField flow;
  for (std::size_t t = 0;; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "flow_%06zu.bin", t);
    const fs::path path = directory / name;
    if (!fs::exists(path)) break;
    auto is = detail::open_input(path);
    detail::expect_magic(is, kFlowMagic, path.string());
    const auto count = detail::read_le<std::uint32_t>(is, "flow count");
    std::vector<Point3> vectors;
    vectors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const double x = detail::read_le<float>(is, "flow x");
      const double y = detail::read_le<float>(is, "flow y");
      const double z = detail::read_le<float>(is, "flow z");
      vectors.push_back({x, y, z});
    }
    flow.frames.push_back(std::move(vectors));
  }
  if (flow.frames.empty())
    throw DataError("no flow files (flow_000000.bin ...) in '" + directory.string() + "'");
  return flow;
}

void save_trajectory(const Trajectory& track, const fs::path& file) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw DataError("cannot write '" + file.string() + "'");
  for (const auto& s : track.samples)
    os << format_double(s.timestamp) << ' ' << format_double(s.position.x) << ' '
       << format_double(s.position.y) << ' ' << format_double(s.position.z) << '\n';
  if (!os) throw DataError("failed writing '" + file.string() + "'");
}

void save_metric_report(const MetricReport& report, const fs::path& path) {
  std::ofstream human(path, std::ios::trunc);
  std::ofstream kv(path.string() + ".kv", std::ios::trunc);
  if (!human || !kv) throw DataError("cannot write report '" + path.string() + "'");

  auto emit = [&](const std::string& key, double value) {
    kv << key << '=' << format_double(value) << '\n';
  };

  human << "scene flow evaluation\n";
  human << "  valid samples:             " << report.valid_samples << '\n';
  human << "  average EPE (m):           " << report.average_epe << '\n';
  emit("valid_samples", static_cast<double>(report.valid_samples));
  emit("average_epe", report.average_epe);

  auto bucket_line = [&](const char* label, const char* key, const std::optional<double>& v) {
    human << "  threeway " << label << ": ";
    if (v) human << *v;
    else human << "(empty)";
    human << '\n';
    if (v) emit(std::string("threeway.") + key, *v);
  };
  bucket_line("fg dynamic (m):   ", "fg_dynamic", report.threeway.fg_dynamic);
  bucket_line("fg static (m):    ", "fg_static", report.threeway.fg_static);
  bucket_line("bg static (m):    ", "bg_static", report.threeway.bg_static);
  human << "  threeway mean (m):         " << report.threeway.mean << '\n';
  emit("threeway.mean", report.threeway.mean);

  for (const auto& [class_id, m] : report.per_class) {
    human << "  class " << class_id << ":";
    if (m.static_epe) {
      human << " static EPE " << *m.static_epe;
      emit("class." + std::to_string(class_id) + ".static_epe", *m.static_epe);
    }
    if (m.dynamic_normalized_epe) {
      human << " dynamic normalized EPE " << *m.dynamic_normalized_epe;
      emit("class." + std::to_string(class_id) + ".dynamic_normalized_epe",
           *m.dynamic_normalized_epe);
    }
    human << '\n';
  }
  if (report.mean_dynamic_normalized_epe) {
    human << "  mean dynamic normalized EPE: " << *report.mean_dynamic_normalized_epe << '\n';
    emit("mean_dynamic_normalized_epe", *report.mean_dynamic_normalized_epe);
  }
  if (!human || !kv) throw DataError("failed writing report '" + path.string() + "'");
}

std::map<std::string, std::string> load_key_values(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("'" + path.string() + "': expected key=value, got '" + line + "'");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  return load_key_values(path);
}

}  // namespace sceneflow
