#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sceneflow/config_io.hpp"
#include "sceneflow/dataset_io.hpp"
#include "sceneflow/synthgen.hpp"

using namespace sceneflow;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sceneflow_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

PointCloudSequence small_sequence() {
  SceneSpec spec;
  spec.num_frames = 4;
  spec.background_points = 30;
  spec.background_extent = 8.0;
  spec.seed = 9;
  spec.ego_velocity = {0.5, 0.0, 0.0};
  MoverSpec mover;
  mover.box_dims = {1.0, 1.0, 1.0};
  mover.initial_pose.translation = {1.0, 1.0, 1.0};
  mover.linear_velocity = {0.25, 0.0, 0.0};
  mover.points_per_frame = 10;
  spec.movers.push_back(mover);
  return generate(spec);
}

}  // namespace

TEST_CASE("sequence round-trips within f32 quantization") {
  const PointCloudSequence seq = small_sequence();
  const fs::path dir = fresh_dir("roundtrip");
  save_sequence(seq, dir);
  const PointCloudSequence loaded = load_sequence(dir);

  REQUIRE(loaded.frames.size() == seq.frames.size());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    CHECK(loaded.frames[t].timestamp == seq.frames[t].timestamp);
    CHECK((loaded.frames[t].ego_pose.translation - seq.frames[t].ego_pose.translation).norm() ==
          0.0);
    REQUIRE(loaded.frames[t].cloud.size() == seq.frames[t].cloud.size());
    for (std::size_t i = 0; i < seq.frames[t].cloud.size(); ++i) {
      // exact f32 quantization, no further loss
      CHECK(loaded.frames[t].cloud[i].x ==
            static_cast<double>(static_cast<float>(seq.frames[t].cloud[i].x)));
      CHECK(loaded.frames[t].gt->class_id[i] == seq.frames[t].gt->class_id[i]);
      CHECK(loaded.frames[t].gt->flow[i].x ==
            static_cast<double>(static_cast<float>(seq.frames[t].gt->flow[i].x)));
    }
  }
}

TEST_CASE("save-load-save produces byte-identical files") {
  const PointCloudSequence seq = small_sequence();
  const fs::path dir_a = fresh_dir("canon_a");
  const fs::path dir_b = fresh_dir("canon_b");
  save_sequence(seq, dir_a);
  save_sequence(load_sequence(dir_a), dir_b);
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const fs::path other = dir_b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_bytes(entry.path()) == read_bytes(other));
  }
}

TEST_CASE("frames without gt omit the gt file") {
  PointCloudSequence seq = small_sequence();
  seq.frames[2].gt.reset();
  const fs::path dir = fresh_dir("nogt");
  save_sequence(seq, dir);
  CHECK_FALSE(fs::exists(dir / "frame_000002.flgt"));
  CHECK(fs::exists(dir / "frame_000001.flgt"));
  const PointCloudSequence loaded = load_sequence(dir);
  CHECK_FALSE(loaded.frames[2].gt.has_value());
  CHECK(loaded.frames[1].gt.has_value());
}

TEST_CASE("corrupted magic is reported with the file name") {
  const PointCloudSequence seq = small_sequence();
  const fs::path dir = fresh_dir("magic");
  save_sequence(seq, dir);
  {
    std::ofstream bad(dir / "frame_000001.pcsf", std::ios::binary);
    bad << "JUNKJUNKJUNK";
  }
  try {
    load_sequence(dir);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("frame_000001.pcsf") != std::string::npos);
  }
}

TEST_CASE("gt count mismatch is rejected") {
  const PointCloudSequence seq = small_sequence();
  const fs::path dir = fresh_dir("gtcount");
  save_sequence(seq, dir);
  // Truncate the gt file after its header and first record.
  const auto bytes = read_bytes(dir / "frame_000000.flgt");
  std::ofstream out(dir / "frame_000000.flgt", std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), 8 + 18);
  out.close();
  CHECK_THROWS_AS(load_sequence(dir), DataError);
}

TEST_CASE("non-monotone timestamps are rejected at load") {
  const PointCloudSequence seq = small_sequence();
  const fs::path dir = fresh_dir("stamps");
  save_sequence(seq, dir);
  // Rewrite the manifest with a swapped timestamp.
  std::ifstream in(dir / "manifest.txt");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  std::swap(lines[1], lines[2]);
  // Also swap the leading frame indices back so only time ordering breaks.
  lines[1].replace(0, 1, "0");
  lines[2].replace(0, 1, "1");
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
  out.close();
  CHECK_THROWS_AS(load_sequence(dir), DataError);
}

TEST_CASE("flow field files round-trip") {
  FlowField flow;
  flow.frames = {{{0.1, 0.2, 0.3}, {-1.0, 0.0, 2.5}}, {{0.0, 0.0, 0.0}}};
  const fs::path dir = fresh_dir("flow");
  save_flow_field(flow, dir);
  CHECK(read_bytes(dir / "flow_000000.bin").substr(0, 4) == "FLOW");
  const FlowField loaded = load_flow_field(dir);
  REQUIRE(loaded.frames.size() == 2);
  REQUIRE(loaded.frames[0].size() == 2);
  CHECK(loaded.frames[0][1].z == doctest::Approx(2.5).epsilon(1e-7));
  CHECK_THROWS_AS(load_flow_field(fresh_dir("empty_flow")), DataError);
}

TEST_CASE("trajectory text format") {
  Trajectory track;
  track.samples = {{0.0, {1, 2, 3}}, {0.1, {1.5, 2, 3}}};
  const fs::path file = fresh_dir("traj") / "track.txt";
  save_trajectory(track, file);
  std::ifstream is(file);
  std::string line;
  std::getline(is, line);
  CHECK(line == "0 1 2 3");
  std::getline(is, line);
  std::istringstream ss(line);
  double t, x, y, z;
  ss >> t >> x >> y >> z;
  REQUIRE(!ss.fail());
  CHECK(t == 0.1);
  CHECK(x == 1.5);
}

TEST_CASE("metric report key-value file round-trips") {
  MetricReport report;
  report.average_epe = 0.125;
  report.threeway.bg_static = 0.0625;
  report.threeway.mean = 0.0625;
  report.valid_samples = 10;
  report.per_class[1] = {0.25, 0.5};
  report.mean_dynamic_normalized_epe = 0.5;
  const fs::path path = fresh_dir("report") / "report.txt";
  save_metric_report(report, path);
  const auto kv = load_key_values(fs::path(path.string() + ".kv"));
  CHECK(kv.at("average_epe") == "0.125");
  CHECK(kv.at("threeway.bg_static") == "0.0625");
  CHECK(kv.at("class.1.dynamic_normalized_epe") == "0.5");
  CHECK(kv.at("mean_dynamic_normalized_epe") == "0.5");
  CHECK(kv.count("threeway.fg_dynamic") == 0);  // empty bucket omitted
}

TEST_CASE("scene spec config parsing") {
  const fs::path file = fresh_dir("scenecfg") / "scene.cfg";
  {
    std::ofstream os(file);
    os << "# comment\n";
    os << "name=two-movers\n";
    os << "num_frames=6\n";
    os << "frame_interval=0.05\n";
    os << "background.num_points=100\n";
    os << "background.extent=12\n";
    os << "ego.velocity=0.5 0 0\n";
    os << "noise_sigma=0.01\n";
    os << "seed=7\n";
    os << "mover.0.class_id=1\n";
    os << "mover.0.dims=4 2 1.5\n";
    os << "mover.0.position=-5 0 0.75\n";
    os << "mover.0.velocity=0.1 0 0\n";
    os << "mover.0.points_per_frame=50\n";
    os << "mover.1.class_id=2\n";
    os << "mover.1.dims=0.5 0.5 1.7\n";
    os << "mover.1.position=2 2 0.85\n";
    os << "mover.1.velocity=0 0.06 0\n";
    os << "mover.1.angular_velocity=0.1\n";
    os << "mover.1.points_per_frame=20\n";
  }
  const SceneSpec spec = parse_scene_spec(read_config_file(file));
  CHECK(spec.name == "two-movers");
  CHECK(spec.num_frames == 6);
  CHECK(spec.frame_interval == 0.05);
  REQUIRE(spec.movers.size() == 2);
  CHECK(spec.movers[1].angular_velocity_z == 0.1);
  CHECK(spec.movers[0].box_dims.x() == 4.0);
  CHECK(spec.ego_velocity.x() == 0.5);

  std::ofstream bad(file, std::ios::app);
  bad << "unknown_key=1\n";
  bad.close();
  CHECK_THROWS_AS(parse_scene_spec(read_config_file(file)), DataError);
}

TEST_CASE("train config parsing with overrides") {
  const fs::path file = fresh_dir("traincfg") / "train.cfg";
  {
    std::ofstream os(file);
    os << "epochs=25\n";
    os << "learning_rate=1e-3\n";
    os << "minibatch_frames=3\n";
    os << "seed=11\n";
    os << "loss.max_k=2\n";
    os << "loss.enable_cycle=false\n";
    os << "mlp.hidden_width=16\n";
    os << "mlp.depth=2\n";
    os << "mlp.activation=sinc\n";
    os << "time_encoding=sinusoidal\n";
    os << "time_encoding.frequencies=4\n";
  }
  const TrainConfig config = parse_train_config(read_config_file(file));
  CHECK(config.epochs == 25);
  CHECK(config.learning_rate == 1e-3);
  CHECK(config.loss.max_k == 2);
  CHECK_FALSE(config.loss.enable_cycle);
  CHECK(config.mlp.activation == Activation::SinC);
  CHECK(config.time_encoding.mode == TimeEncoding::Mode::Sinusoidal);
  CHECK(config.time_encoding.num_frequencies == 4);
  // defaults untouched
  CHECK(config.loss.chamfer.truncation_radius == 2.0);
  CHECK(config.early_stop_patience == 100);
}
