#include "sceneflow/config_io.hpp"

#include <sstream>

namespace sceneflow {

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("config: bad number for '" + key + "': '" + value + "'");
  }
}

long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw DataError("config: bad integer for '" + key + "': '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw DataError("config: bad boolean for '" + key + "': '" + value + "'");
}

Eigen::Vector3d to_vec3(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  Eigen::Vector3d v;
  ss >> v.x() >> v.y() >> v.z();
  if (!ss) throw DataError("config: expected three numbers for '" + key + "': '" + value + "'");
  return v;
}

}  // namespace

SceneSpec parse_scene_spec(const std::map<std::string, std::string>& kv) {
  SceneSpec spec;
  spec.movers.clear();
  for (const auto& [key, value] : kv) {
    if (key == "name") spec.name = value;
    else if (key == "num_frames") spec.num_frames = static_cast<int>(to_int(key, value));
    else if (key == "frame_interval") spec.frame_interval = to_double(key, value);
    else if (key == "background.num_points")
      spec.background_points = static_cast<int>(to_int(key, value));
    else if (key == "background.extent") spec.background_extent = to_double(key, value);
    else if (key == "ego.velocity") spec.ego_velocity = to_vec3(key, value);
    else if (key == "resample_each_frame") spec.resample_each_frame = to_bool(key, value);
    else if (key == "noise_sigma") spec.noise_sigma = to_double(key, value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key.rfind("mover.", 0) == 0) {
      const auto rest = key.substr(6);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw DataError("config: bad mover key '" + key + "'");
      const std::size_t index = static_cast<std::size_t>(to_int(key, rest.substr(0, dot)));
      const std::string field = rest.substr(dot + 1);
      if (spec.movers.size() <= index) spec.movers.resize(index + 1);
      MoverSpec& m = spec.movers[index];
      if (field == "class_id") m.class_id = static_cast<std::int32_t>(to_int(key, value));
      else if (field == "dims") m.box_dims = to_vec3(key, value);
      else if (field == "position") m.initial_pose.translation = to_vec3(key, value);
      else if (field == "yaw")
        m.initial_pose.rotation = RigidPose::rotation_z(to_double(key, value)).rotation;
      else if (field == "velocity") m.linear_velocity = to_vec3(key, value);
      else if (field == "angular_velocity") m.angular_velocity_z = to_double(key, value);
      else if (field == "points_per_frame") m.points_per_frame = static_cast<int>(to_int(key, value));
      else throw DataError("config: unknown mover field '" + key + "'");
    } else {
      throw DataError("config: unknown scene key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

TrainConfig parse_train_config(const std::map<std::string, std::string>& kv, TrainConfig base) {
  for (const auto& [key, value] : kv) {
    if (key == "epochs") base.epochs = static_cast<int>(to_int(key, value));
    else if (key == "learning_rate") base.learning_rate = to_double(key, value);
    else if (key == "minibatch_frames") base.minibatch_frames = static_cast<int>(to_int(key, value));
    else if (key == "early_stop_patience")
      base.early_stop_patience = static_cast<int>(to_int(key, value));
    else if (key == "early_stop_min_delta") base.early_stop_min_delta = to_double(key, value);
    else if (key == "seed") base.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "subsequence_length")
      base.subsequence_length = static_cast<int>(to_int(key, value));
    else if (key == "window_stride") base.window_stride = static_cast<int>(to_int(key, value));
    else if (key == "loss.max_k") base.loss.max_k = static_cast<int>(to_int(key, value));
    else if (key == "loss.cycle_weight") base.loss.cycle_weight = to_double(key, value);
    else if (key == "loss.enable_multistep") base.loss.enable_multistep = to_bool(key, value);
    else if (key == "loss.enable_cycle") base.loss.enable_cycle = to_bool(key, value);
    else if (key == "loss.chamfer.truncation_radius")
      base.loss.chamfer.truncation_radius = to_double(key, value);
    else if (key == "loss.chamfer.symmetric") base.loss.chamfer.symmetric = to_bool(key, value);
    else if (key == "mlp.hidden_width") base.mlp.hidden_width = static_cast<int>(to_int(key, value));
    else if (key == "mlp.depth") base.mlp.depth = static_cast<int>(to_int(key, value));
    else if (key == "mlp.activation") base.mlp.activation = parse_activation(value);
    else if (key == "mlp.gaussian_sigma") base.mlp.gaussian_sigma = to_double(key, value);
    else if (key == "time_encoding") base.time_encoding.mode = parse_time_encoding(value);
    else if (key == "time_encoding.frequencies")
      base.time_encoding.num_frequencies = static_cast<int>(to_int(key, value));
    else throw DataError("config: unknown training key '" + key + "'");
  }
  base.validate();
  return base;
}

}  // namespace sceneflow
