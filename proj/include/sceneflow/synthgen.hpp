#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sceneflow/geometry.hpp"

namespace sceneflow {

/// A rigid box mover: surface-sampled, translating and yawing about its
/// center at a constant rate per frame.
struct MoverSpec {
  std::int32_t class_id = 1;
  Eigen::Vector3d box_dims{4.0, 2.0, 1.5};  // full extents, meters
  RigidPose initial_pose;                   // box center and orientation
  Eigen::Vector3d linear_velocity{0.0, 0.0, 0.0};  // m/frame
  double angular_velocity_z = 0.0;                 // rad/frame, about the center
  int points_per_frame = 100;
};

struct SceneSpec {
  int num_frames = 20;
  double frame_interval = 0.1;  // seconds
  int background_points = 2000;
  double background_extent = 40.0;  // meters, square in x/y
  std::vector<MoverSpec> movers;
  Eigen::Vector3d ego_velocity{0.0, 0.0, 0.0};  // m/frame
  bool resample_each_frame = true;
  double noise_sigma = 0.0;  // meters, isotropic, added after gt computation
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  void validate() const;
};

/// World pose of a mover's local box frame at an (extrapolatable) frame index.
RigidPose mover_pose_at(const MoverSpec& mover, int frame);

/// Generates the sequence with exact ground-truth flow on every frame.
/// Background points are static in the world frame; mover surfaces are
/// resampled per frame (no index correspondence across frames) unless
/// resample_each_frame is false. Ego motion is applied to the raw frames and
/// undone through ego_compensate, so the stored ego poses reconstruct the
/// world frame.
PointCloudSequence generate(const SceneSpec& spec);

/// The standard 20-frame benchmark scene: static background, one car-sized
/// and one pedestrian-sized mover.
SceneSpec desk_av_preset();

}  // namespace sceneflow
