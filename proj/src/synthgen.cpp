#include "sceneflow/synthgen.hpp"

#include <cmath>

#include "sceneflow/rng.hpp"

namespace sceneflow {

void SceneSpec::validate() const {
  if (num_frames < 2) throw DataError("SceneSpec: num_frames must be >= 2");
  if (!(frame_interval > 0.0)) throw DataError("SceneSpec: frame_interval must be > 0");
  if (background_points < 1) throw DataError("SceneSpec: background_points must be >= 1");
  if (!(background_extent > 0.0)) throw DataError("SceneSpec: background_extent must be > 0");
  if (!std::isfinite(ego_velocity.sum()) || !(noise_sigma >= 0.0))
    throw DataError("SceneSpec: bad ego velocity or noise sigma");
  for (const auto& m : movers) {
    if (m.points_per_frame < 1) throw DataError("SceneSpec: mover needs >= 1 point per frame");
    if (!(m.box_dims.minCoeff() > 0.0)) throw DataError("SceneSpec: mover box dims must be > 0");
    if (!std::isfinite(m.linear_velocity.sum()) || !std::isfinite(m.angular_velocity_z))
      throw DataError("SceneSpec: mover velocity not finite");
    if (!m.initial_pose.valid()) throw DataError("SceneSpec: mover initial pose invalid");
  }
}

RigidPose mover_pose_at(const MoverSpec& mover, int frame) {
  const double t = static_cast<double>(frame);
  RigidPose pose;
  pose.rotation =
      RigidPose::rotation_z(t * mover.angular_velocity_z).rotation * mover.initial_pose.rotation;
  pose.translation = mover.initial_pose.translation + t * mover.linear_velocity;
  return pose;
}

namespace {

/// Uniform sample on the surface of an axis-aligned box (local coordinates
/// centered at the origin), faces weighted by area.
Point3 sample_box_surface(const Eigen::Vector3d& dims, Rng& rng) {
  const double hx = dims.x() / 2.0, hy = dims.y() / 2.0, hz = dims.z() / 2.0;
  const double ax = dims.y() * dims.z();  // each +-x face
  const double ay = dims.x() * dims.z();
  const double az = dims.x() * dims.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform() * total;
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double u = rng.uniform(), v = rng.uniform();
  if (pick < 2.0 * ax)
    return {sign * hx, (2.0 * u - 1.0) * hy, (2.0 * v - 1.0) * hz};
  pick -= 2.0 * ax;
  if (pick < 2.0 * ay)
    return {(2.0 * u - 1.0) * hx, sign * hy, (2.0 * v - 1.0) * hz};
  return {(2.0 * u - 1.0) * hx, (2.0 * v - 1.0) * hy, sign * hz};
}

}  // namespace

PointCloudSequence generate(const SceneSpec& spec) {
  spec.validate();
  Rng master(spec.seed);
  Rng bg_rng = master.fork(0);
  Rng mover_rng = master.fork(1);
  Rng noise_rng = master.fork(2);

  // Static background band above the default ground threshold.
  const double half = spec.background_extent / 2.0;
  std::vector<Point3> background(static_cast<std::size_t>(spec.background_points));
  for (auto& p : background)
    p = {bg_rng.uniform(-half, half), bg_rng.uniform(-half, half), bg_rng.uniform(0.3, 3.3)};

  // Fixed local surface samples when resampling is disabled.
  std::vector<std::vector<Point3>> fixed_samples(spec.movers.size());
  if (!spec.resample_each_frame) {
    for (std::size_t m = 0; m < spec.movers.size(); ++m)
      for (int i = 0; i < spec.movers[m].points_per_frame; ++i)
        fixed_samples[m].push_back(sample_box_surface(spec.movers[m].box_dims, mover_rng));
  }

  std::vector<PointCloud> raw_clouds;
  std::vector<RigidPose> ego_poses;
  std::vector<double> timestamps;
  std::vector<GroundTruth> gts;

  for (int t = 0; t < spec.num_frames; ++t) {
    PointCloud world;
    GroundTruth gt;
    auto add_point = [&](const Point3& p, const Point3& flow, std::int32_t class_id, bool fg) {
      world.points.push_back(p);
      gt.flow.push_back(flow);
      gt.class_id.push_back(class_id);
      gt.valid.push_back(1);
      gt.is_foreground.push_back(fg ? 1 : 0);
    };

    for (const auto& p : background) add_point(p, {0.0, 0.0, 0.0}, 0, false);

    for (std::size_t m = 0; m < spec.movers.size(); ++m) {
      const MoverSpec& mover = spec.movers[m];
      const RigidPose pose_now = mover_pose_at(mover, t);
      const RigidPose pose_next = mover_pose_at(mover, t + 1);
      for (int i = 0; i < mover.points_per_frame; ++i) {
        const Point3 local = spec.resample_each_frame
                                 ? sample_box_surface(mover.box_dims, mover_rng)
                                 : fixed_samples[m][static_cast<std::size_t>(i)];
        const Point3 now = pose_now.apply(local);
        // Grouped so the rotation part cancels bit-exactly when the mover
        // only translates.
        const Eigen::Vector3d flow =
            (pose_next.rotation * local.vec() - pose_now.rotation * local.vec()) +
            (pose_next.translation - pose_now.translation);
        add_point(now, Point3::from(flow), mover.class_id, true);
      }
    }

    RigidPose ego;
    ego.translation = static_cast<double>(t) * spec.ego_velocity;

    PointCloud raw = apply_pose(world, ego.inverse());
    if (spec.noise_sigma > 0.0) {
      for (auto& p : raw.points) {
        p.x += spec.noise_sigma * noise_rng.gaussian();
        p.y += spec.noise_sigma * noise_rng.gaussian();
        p.z += spec.noise_sigma * noise_rng.gaussian();
      }
    }

    raw_clouds.push_back(std::move(raw));
    ego_poses.push_back(ego);
    timestamps.push_back(static_cast<double>(t) * spec.frame_interval);
    gts.push_back(std::move(gt));
  }

  PointCloudSequence sequence;
  sequence.name = spec.name;
  sequence.frames = ego_compensate(raw_clouds, ego_poses, timestamps);
  for (std::size_t t = 0; t < sequence.frames.size(); ++t)
    sequence.frames[t].gt = std::move(gts[t]);
  sequence.validate();
  return sequence;
}

SceneSpec desk_av_preset() {
  SceneSpec spec;
  spec.name = "desk-av";
  spec.num_frames = 20;
  spec.frame_interval = 0.1;
  spec.background_points = 2000;
  spec.background_extent = 40.0;
  spec.seed = 0;

  MoverSpec car;
  car.class_id = 1;
  car.box_dims = {4.0, 2.0, 1.5};
  car.initial_pose.translation = {-5.0, 2.0, 0.75};
  car.linear_velocity = {0.1, 0.0, 0.0};  // 1 m/s at 10 Hz
  car.points_per_frame = 300;
  spec.movers.push_back(car);

  MoverSpec pedestrian;
  pedestrian.class_id = 2;
  pedestrian.box_dims = {0.5, 0.5, 1.7};
  pedestrian.initial_pose.translation = {3.0, -4.0, 0.85};
  pedestrian.linear_velocity = {0.0, 0.06, 0.0};  // 0.6 m/s
  pedestrian.points_per_frame = 60;
  spec.movers.push_back(pedestrian);

  return spec;
}

}  // namespace sceneflow
