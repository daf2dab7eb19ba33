#include "sceneflow/geometry.hpp"

#include <Eigen/LU>
#include <cmath>

namespace sceneflow {

bool Point3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

PointCloud PointCloud::from_matrix(const Eigen::Ref<const RowMat>& m) {
  PointCloud out;
  out.points.resize(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.points[static_cast<std::size_t>(i)] = {m(i, 0), m(i, 1), m(i, 2)};
  return out;
}

bool RigidPose::valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Point3 RigidPose::apply(const Point3& p) const {
  return Point3::from(rotation * p.vec() + translation);
}

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidPose RigidPose::compose(const RigidPose& other) const {
  RigidPose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

RigidPose RigidPose::rotation_z(double angle_rad, const Eigen::Vector3d& t) {
  RigidPose pose;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  pose.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  pose.translation = t;
  return pose;
}

bool GroundTruth::consistent(std::size_t cloud_size) const {
  return flow.size() == cloud_size && class_id.size() == cloud_size &&
         valid.size() == cloud_size && is_foreground.size() == cloud_size;
}

void PointCloudSequence::validate() const {
  if (frames.size() < 2) throw DataError("sequence '" + name + "' needs at least 2 frames");
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    if (!(frames[i].timestamp < frames[i + 1].timestamp))
      throw DataError("sequence '" + name + "': timestamps not strictly increasing at frame " +
                      std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.gt && !f.gt->consistent(f.cloud.size()))
      throw DataError("sequence '" + name + "': gt length mismatch at frame " + std::to_string(i));
  }
}

PointCloud apply_pose(const PointCloud& cloud, const RigidPose& pose) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(pose.apply(p));
  return out;
}

std::vector<Frame> ego_compensate(const std::vector<PointCloud>& sensor_clouds,
                                  const std::vector<RigidPose>& poses,
                                  const std::vector<double>& timestamps) {
  if (sensor_clouds.size() != poses.size() || sensor_clouds.size() != timestamps.size())
    throw DataError("ego_compensate: clouds/poses/timestamps length mismatch");
  std::vector<Frame> frames;
  frames.reserve(sensor_clouds.size());
  for (std::size_t i = 0; i < sensor_clouds.size(); ++i) {
    Frame f;
    f.cloud = apply_pose(sensor_clouds[i], poses[i]);
    f.timestamp = timestamps[i];
    f.ego_pose = poses[i];
    frames.push_back(std::move(f));
  }
  return frames;
}

Frame remove_ground(const Frame& frame, double ground_height) {
  if (!std::isfinite(ground_height)) throw DataError("remove_ground: ground_height not finite");
  Frame out;
  out.timestamp = frame.timestamp;
  out.ego_pose = frame.ego_pose;
  if (frame.gt) out.gt.emplace();
  for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
    if (frame.cloud[i].z <= ground_height) continue;
    out.cloud.points.push_back(frame.cloud[i]);
    if (frame.gt) {
      out.gt->flow.push_back(frame.gt->flow[i]);
      out.gt->class_id.push_back(frame.gt->class_id[i]);
      out.gt->valid.push_back(frame.gt->valid[i]);
      out.gt->is_foreground.push_back(frame.gt->is_foreground[i]);
    }
  }
  return out;
}

}  // namespace sceneflow
