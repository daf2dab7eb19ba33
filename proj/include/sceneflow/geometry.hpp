#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sceneflow {

/// Row-major matrix used throughout for point blocks and network activations.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thrown when on-disk data or user input violates a format or invariant.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static Point3 from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool finite() const;
};

Point3 operator+(const Point3& a, const Point3& b);
Point3 operator-(const Point3& a, const Point3& b);
Point3 operator*(double s, const Point3& p);
double squared_distance(const Point3& a, const Point3& b);
double norm(const Point3& p);

/// Ordered point container. Order is significant: flow vectors and ground
/// truth annotations are index-aligned with it.
class PointCloud {
 public:
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Point3& operator[](std::size_t i) { return points[i]; }
  const Point3& operator[](std::size_t i) const { return points[i]; }

  /// n x 3 view over the packed coordinate storage (no copy).
  Eigen::Map<const RowMat> as_matrix() const {
    return {points.empty() ? nullptr : &points[0].x,
            static_cast<Eigen::Index>(points.size()), 3};
  }
  static PointCloud from_matrix(const Eigen::Ref<const RowMat>& m);
};

/// Sensor-to-world rigid transform.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Orthonormal with determinant +1, tolerance 1e-6.
  bool valid(double tol = 1e-6) const;

  Point3 apply(const Point3& p) const;
  RigidPose inverse() const;
  RigidPose compose(const RigidPose& other) const;  // this ∘ other

  static RigidPose identity() { return {}; }
  static RigidPose rotation_z(double angle_rad, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());
};

/// Per-point annotations, index-aligned with the owning frame's cloud.
struct GroundTruth {
  std::vector<Point3> flow;  // meters per frame interval
  std::vector<std::int32_t> class_id;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> is_foreground;

  std::size_t size() const { return flow.size(); }
  bool consistent(std::size_t cloud_size) const;
};

struct Frame {
  PointCloud cloud;  // ego-compensated, world frame
  double timestamp = 0.0;
  RigidPose ego_pose;
  std::optional<GroundTruth> gt;
};

class PointCloudSequence {
 public:
  std::vector<Frame> frames;
  std::string name;

  std::size_t size() const { return frames.size(); }

  /// At least 2 frames, strictly increasing timestamps, gt sizes consistent.
  /// Throws DataError with a description otherwise.
  void validate() const;
};

/// Applies rotation then translation to every point; order preserved.
PointCloud apply_pose(const PointCloud& cloud, const RigidPose& pose);

/// Re-expresses sensor-frame clouds in the shared world frame.
/// Throws DataError if the spans disagree in length.
std::vector<Frame> ego_compensate(const std::vector<PointCloud>& sensor_clouds,
                                  const std::vector<RigidPose>& poses,
                                  const std::vector<double>& timestamps);

/// Drops points with z <= ground_height; gt lists are filtered with the
/// identical mask so index alignment survives.
Frame remove_ground(const Frame& frame, double ground_height);

}  // namespace sceneflow
