#pragma once

#include <functional>
#include <vector>

#include "sceneflow/encoding.hpp"
#include "sceneflow/mlp.hpp"

namespace sceneflow {

/// Per-frame estimated residual vectors, index-aligned with each frame's
/// cloud. frames[t] holds the flow from frame t to t+1 (t in [0, N)).
struct FlowField {
  std::vector<std::vector<Point3>> frames;
};

/// Time-stamped 3D polyline from Euler integration.
struct Trajectory {
  struct Sample {
    double timestamp;
    Point3 position;
  };
  std::vector<Sample> samples;
};

/// A queryable motion field: one displacement (meters per frame interval)
/// per input position. Implementations must be pure.
class FlowSource {
 public:
  virtual ~FlowSource() = default;
  virtual RowMat query(const Eigen::Ref<const RowMat>& positions, double t, Direction d) const = 0;
};

/// The trained coordinate network behind the FlowSource interface.
class PriorFlowSource final : public FlowSource {
 public:
  PriorFlowSource(MLPParams params, TimeNormalizer normalizer, TimeEncoding encoding,
                  FrameTimes times);
  /// Convenience: normalizer/times derived from the sequence.
  PriorFlowSource(MLPParams params, TimeEncoding encoding, const PointCloudSequence& sequence);

  RowMat query(const Eigen::Ref<const RowMat>& positions, double t, Direction d) const override;

  const MLPParams& params() const { return params_; }
  const TimeNormalizer& normalizer() const { return normalizer_; }
  const TimeEncoding& encoding() const { return encoding_; }

 private:
  MLPParams params_;
  TimeNormalizer normalizer_;
  TimeEncoding encoding_;
  FrameTimes times_;
};

/// Stub/oracle adapter for tests.
class CallbackFlowSource final : public FlowSource {
 public:
  using Fn = std::function<Eigen::Vector3d(const Eigen::Vector3d&, double, Direction)>;
  explicit CallbackFlowSource(Fn fn) : fn_(std::move(fn)) {}
  RowMat query(const Eigen::Ref<const RowMat>& positions, double t, Direction d) const override;

 private:
  Fn fn_;
};

/// One flow vector per point of the cloud at query time t.
std::vector<Point3> query_flow(const FlowSource& field, const PointCloud& cloud, double t,
                               Direction d);

/// k-step Euler integration starting from the cloud at frame start_frame;
/// step i queries the field at the timestamp of the (i-1)-th intermediate
/// frame. Throws when the k steps leave the sequence.
PointCloud euler_integrate(const FlowSource& field, const PointCloud& cloud,
                           const FrameTimes& times, int start_frame, Direction d, int k);

/// Same, resolving t_start (seconds) to a frame index first.
PointCloud euler_integrate_at(const FlowSource& field, const PointCloud& cloud,
                              const FrameTimes& times, double t_start, Direction d, int k);

/// Flow for every adjacent frame pair: euler_integrate(P_t, t, FWD, 1) - P_t.
FlowField extract_flow_field(const FlowSource& field, const PointCloudSequence& sequence);

/// Frame-by-frame track of a single point from frame t0 to frame t1
/// (either order), recording every intermediate position.
Trajectory extract_track(const FlowSource& field, const Point3& start, const FrameTimes& times,
                         int t0_frame, int t1_frame);

/// Same, with endpoints given in seconds; throws if they are not frame times.
Trajectory extract_track_at(const FlowSource& field, const Point3& start, const FrameTimes& times,
                            double t_start, double t_end);

}  // namespace sceneflow
