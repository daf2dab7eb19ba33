#include "sceneflow/flow.hpp"

#include <stdexcept>

namespace sceneflow {

PriorFlowSource::PriorFlowSource(MLPParams params, TimeNormalizer normalizer,
                                 TimeEncoding encoding, FrameTimes times)
    : params_(std::move(params)),
      normalizer_(normalizer),
      encoding_(encoding),
      times_(std::move(times)) {
  if (params_.config.input_dim != encoding_.input_dims())
    throw std::invalid_argument("PriorFlowSource: network input_dim does not match encoding");
}

PriorFlowSource::PriorFlowSource(MLPParams params, TimeEncoding encoding,
                                 const PointCloudSequence& sequence)
    : PriorFlowSource(std::move(params), TimeNormalizer{}, encoding,
                      FrameTimes::from_sequence(sequence)) {
  normalizer_ = TimeNormalizer::from_times(times_);
}

RowMat PriorFlowSource::query(const Eigen::Ref<const RowMat>& positions, double t,
                              Direction d) const {
  return forward_batch(params_, encode_cloud(positions, t, d, normalizer_, encoding_, times_));
}

RowMat CallbackFlowSource::query(const Eigen::Ref<const RowMat>& positions, double t,
                                 Direction d) const {
  RowMat out(positions.rows(), 3);
  for (Eigen::Index i = 0; i < positions.rows(); ++i)
    out.row(i) = fn_(positions.row(i).transpose(), t, d).transpose();
  return out;
}

std::vector<Point3> query_flow(const FlowSource& field, const PointCloud& cloud, double t,
                               Direction d) {
  const RowMat flow = field.query(cloud.as_matrix(), t, d);
  std::vector<Point3> out(cloud.size());
  for (Eigen::Index i = 0; i < flow.rows(); ++i)
    out[static_cast<std::size_t>(i)] = {flow(i, 0), flow(i, 1), flow(i, 2)};
  return out;
}

PointCloud euler_integrate(const FlowSource& field, const PointCloud& cloud,
                           const FrameTimes& times, int start_frame, Direction d, int k) {
  if (k < 1) throw std::invalid_argument("euler_integrate: k must be >= 1");
  const int step = d == Direction::Fwd ? 1 : -1;
  const int end_frame = start_frame + step * k;
  if (start_frame < 0 || start_frame >= times.count() || end_frame < 0 ||
      end_frame >= times.count())
    throw std::out_of_range("euler_integrate: k steps leave the sequence");

  RowMat x = cloud.as_matrix();
  for (int i = 0; i < k; ++i) {
    const double t = times.stamps[static_cast<std::size_t>(start_frame + step * i)];
    x += field.query(x, t, d);
  }
  return PointCloud::from_matrix(x);
}

PointCloud euler_integrate_at(const FlowSource& field, const PointCloud& cloud,
                              const FrameTimes& times, double t_start, Direction d, int k) {
  return euler_integrate(field, cloud, times, times.index_of(t_start), d, k);
}

FlowField extract_flow_field(const FlowSource& field, const PointCloudSequence& sequence) {
  const FrameTimes times = FrameTimes::from_sequence(sequence);
  FlowField out;
  out.frames.reserve(sequence.frames.size() - 1);
  for (std::size_t t = 0; t + 1 < sequence.frames.size(); ++t) {
    const PointCloud& cloud = sequence.frames[t].cloud;
    const PointCloud moved =
        euler_integrate(field, cloud, times, static_cast<int>(t), Direction::Fwd, 1);
    std::vector<Point3> flow(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) flow[i] = moved[i] - cloud[i];
    out.frames.push_back(std::move(flow));
  }
  return out;
}

Trajectory extract_track(const FlowSource& field, const Point3& start, const FrameTimes& times,
                         int t0_frame, int t1_frame) {
  if (t0_frame < 0 || t0_frame >= times.count() || t1_frame < 0 || t1_frame >= times.count())
    throw std::out_of_range("extract_track: endpoints must be frame indices");
  if (t0_frame == t1_frame) throw std::invalid_argument("extract_track: t_start equals t_end");
  const Direction d = t1_frame > t0_frame ? Direction::Fwd : Direction::Bwd;
  const int step = t1_frame > t0_frame ? 1 : -1;

  Trajectory track;
  track.samples.reserve(static_cast<std::size_t>(std::abs(t1_frame - t0_frame)) + 1);
  RowMat x(1, 3);
  x << start.x, start.y, start.z;
  track.samples.push_back({times.stamps[static_cast<std::size_t>(t0_frame)], start});
  for (int f = t0_frame; f != t1_frame; f += step) {
    const double t = times.stamps[static_cast<std::size_t>(f)];
    x += field.query(x, t, d);
    track.samples.push_back(
        {times.stamps[static_cast<std::size_t>(f + step)], Point3{x(0, 0), x(0, 1), x(0, 2)}});
  }
  return track;
}

Trajectory extract_track_at(const FlowSource& field, const Point3& start, const FrameTimes& times,
                            double t_start, double t_end) {
  return extract_track(field, start, times, times.index_of(t_start), times.index_of(t_end));
}

}  // namespace sceneflow
