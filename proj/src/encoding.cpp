#include "sceneflow/encoding.hpp"

#include <cmath>

namespace sceneflow {

FrameTimes FrameTimes::from_sequence(const PointCloudSequence& sequence) {
  sequence.validate();
  FrameTimes times;
  times.stamps.reserve(sequence.frames.size());
  for (const auto& f : sequence.frames) times.stamps.push_back(f.timestamp);
  return times;
}

int FrameTimes::index_of(double t_seconds) const {
  for (std::size_t i = 0; i < stamps.size(); ++i)
    if (std::abs(stamps[i] - t_seconds) <= 1e-9) return static_cast<int>(i);
  throw DataError("time " + std::to_string(t_seconds) + " is not a frame timestamp");
}

TimeNormalizer TimeNormalizer::from_times(const FrameTimes& times) {
  return {times.stamps.front(), times.stamps.back()};
}

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_time_range(double t, const TimeNormalizer& n, const FrameTimes& times) {
  const double lo = n.t_min - times.first_interval();
  const double hi = n.t_max + times.last_interval();
  if (!(t >= lo && t <= hi))
    throw DataError("query time " + std::to_string(t) + " outside extended sequence range [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void write_time_encoding(double t_norm, const TimeEncoding& enc, double* out) {
  if (enc.mode == TimeEncoding::Mode::Normalized) {
    out[0] = t_norm;
    return;
  }
  double freq = kPi;
  for (int i = 0; i < enc.num_frequencies; ++i) {
    out[2 * i] = std::sin(freq * t_norm);
    out[2 * i + 1] = std::cos(freq * t_norm);
    freq *= 2.0;
  }
}
}  // namespace

TimeEncoding infer_time_encoding(int input_dim) {
  TimeEncoding enc;
  if (input_dim == 5) return enc;
  if (input_dim > 5 && (input_dim - 4) % 2 == 0) {
    enc.mode = TimeEncoding::Mode::Sinusoidal;
    enc.num_frequencies = (input_dim - 4) / 2;
    return enc;
  }
  throw DataError("no time encoding matches input dimension " + std::to_string(input_dim));
}

std::vector<double> encode(const Point3& position, double t, Direction d,
                           const TimeNormalizer& normalizer, const TimeEncoding& encoding,
                           const FrameTimes& times) {
  check_time_range(t, normalizer, times);
  std::vector<double> out(static_cast<std::size_t>(encoding.input_dims()));
  out[0] = position.x;
  out[1] = position.y;
  out[2] = position.z;
  write_time_encoding(normalizer.normalize(t), encoding, out.data() + 3);
  out.back() = direction_sign(d);
  return out;
}

RowMat encode_time_direction(double t, Direction d, const TimeNormalizer& normalizer,
                             const TimeEncoding& encoding, const FrameTimes& times) {
  check_time_range(t, normalizer, times);
  RowMat block(1, encoding.time_dims() + 1);
  write_time_encoding(normalizer.normalize(t), encoding, block.data());
  block(0, block.cols() - 1) = direction_sign(d);
  return block;
}

RowMat encode_cloud(const Eigen::Ref<const RowMat>& positions, double t, Direction d,
                    const TimeNormalizer& normalizer, const TimeEncoding& encoding,
                    const FrameTimes& times) {
  const RowMat block = encode_time_direction(t, d, normalizer, encoding, times);
  RowMat out(positions.rows(), encoding.input_dims());
  out.leftCols(3) = positions;
  out.rightCols(block.cols()) = block.replicate(positions.rows(), 1);
  return out;
}

}  // namespace sceneflow
