#pragma once

#include <vector>

#include "sceneflow/geometry.hpp"

namespace sceneflow {

/// Query direction, encoded exactly as +/-1 in the network input.
enum class Direction : int { Fwd = +1, Bwd = -1 };

inline double direction_sign(Direction d) { return d == Direction::Fwd ? 1.0 : -1.0; }

/// Frame timestamps of a sequence, shared by the integrator and encoder.
struct FrameTimes {
  std::vector<double> stamps;

  static FrameTimes from_sequence(const PointCloudSequence& sequence);

  int count() const { return static_cast<int>(stamps.size()); }
  double first_interval() const { return stamps[1] - stamps[0]; }
  double last_interval() const { return stamps[stamps.size() - 1] - stamps[stamps.size() - 2]; }

  /// Resolves a timestamp to its frame index; throws DataError when t is not
  /// a frame timestamp (tolerance 1e-9 s).
  int index_of(double t_seconds) const;
};

/// Affine map of sequence time onto [-1, +1].
struct TimeNormalizer {
  double t_min = 0.0;
  double t_max = 1.0;

  double normalize(double t) const { return -1.0 + 2.0 * (t - t_min) / (t_max - t_min); }
  static TimeNormalizer from_times(const FrameTimes& times);
};

/// How normalized time enters the network input.
struct TimeEncoding {
  enum class Mode { Normalized, Sinusoidal };
  Mode mode = Mode::Normalized;
  int num_frequencies = 8;  // Sinusoidal: (sin(2^i pi t), cos(2^i pi t)), i in [0, K)

  int time_dims() const { return mode == Mode::Normalized ? 1 : 2 * num_frequencies; }
  int input_dims() const { return 3 + time_dims() + 1; }
};

/// Reconstructs the encoding from a checkpoint's input dimension (the
/// checkpoint stores only the network shape). Throws DataError when no
/// encoding produces that dimension.
TimeEncoding infer_time_encoding(int input_dim);

/// Encodes one point as (x, y, z, time-encoding(t), d). Throws DataError when
/// t falls outside the sequence span extended by one frame interval per side.
std::vector<double> encode(const Point3& position, double t, Direction d,
                           const TimeNormalizer& normalizer, const TimeEncoding& encoding,
                           const FrameTimes& times);

/// The (time-encoding, direction) block shared by every point of a cloud
/// queried at one (t, d); 1 x (time_dims + 1).
RowMat encode_time_direction(double t, Direction d, const TimeNormalizer& normalizer,
                             const TimeEncoding& encoding, const FrameTimes& times);

/// Batch encoding of a full cloud: n x input_dims.
RowMat encode_cloud(const Eigen::Ref<const RowMat>& positions, double t, Direction d,
                    const TimeNormalizer& normalizer, const TimeEncoding& encoding,
                    const FrameTimes& times);

}  // namespace sceneflow
