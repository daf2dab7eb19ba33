#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "sceneflow/flow.hpp"
#include "sceneflow/geometry.hpp"

namespace sceneflow {

struct EpeSample {
  double epe = 0.0;       // meters
  double gt_speed = 0.0;  // meters per frame interval
  std::int32_t class_id = 0;
  bool is_foreground = false;
  bool valid = true;
};

struct BucketSpec {
  double static_threshold = 0.05;   // m/interval (0.5 m/s at 10 Hz)
  double speed_bucket_width = 0.04; // m/interval
  int max_buckets = 50;             // last bucket open-ended

  void validate() const;
  int bucket_of(double gt_speed) const;  // dynamic points only
};

struct ThreewayEpe {
  std::optional<double> fg_dynamic;
  std::optional<double> fg_static;
  std::optional<double> bg_static;
  double mean = 0.0;  // over the non-empty buckets
};

struct ClassMetrics {
  std::optional<double> static_epe;
  std::optional<double> dynamic_normalized_epe;
};

struct MetricReport {
  double average_epe = 0.0;
  ThreewayEpe threeway;
  std::map<std::int32_t, ClassMetrics> per_class;
  std::optional<double> mean_dynamic_normalized_epe;  // over classes with dynamic points
  std::size_t valid_samples = 0;
};

/// Euclidean norm of the flow residual.
double epe(const Point3& predicted, const Point3& ground_truth);

/// Mean EPE over valid samples; throws DataError when none are valid.
double average_epe(const std::vector<EpeSample>& samples);

/// Average EPE per (foreground, dynamic) bucket; background-dynamic points
/// are dropped; mean over the non-empty buckets.
ThreewayEpe threeway_epe(const std::vector<EpeSample>& samples, const BucketSpec& spec);

/// Per class: plain Average EPE over static points, and over dynamic points
/// the unweighted mean across non-empty speed buckets of
/// (bucket mean EPE) / (bucket mean gt speed) - the fraction of motion left
/// undescribed. Also reports the mean over classes that have dynamic points.
MetricReport bucket_normalized_epe(const std::vector<EpeSample>& samples, const BucketSpec& spec);

/// Full report (average + threeway + bucket-normalized).
MetricReport evaluate(const std::vector<EpeSample>& samples, const BucketSpec& spec);

/// Builds samples by comparing a flow field against the sequence's ground
/// truth, one sample per point of frames 0..N-1. Throws DataError when the
/// field and sequence disagree in shape or gt is missing.
std::vector<EpeSample> collect_samples(const PointCloudSequence& sequence, const FlowField& flow);

}  // namespace sceneflow
