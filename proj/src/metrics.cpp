#include "sceneflow/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sceneflow {

void BucketSpec::validate() const {
  if (!(static_threshold > 0.0) || !(speed_bucket_width > 0.0) || max_buckets < 1)
    throw std::invalid_argument("BucketSpec: thresholds must be positive");
}

int BucketSpec::bucket_of(double gt_speed) const {
  const int b = static_cast<int>((gt_speed - static_threshold) / speed_bucket_width);
  return std::min(std::max(b, 0), max_buckets - 1);
}

double epe(const Point3& predicted, const Point3& ground_truth) {
  return norm(predicted - ground_truth);
}

double average_epe(const std::vector<EpeSample>& samples) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& s : samples) {
    if (!s.valid) continue;
    acc += s.epe;
    ++count;
  }
  if (count == 0) throw DataError("average_epe: no valid samples");
  return acc / static_cast<double>(count);
}

namespace {
struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  std::optional<double> mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }
};
}  // namespace

ThreewayEpe threeway_epe(const std::vector<EpeSample>& samples, const BucketSpec& spec) {
  spec.validate();
  Accumulator fg_dynamic, fg_static, bg_static;
  for (const auto& s : samples) {
    if (!s.valid) continue;
    const bool dynamic = s.gt_speed >= spec.static_threshold;
    if (s.is_foreground && dynamic) fg_dynamic.add(s.epe);
    else if (s.is_foreground) fg_static.add(s.epe);
    else if (!dynamic) bg_static.add(s.epe);
    // background-dynamic points have no bucket and are dropped
  }
  ThreewayEpe out;
  out.fg_dynamic = fg_dynamic.mean();
  out.fg_static = fg_static.mean();
  out.bg_static = bg_static.mean();
  double sum = 0.0;
  int buckets = 0;
  for (const auto& m : {out.fg_dynamic, out.fg_static, out.bg_static}) {
    if (!m) continue;
    sum += *m;
    ++buckets;
  }
  if (buckets == 0) throw DataError("threeway_epe: no valid samples");
  out.mean = sum / static_cast<double>(buckets);
  return out;
}

MetricReport bucket_normalized_epe(const std::vector<EpeSample>& samples, const BucketSpec& spec) {
  spec.validate();
  struct PerBucket {
    Accumulator epe;
    Accumulator speed;
  };
  struct PerClass {
    Accumulator static_epe;
    std::map<int, PerBucket> buckets;
  };
  std::map<std::int32_t, PerClass> classes;

  std::size_t valid_count = 0;
  for (const auto& s : samples) {
    if (!s.valid) continue;
    ++valid_count;
    PerClass& c = classes[s.class_id];
    if (s.gt_speed < spec.static_threshold) {
      c.static_epe.add(s.epe);
    } else {
      PerBucket& b = c.buckets[spec.bucket_of(s.gt_speed)];
      b.epe.add(s.epe);
      b.speed.add(s.gt_speed);
    }
  }
  if (valid_count == 0) throw DataError("bucket_normalized_epe: no valid samples");

  MetricReport report;
  report.valid_samples = valid_count;
  Accumulator mean_dyn;
  for (const auto& [class_id, c] : classes) {
    ClassMetrics m;
    m.static_epe = c.static_epe.mean();
    if (!c.buckets.empty()) {
      double sum = 0.0;
      for (const auto& [bucket, b] : c.buckets) {
        (void)bucket;
        // normalize by the bucket's empirical mean speed so perfect
        // predictions score exactly zero
        sum += *b.epe.mean() / *b.speed.mean();
      }
      m.dynamic_normalized_epe = sum / static_cast<double>(c.buckets.size());
      mean_dyn.add(*m.dynamic_normalized_epe);
    }
    report.per_class[class_id] = m;
  }
  report.mean_dynamic_normalized_epe = mean_dyn.mean();
  return report;
}

MetricReport evaluate(const std::vector<EpeSample>& samples, const BucketSpec& spec) {
  MetricReport report = bucket_normalized_epe(samples, spec);
  report.average_epe = average_epe(samples);
  report.threeway = threeway_epe(samples, spec);
  return report;
}

std::vector<EpeSample> collect_samples(const PointCloudSequence& sequence, const FlowField& flow) {
  if (flow.frames.size() + 1 != sequence.frames.size())
    throw DataError("collect_samples: flow field frame count does not match sequence");
  std::vector<EpeSample> samples;
  for (std::size_t t = 0; t < flow.frames.size(); ++t) {
    const Frame& frame = sequence.frames[t];
    if (!frame.gt) throw DataError("collect_samples: frame " + std::to_string(t) + " has no gt");
    if (flow.frames[t].size() != frame.cloud.size())
      throw DataError("collect_samples: flow count mismatch at frame " + std::to_string(t));
    const GroundTruth& gt = *frame.gt;
    for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
      EpeSample s;
      s.epe = epe(flow.frames[t][i], gt.flow[i]);
      s.gt_speed = norm(gt.flow[i]);
      s.class_id = gt.class_id[i];
      s.is_foreground = gt.is_foreground[i] != 0;
      s.valid = gt.valid[i] != 0;
      samples.push_back(s);
    }
  }
  return samples;
}

}  // namespace sceneflow
