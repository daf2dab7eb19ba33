#include <doctest.h>

#include "sceneflow/metrics.hpp"
#include "sceneflow/rng.hpp"

using namespace sceneflow;

namespace {
EpeSample sample(double err, double speed, std::int32_t cls, bool fg, bool valid = true) {
  return {err, speed, cls, fg, valid};
}
}  // namespace

TEST_CASE("epe is the Euclidean residual") {
  CHECK(epe({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(epe({0, 0, 0}, {1, 0, 0}) == 1.0);
  CHECK(epe({3, 4, 0}, {0, 0, 0}) == 5.0);
}

TEST_CASE("average_epe over valid samples") {
  CHECK(average_epe({sample(0, 0, 0, false), sample(0, 0, 0, false)}) == 0.0);
  CHECK(average_epe({sample(1, 0, 0, false), sample(3, 0, 0, false)}) == 2.0);

  std::vector<EpeSample> mixed{sample(1, 0, 0, false)};
  for (int i = 0; i < 100; ++i) mixed.push_back(sample(100, 0, 0, false, false));
  CHECK(average_epe(mixed) == 1.0);

  CHECK_THROWS_AS(average_epe({sample(1, 0, 0, false, false)}), DataError);
  CHECK_THROWS_AS(average_epe({}), DataError);
}

TEST_CASE("threeway epe: one sample per bucket") {
  // fg dynamic 0.3, fg static 0.1, bg static 0.02 -> mean 0.14
  const std::vector<EpeSample> samples{
      sample(0.3, 0.2, 1, true),    // fg dynamic (speed >= 0.05)
      sample(0.1, 0.01, 1, true),   // fg static
      sample(0.02, 0.0, 0, false),  // bg static
  };
  const ThreewayEpe t = threeway_epe(samples, BucketSpec{});
  CHECK(*t.fg_dynamic == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(*t.fg_static == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(*t.bg_static == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(t.mean == doctest::Approx(0.14).epsilon(1e-12));
}

TEST_CASE("threeway epe: empty buckets are skipped, not zero") {
  const std::vector<EpeSample> samples{sample(0.01, 0.0, 0, false),
                                       sample(0.01, 0.0, 0, false)};
  const ThreewayEpe t = threeway_epe(samples, BucketSpec{});
  CHECK_FALSE(t.fg_dynamic.has_value());
  CHECK_FALSE(t.fg_static.has_value());
  CHECK(*t.bg_static == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(t.mean == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("threeway epe: background-dynamic points are dropped") {
  const std::vector<EpeSample> samples{
      sample(0.5, 0.2, 0, false),  // bg dynamic: no bucket for it
      sample(0.02, 0.0, 0, false),
  };
  const ThreewayEpe t = threeway_epe(samples, BucketSpec{});
  CHECK(*t.bg_static == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(t.mean == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("threeway buckets are disjoint and cover valid non-bg-dynamic samples") {
  Rng rng(5);
  std::vector<EpeSample> samples;
  for (int i = 0; i < 500; ++i)
    samples.push_back(sample(rng.uniform(0, 1), rng.uniform(0, 0.2), 1, rng.uniform() < 0.5,
                             rng.uniform() < 0.9));
  const BucketSpec spec;
  std::size_t covered = 0, eligible = 0;
  double weighted = 0.0;
  for (const auto& s : samples) {
    if (!s.valid) continue;
    const bool dynamic = s.gt_speed >= spec.static_threshold;
    const int memberships = (s.is_foreground && dynamic ? 1 : 0) +
                            (s.is_foreground && !dynamic ? 1 : 0) +
                            (!s.is_foreground && !dynamic ? 1 : 0);
    CHECK(memberships <= 1);
    covered += static_cast<std::size_t>(memberships);
    if (memberships || (!s.is_foreground && dynamic)) ++eligible;
    (void)weighted;
  }
  CHECK(eligible >= covered);
  CHECK(covered > 0);
}

TEST_CASE("bucket normalized epe: single bucket ratio") {
  // Every point moves 0.10 m/interval and errs by 0.05: half the motion is
  // not described.
  std::vector<EpeSample> samples;
  for (int i = 0; i < 10; ++i) samples.push_back(sample(0.05, 0.10, 7, true));
  const MetricReport report = bucket_normalized_epe(samples, BucketSpec{});
  REQUIRE(report.per_class.count(7) == 1);
  CHECK(*report.per_class.at(7).dynamic_normalized_epe == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(*report.mean_dynamic_normalized_epe == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bucket normalized epe: perfect predictions score zero everywhere") {
  std::vector<EpeSample> samples{sample(0.0, 0.2, 1, true), sample(0.0, 0.02, 1, true),
                                 sample(0.0, 0.0, 0, false)};
  const MetricReport report = evaluate(samples, BucketSpec{});
  CHECK(report.average_epe == 0.0);
  CHECK(report.threeway.mean == 0.0);
  CHECK(*report.mean_dynamic_normalized_epe == 0.0);
  CHECK(*report.per_class.at(1).static_epe == 0.0);
}

TEST_CASE("bucket normalized epe: two classes expose the small-object failure") {
  std::vector<EpeSample> samples;
  // Class 1: fast and well described -> normalized 0.1.
  for (int i = 0; i < 5; ++i) samples.push_back(sample(0.02, 0.2, 1, true));
  // Class 2: slow and poorly described -> normalized 0.9.
  for (int i = 0; i < 5; ++i) samples.push_back(sample(0.054, 0.06, 2, true));
  const MetricReport report = bucket_normalized_epe(samples, BucketSpec{});
  CHECK(*report.per_class.at(1).dynamic_normalized_epe == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(*report.per_class.at(2).dynamic_normalized_epe == doctest::Approx(0.9).epsilon(1e-12));
  // The unweighted class mean hides neither: 0.5.
  CHECK(*report.mean_dynamic_normalized_epe == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bucket normalized epe: classes without dynamic points are excluded from the mean") {
  std::vector<EpeSample> samples{sample(0.05, 0.1, 1, true), sample(0.3, 0.0, 0, false)};
  const MetricReport report = bucket_normalized_epe(samples, BucketSpec{});
  CHECK(report.per_class.at(0).dynamic_normalized_epe == std::nullopt);
  CHECK(*report.per_class.at(0).static_epe == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(*report.mean_dynamic_normalized_epe == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ratio invariance: scaling gt and predictions together changes nothing") {
  Rng rng(6);
  std::vector<EpeSample> base;
  for (int i = 0; i < 200; ++i) {
    const double speed = rng.uniform(0.05, 0.6);
    const double err = rng.uniform(0, 0.3);
    base.push_back(sample(err, speed, static_cast<std::int32_t>(1 + rng.bounded(3)), true));
  }
  for (double scale : {2.0, 7.5}) {
    std::vector<EpeSample> scaled = base;
    for (auto& s : scaled) {
      s.epe *= scale;
      s.gt_speed *= scale;
    }
    // Scaling can move points across bucket boundaries, so compare per-bucket
    // ratios via a spec whose boundaries scale along.
    BucketSpec spec;
    spec.static_threshold *= scale;
    spec.speed_bucket_width *= scale;
    const MetricReport a = bucket_normalized_epe(base, BucketSpec{});
    const MetricReport b = bucket_normalized_epe(scaled, spec);
    for (const auto& [cls, m] : a.per_class) {
      REQUIRE(b.per_class.count(cls) == 1);
      CHECK(*b.per_class.at(cls).dynamic_normalized_epe ==
            doctest::Approx(*m.dynamic_normalized_epe).epsilon(1e-9));
    }
  }
}

TEST_CASE("average epe equals the weighted mean of threeway buckets") {
  Rng rng(7);
  std::vector<EpeSample> samples;
  for (int i = 0; i < 300; ++i) {
    const bool fg = rng.uniform() < 0.4;
    // keep speeds consistent with the three buckets (no bg-dynamic)
    const double speed = fg ? rng.uniform(0, 0.3) : rng.uniform(0, 0.049);
    samples.push_back(sample(rng.uniform(0, 1), speed, fg ? 1 : 0, fg));
  }
  const BucketSpec spec;
  const ThreewayEpe t = threeway_epe(samples, spec);
  double weighted = 0.0;
  std::size_t count = 0;
  auto add = [&](const std::optional<double>& mean, std::size_t n) {
    if (mean) {
      weighted += *mean * static_cast<double>(n);
      count += n;
    }
  };
  std::size_t n_fd = 0, n_fs = 0, n_bs = 0;
  for (const auto& s : samples) {
    const bool dynamic = s.gt_speed >= spec.static_threshold;
    if (s.is_foreground && dynamic) ++n_fd;
    else if (s.is_foreground) ++n_fs;
    else ++n_bs;
  }
  add(t.fg_dynamic, n_fd);
  add(t.fg_static, n_fs);
  add(t.bg_static, n_bs);
  CHECK(weighted / static_cast<double>(count) ==
        doctest::Approx(average_epe(samples)).epsilon(1e-12));
}

TEST_CASE("collect_samples validates shapes and gt presence") {
  PointCloudSequence seq;
  seq.name = "m";
  for (int t = 0; t < 3; ++t) {
    Frame f;
    f.timestamp = 0.1 * t;
    f.cloud.points = {{0, 0, 0}, {1, 0, 0}};
    f.gt.emplace();
    f.gt->flow = {{0.1, 0, 0}, {0, 0, 0}};
    f.gt->class_id = {1, 0};
    f.gt->valid = {1, 1};
    f.gt->is_foreground = {1, 0};
    seq.frames.push_back(f);
  }
  FlowField flow;
  flow.frames = {{{0.1, 0, 0}, {0, 0, 0}}, {{0.1, 0, 0}, {0, 0, 0}}};
  const auto samples = collect_samples(seq, flow);
  CHECK(samples.size() == 4);
  CHECK(average_epe(samples) == 0.0);

  FlowField bad = flow;
  bad.frames.pop_back();
  CHECK_THROWS_AS(collect_samples(seq, bad), DataError);
  bad = flow;
  bad.frames[0].pop_back();
  CHECK_THROWS_AS(collect_samples(seq, bad), DataError);

  seq.frames[0].gt.reset();
  CHECK_THROWS_AS(collect_samples(seq, flow), DataError);
}
