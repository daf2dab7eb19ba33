#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sceneflow/synthgen.hpp"
#include "sceneflow/trainer.hpp"

using namespace sceneflow;

namespace {

/// Small static scene and a small prior: fast enough for unit tests.
SceneSpec static_scene(int frames = 6, int bg = 60) {
  SceneSpec spec;
  spec.num_frames = frames;
  spec.background_points = bg;
  spec.background_extent = 8.0;
  spec.seed = 21;
  return spec;
}

TrainConfig small_config(int epochs) {
  TrainConfig config;
  config.epochs = epochs;
  config.learning_rate = 1e-3;  // larger steps; tiny nets converge quickly
  config.mlp.hidden_width = 16;
  config.mlp.depth = 2;
  config.seed = 5;
  return config;
}

double mean_flow_magnitude(const FlowField& flow) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& frame : flow.frames)
    for (const auto& v : frame) {
      acc += norm(v);
      ++count;
    }
  return acc / static_cast<double>(count);
}

}  // namespace

TEST_CASE("window scheduler covers every frame at least once per epoch") {
  for (int frames : {2, 5, 6, 17, 20, 23}) {
    for (int window : {2, 5}) {
      for (int stride : {1, 2, window}) {
        const auto starts = window_starts(frames, std::min(window, frames), stride);
        std::vector<bool> seen(static_cast<std::size_t>(frames), false);
        for (int s : starts) {
          CHECK(s >= 0);
          CHECK(s + std::min(window, frames) <= frames);
          for (int t = s; t < s + std::min(window, frames); ++t)
            seen[static_cast<std::size_t>(t)] = true;
        }
        for (bool covered : seen) CHECK(covered);
      }
    }
  }
  // 5-frame sequence with 5-frame windows: exactly one window.
  CHECK(window_starts(5, 5, 5).size() == 1);
  // 20 frames tile into four disjoint windows by default.
  CHECK(window_starts(20, 5, 5) == std::vector<int>{0, 5, 10, 15});
}

TEST_CASE("fit is deterministic under a fixed seed") {
  const PointCloudSequence seq = generate(static_scene());
  const TrainConfig config = small_config(4);
  const FitResult a = fit(seq, config);
  const FitResult b = fit(seq, config);
  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e)
    CHECK(a.log.epochs[e].total == b.log.epochs[e].total);
  for (std::size_t l = 0; l < a.params.weights.size(); ++l)
    CHECK((a.params.weights[l] - b.params.weights[l]).cwiseAbs().maxCoeff() == 0.0);

  // Same seed, same data: extracted flow fields are identical too.
  const PriorFlowSource fa(a.params, config.time_encoding, seq);
  const PriorFlowSource fb(b.params, config.time_encoding, seq);
  const FlowField flow_a = extract_flow_field(fa, seq);
  const FlowField flow_b = extract_flow_field(fb, seq);
  for (std::size_t t = 0; t < flow_a.frames.size(); ++t)
    for (std::size_t i = 0; i < flow_a.frames[t].size(); ++i)
      CHECK(flow_a.frames[t][i].x == flow_b.frames[t][i].x);

  const TrainConfig other = [&] {
    TrainConfig c = config;
    c.seed = 6;
    return c;
  }();
  const FitResult c = fit(seq, other);
  CHECK(a.log.epochs[0].total != c.log.epochs[0].total);
}

TEST_CASE("fit on a static scene keeps the flow small") {
  const PointCloudSequence seq = generate(static_scene());
  const FitResult result = fit(seq, small_config(120));
  const PriorFlowSource field(result.params, TimeEncoding{}, seq);
  CHECK(mean_flow_magnitude(extract_flow_field(field, seq)) <= 0.05);
}

TEST_CASE("best epoch bookkeeping matches the recorded minimum") {
  const PointCloudSequence seq = generate(static_scene());
  const FitResult result = fit(seq, small_config(12));
  REQUIRE(result.log.best_epoch >= 0);
  double min_loss = result.log.epochs[0].total;
  for (const auto& e : result.log.epochs) min_loss = std::min(min_loss, e.total);
  CHECK(result.log.best_loss == min_loss);
  CHECK(result.log.epochs[static_cast<std::size_t>(result.log.best_epoch)].total == min_loss);
}

TEST_CASE("early stopping fires on a plateau and keeps the best parameters") {
  const PointCloudSequence seq = generate(static_scene(4, 40));
  TrainConfig config = small_config(500);
  config.early_stop_patience = 5;
  config.early_stop_min_delta = 0.5;  // absurdly demanding: plateaus immediately
  const FitResult result = fit(seq, config);
  CHECK(result.log.stop_reason == TrainLog::StopReason::EarlyStopped);
  CHECK(result.log.epochs.size() < 500);
  CHECK(result.log.epochs.size() >= 5);
}

TEST_CASE("subsequence_length truncates the training data") {
  const PointCloudSequence seq = generate(static_scene(8, 40));
  TrainConfig config = small_config(2);
  config.subsequence_length = 5;
  const FitResult result = fit(seq, config);  // must not touch frames 5..7
  CHECK(result.log.epochs.size() == 2);

  TrainConfig bad = config;
  bad.subsequence_length = 1;
  CHECK_THROWS(fit(seq, bad));
}

TEST_CASE("degenerate sequences are rejected") {
  PointCloudSequence seq;
  seq.name = "bad";
  CHECK_THROWS_AS(fit(seq, small_config(1)), DataError);
}

TEST_CASE("loss decreases materially on a simple moving scene") {
  SceneSpec spec = static_scene(6, 80);
  MoverSpec mover;
  mover.box_dims = {1.5, 1.0, 1.0};
  mover.initial_pose.translation = {0.0, 0.0, 1.0};
  mover.linear_velocity = {0.15, 0.0, 0.0};
  mover.points_per_frame = 60;
  spec.movers.push_back(mover);
  const PointCloudSequence seq = generate(spec);

  const FitResult result = fit(seq, small_config(40));
  double running_min = result.log.epochs[0].total;
  for (const auto& e : result.log.epochs) running_min = std::min(running_min, e.total);
  CHECK(running_min <= 0.5 * result.log.epochs[0].total);
}

TEST_CASE("fit_nsfp: static pair collapses to near-zero flow") {
  const PointCloudSequence seq = generate(static_scene(2, 80));
  TrainConfig config = small_config(60);
  const NsfpResult result = fit_nsfp(seq.frames[0].cloud, seq.frames[1].cloud, config);
  double mean = 0.0;
  for (const auto& v : result.flow) mean += norm(v);
  mean /= static_cast<double>(result.flow.size());
  CHECK(mean <= 0.05);
}

TEST_CASE("fit_nsfp is deterministic") {
  const PointCloudSequence seq = generate(static_scene(2, 30));
  TrainConfig config = small_config(5);
  const NsfpResult a = fit_nsfp(seq.frames[0].cloud, seq.frames[1].cloud, config);
  const NsfpResult b = fit_nsfp(seq.frames[0].cloud, seq.frames[1].cloud, config);
  REQUIRE(a.flow.size() == b.flow.size());
  for (std::size_t i = 0; i < a.flow.size(); ++i) CHECK(a.flow[i].x == b.flow[i].x);
  // The two priors start from different derived seeds.
  CHECK(a.fwd_params.weights[0] != a.bwd_params.weights[0]);
}

TEST_CASE("ablation variants apply exactly their config delta") {
  const TrainConfig base = small_config(3);

  const TrainConfig full = AblationVariant{.kind = AblationVariant::Kind::Full}.apply(base);
  CHECK(full.loss.enable_multistep == base.loss.enable_multistep);
  CHECK(full.mlp.depth == base.mlp.depth);

  const TrainConfig nm =
      AblationVariant{.kind = AblationVariant::Kind::NoMultistep}.apply(base);
  CHECK_FALSE(nm.loss.enable_multistep);
  CHECK(nm.loss.enable_cycle);

  const TrainConfig nc = AblationVariant{.kind = AblationVariant::Kind::NoCycle}.apply(base);
  CHECK_FALSE(nc.loss.enable_cycle);
  CHECK(nc.loss.enable_multistep);

  const TrainConfig deep =
      AblationVariant{.kind = AblationVariant::Kind::Depth, .value = 18}.apply(base);
  CHECK(deep.mlp.depth == 18);

  // Depth(18) really builds an 18-hidden-layer prior (19 layers with output).
  MLPConfig deep_mlp = deep.mlp;
  deep_mlp.hidden_width = 4;
  const MLPParams params = init_params(deep_mlp);
  CHECK(params.weights.size() == 19);

  CHECK(AblationVariant{.kind = AblationVariant::Kind::Subsequence, .value = 5}.name() ==
        "subsequence_5");
}

TEST_CASE("run_ablation trains and evaluates against ground truth") {
  SceneSpec spec = static_scene(5, 50);
  MoverSpec mover;
  mover.box_dims = {1.0, 1.0, 1.0};
  mover.initial_pose.translation = {0, 0, 1};
  mover.linear_velocity = {0.2, 0, 0};
  mover.points_per_frame = 30;
  spec.movers.push_back(mover);
  const PointCloudSequence seq = generate(spec);

  const AblationOutcome outcome =
      run_ablation(seq, small_config(5), AblationVariant{.kind = AblationVariant::Kind::Full});
  CHECK(outcome.report.valid_samples == 4 * 80);
  CHECK(outcome.report.mean_dynamic_normalized_epe.has_value());

  const AblationOutcome sub = run_ablation(
      seq, small_config(2),
      AblationVariant{.kind = AblationVariant::Kind::Subsequence, .value = 3});
  CHECK(sub.report.valid_samples == 2 * 80);  // evaluated on the truncated frames
}

TEST_CASE("train log file format") {
  const PointCloudSequence seq = generate(static_scene(4, 30));
  TrainConfig config = small_config(3);
  config.loss.enable_multistep = false;
  const FitResult result = fit(seq, config);
  const auto path = std::filesystem::temp_directory_path() / "sceneflow_trainlog_test.log";
  save_train_log(result.log, path);

  std::ifstream is(path);
  std::string content((std::istreambuf_iterator<char>(is)), {});
  CHECK(content.find("# loss.enable_multistep=false") != std::string::npos);
  CHECK(content.find("epoch,total_loss") != std::string::npos);
  CHECK(content.find("\n0,") != std::string::npos);
  CHECK(content.find("# stop_reason=completed") != std::string::npos);
  CHECK(content.find("# best_epoch=") != std::string::npos);
}
