#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sceneflow/losses.hpp"
#include "sceneflow/metrics.hpp"

namespace sceneflow {

struct TrainConfig {
  int epochs = 1000;
  double learning_rate = 8e-5;
  int minibatch_frames = 5;
  int early_stop_patience = 100;     // epochs without material improvement
  double early_stop_min_delta = 1e-4;  // relative improvement threshold
  std::uint64_t seed = 0;
  std::optional<int> subsequence_length;  // truncate to the first n frames
  // 0 tiles the sequence with disjoint windows (plus a tail window); a
  // positive stride overrides the spacing between window starts.
  int window_stride = 0;
  LossConfig loss;
  MLPConfig mlp;
  TimeEncoding time_encoding;

  void validate() const;
};

struct EpochStats {
  double total = 0.0;
  double chamfer_fwd = 0.0;
  double chamfer_bwd = 0.0;
  double cycle = 0.0;
};

struct TrainLog {
  enum class StopReason { Completed, EarlyStopped };

  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based
  double best_loss = 0.0;
  StopReason stop_reason = StopReason::Completed;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

struct FitResult {
  MLPParams params;  // from the best epoch
  TrainLog log;
};

/// Full-sequence optimization of the space-time prior: epochs iterate over
/// contiguous minibatch_frames-sized windows in seeded-shuffled order; each
/// window takes one Adam step on the summed per-frame objective. Training
/// stops early after early_stop_patience epochs without a relative
/// improvement of early_stop_min_delta over the best epoch loss.
FitResult fit(const PointCloudSequence& sequence, const TrainConfig& config);

struct NsfpResult {
  std::vector<Point3> flow;  // forward flow on pt from the best step
  double zero_flow_chamfer = 0.0;
  double final_chamfer = 0.0;
  TrainLog log;
  MLPParams fwd_params;
  MLPParams bwd_params;
};

/// Two-frame NSFP baseline: two fresh 3D-input priors against nsfp_loss,
/// full-batch steps with the same Adam and early-stopping machinery.
NsfpResult fit_nsfp(const PointCloud& pt, const PointCloud& pnext, const TrainConfig& config);

struct AblationVariant {
  enum class Kind { Full, NoMultistep, NoCycle, Subsequence, Depth, TimeEnc, Act };
  Kind kind = Kind::Full;
  int value = 0;  // Subsequence length or Depth
  TimeEncoding::Mode encoding = TimeEncoding::Mode::Normalized;
  Activation activation = Activation::ReLU;

  std::string name() const;
  TrainConfig apply(TrainConfig base) const;
};

struct AblationOutcome {
  MetricReport report;
  TrainLog log;
};

/// Trains with the variant's config delta and evaluates the extracted flow
/// field against the sequence's ground truth.
AblationOutcome run_ablation(const PointCloudSequence& sequence, const TrainConfig& base,
                             const AblationVariant& variant);

/// First n frames (Fig.-style sequence-length ablations).
PointCloudSequence truncate_sequence(const PointCloudSequence& sequence, int n);

/// Window start indices for one epoch (before shuffling). Every frame index
/// is covered by at least one window; a tail window is added when the stride
/// does not divide the frame count.
std::vector<int> window_starts(int frame_count, int window, int stride);

/// "epoch,total_loss" lines between a config-echo header and a stop-reason
/// footer.
void save_train_log(const TrainLog& log, const std::filesystem::path& path);

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);
std::string time_encoding_name(TimeEncoding::Mode m);
TimeEncoding::Mode parse_time_encoding(const std::string& name);

}  // namespace sceneflow
