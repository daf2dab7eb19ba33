#pragma once

#include <vector>

#include "sceneflow/chamfer.hpp"
#include "sceneflow/flow.hpp"

namespace sceneflow {

struct LossConfig {
  int max_k = 3;
  double cycle_weight = 0.01;
  bool enable_multistep = true;  // false keeps only k = 1 terms
  bool enable_cycle = true;
  ChamferConfig chamfer;

  void validate() const;
  int effective_max_k() const { return enable_multistep ? max_k : 1; }
};

struct LossTerm {
  enum class Kind { Chamfer, Cycle };
  Kind kind = Kind::Chamfer;
  Direction direction = Direction::Fwd;  // Chamfer terms only
  int k = 0;                             // Chamfer terms only
  double value = 0.0;  // contribution to the total (cycle stored pre-weighted)
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<LossTerm> terms;

  const LossTerm* find_chamfer(Direction d, int k) const;
  const LossTerm* find_cycle() const;
};

/// Precomputed per-frame data shared by every loss evaluation on a sequence:
/// packed positions, neighbor indexes for Chamfer targets, and timestamps.
struct SequenceContext {
  FrameTimes times;
  TimeNormalizer normalizer;
  std::vector<RowMat> positions;
  std::vector<NeighborIndex> indexes;

  int frame_count() const { return static_cast<int>(positions.size()); }
  static SequenceContext build(const PointCloudSequence& sequence);
};

/// Frozen nearest-neighbor correspondences of one loss evaluation, in
/// recording order. Lets finite-difference probes re-evaluate the loss with
/// the matching held fixed.
struct EulerFlowCorrCache {
  std::vector<ChamferCorrespondence> chamfer;
  bool filled = false;
};

/// The full objective at one source frame: truncated Chamfer of the k-step
/// forward and backward Euler rollouts against the frames k steps away
/// (k = 1..max_k, terms outside the sequence omitted), plus the weighted
/// one-step forward-backward cycle penalty. Value route over any field.
LossBreakdown eulerflow_loss(const FlowSource& field, const SequenceContext& ctx, int frame,
                             const LossConfig& config, EulerFlowCorrCache* cache = nullptr);

/// Tape route of the same objective for training.
struct TapeLoss {
  LossBreakdown breakdown;
  ad::NodeRef total;
};
TapeLoss eulerflow_loss(ad::Tape& tape, const ParamNodes& pnodes, const MLPConfig& mlp_config,
                        const TimeEncoding& encoding, const SequenceContext& ctx, int frame,
                        const LossConfig& config, EulerFlowCorrCache* cache = nullptr);

/// NSFP two-frame objective: truncated Chamfer of P_t displaced by the
/// forward network against P_{t+1}, plus the unweighted cycle residual of
/// the backward network queried at the displaced points. The networks take
/// raw 3D positions (no time or direction input).
struct NsfpLoss {
  double total = 0.0;
  double chamfer = 0.0;
  double cycle = 0.0;
  ad::NodeRef total_node;
};
NsfpLoss nsfp_loss(ad::Tape& tape, const ParamNodes& fwd_nodes, const ParamNodes& bwd_nodes,
                   const MLPConfig& config, const Eigen::Ref<const RowMat>& pt,
                   const Eigen::Ref<const RowMat>& pnext, const NeighborIndex& next_index,
                   const ChamferConfig& chamfer_config, ChamferCorrespondence* corr = nullptr);

/// Value-only route (reference for the tape route and spec-level API).
double nsfp_loss_value(const MLPParams& fwd, const MLPParams& bwd, const PointCloud& pt,
                       const PointCloud& pnext, const ChamferConfig& chamfer_config);

}  // namespace sceneflow
