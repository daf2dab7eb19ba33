#pragma once

#include <cstdint>
#include <vector>

#include "sceneflow/kdtree.hpp"
#include "sceneflow/tape.hpp"

namespace sceneflow {

struct ChamferConfig {
  double truncation_radius = 2.0;  // meters; contributions beyond it are zero
  bool symmetric = true;

  void validate() const;
};

/// Nearest-neighbor matching of one cloud into another, with the truncation
/// mask. Computed once per loss evaluation and then treated as constant.
struct ChamferMatch {
  std::vector<std::int32_t> nn;
  std::vector<std::uint8_t> within;
};

ChamferMatch match_into(const Eigen::Ref<const RowMat>& queries, const NeighborIndex& targets,
                        double truncation_radius);

/// Both matching directions of one symmetric Chamfer term.
struct ChamferCorrespondence {
  ChamferMatch a_to_b;
  ChamferMatch b_to_a;  // empty when one-directional
};

/// mean_a ||a - NN_B(a)||^2 (truncated), plus the mirrored term when
/// symmetric. Accelerated by NeighborIndex; equals brute force exactly.
double truncated_chamfer(const PointCloud& a, const PointCloud& b, const ChamferConfig& config);

/// O(N^2) reference implementation (test oracle).
double truncated_chamfer_brute_force(const PointCloud& a, const PointCloud& b,
                                     const ChamferConfig& config);

/// Value of one symmetric/one-directional term given frozen correspondences.
double chamfer_value(const Eigen::Ref<const RowMat>& a, const Eigen::Ref<const RowMat>& b,
                     const ChamferCorrespondence& corr, const ChamferConfig& config);

/// Tape-backed truncated Chamfer between predicted positions and a constant
/// target cloud. When corr is null the correspondences are computed from the
/// current predicted values (building a temporary index over them for the
/// symmetric half); a non-null corr is filled on first use and reused after,
/// which keeps finite-difference probes on fixed correspondences.
ad::NodeRef truncated_chamfer(ad::Tape& tape, ad::NodeRef predicted,
                              const Eigen::Ref<const RowMat>& target,
                              const NeighborIndex& target_index, const ChamferConfig& config,
                              ChamferCorrespondence* corr = nullptr);

}  // namespace sceneflow
