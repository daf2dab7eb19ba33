#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sceneflow/activation.hpp"
#include "sceneflow/geometry.hpp"

namespace sceneflow::ad {

struct NodeRef {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;

/// Reverse-mode autodiff over a dynamic computation graph.
///
/// Nodes are appended in topological order and hold matrix values (a point
/// cloud or a layer activation is one node), so the backward pass runs at
/// GEMM granularity. Values and gradients live in two flat arenas that are
/// reused across reset() calls to avoid allocation churn in training loops.
///
/// Nearest-neighbor correspondences inside the Chamfer ops are captured at
/// record time and treated as constants: gradients flow through point
/// positions, not through the argmin.
class Tape {
 public:
  // ---- graph construction -------------------------------------------------
  NodeRef constant(const Eigen::Ref<const RowMat>& value);
  NodeRef parameter(const Eigen::Ref<const RowMat>& value);

  /// y = x * W^T + b, with x (n x i), W (o x i), b (1 x o).
  NodeRef affine(NodeRef x, NodeRef weight, NodeRef bias);

  NodeRef activation(NodeRef x, Activation act, double sigma);

  /// relu(x * W^T + b) as one node. ReLU's derivative is recoverable from
  /// the output alone, so the pre-activation is never materialized; this
  /// halves the tape footprint of the hidden layers.
  NodeRef affine_relu(NodeRef x, NodeRef weight, NodeRef bias);

  /// alpha * a + beta * b (same shapes).
  NodeRef add_scaled(NodeRef a, NodeRef b, double alpha, double beta);

  /// [a | b] column concatenation.
  NodeRef concat_cols(NodeRef a, NodeRef b);

  /// mean_i within_i * ||pos_i - targets[nn[i]]||^2  (truncated Chamfer, A->B half).
  NodeRef chamfer_to_targets(NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                             std::span<const std::int32_t> nn,
                             std::span<const std::uint8_t> within);

  /// mean_j within_j * ||targets_j - pos[nn[j]]||^2  (B->A half; gradient
  /// scatters into the matched predicted rows).
  NodeRef chamfer_from_targets(NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                               std::span<const std::int32_t> nn,
                               std::span<const std::uint8_t> within);

  /// mean_i ||row_i||_2; rows at exactly zero contribute zero gradient.
  NodeRef mean_row_norm(NodeRef x);

  NodeRef reduce_sum(NodeRef x);

  /// sum_i coeffs[i] * scalars[i].
  NodeRef scalar_sum(std::span<const NodeRef> scalars, std::span<const double> coeffs);

  // ---- values & gradients -------------------------------------------------
  ConstMatView value(NodeRef n) const;
  double scalar_value(NodeRef n) const;

  /// Reverse pass from a scalar loss node. Visits every node exactly once in
  /// reverse topological order. May be called once per recorded graph.
  void backward(NodeRef loss);

  /// Gradient of the last backward() w.r.t. node n (zeros if untouched).
  ConstMatView grad(NodeRef n) const;

  std::size_t size() const { return nodes_.size(); }

  /// Drops all nodes but keeps arena capacity for reuse.
  void reset();

 private:
  enum class OpKind : std::uint8_t {
    Constant,
    Parameter,
    Affine,
    AffineRelu,
    Activation,
    AddScaled,
    ConcatCols,
    ChamferTo,
    ChamferFrom,
    MeanRowNorm,
    ReduceSum,
    ScalarSum,
  };

  struct Node {
    OpKind kind;
    bool requires_grad = false;
    std::int32_t rows = 0, cols = 0;
    std::int64_t offset = 0;  // into the value/grad arenas
    std::int32_t in0 = -1, in1 = -1, in2 = -1;
    std::int32_t payload = -1;
    double p0 = 0.0, p1 = 0.0;  // op parameters (alpha/beta, sigma, ...)
  };

  struct ChamferPayload {
    RowMat targets;
    std::vector<std::int32_t> nn;
    std::vector<std::uint8_t> within;
  };

  struct SumPayload {
    std::vector<std::int32_t> ids;
    std::vector<double> coeffs;
  };

  NodeRef push(OpKind kind, std::int32_t rows, std::int32_t cols, NodeRef a = {},
               NodeRef b = {}, NodeRef c = {});
  MatView value_mut(NodeRef n);
  MatView grad_mut(const Node& n);
  const Node& node(NodeRef n) const;
  ChamferPayload& new_chamfer_payload(std::int32_t& index);
  NodeRef record_chamfer(OpKind kind, NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                         std::span<const std::int32_t> nn,
                         std::span<const std::uint8_t> within);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  // Gradients are assigned on first touch instead of zero-initializing the
  // whole arena; this tracks which buffers hold live data.
  std::vector<std::uint8_t> grad_ready_;
  std::int64_t used_ = 0;

  std::vector<ChamferPayload> chamfer_payloads_;
  std::size_t chamfer_count_ = 0;
  std::vector<SumPayload> sum_payloads_;
  std::size_t sum_count_ = 0;
};

}  // namespace sceneflow::ad
