#include "sceneflow/losses.hpp"

#include <stdexcept>

namespace sceneflow {

void LossConfig::validate() const {
  if (max_k < 1) throw std::invalid_argument("LossConfig: max_k must be >= 1");
  if (cycle_weight < 0.0) throw std::invalid_argument("LossConfig: cycle_weight must be >= 0");
  chamfer.validate();
}

const LossTerm* LossBreakdown::find_chamfer(Direction d, int k) const {
  for (const auto& t : terms)
    if (t.kind == LossTerm::Kind::Chamfer && t.direction == d && t.k == k) return &t;
  return nullptr;
}

const LossTerm* LossBreakdown::find_cycle() const {
  for (const auto& t : terms)
    if (t.kind == LossTerm::Kind::Cycle) return &t;
  return nullptr;
}

SequenceContext SequenceContext::build(const PointCloudSequence& sequence) {
  SequenceContext ctx;
  ctx.times = FrameTimes::from_sequence(sequence);
  ctx.normalizer = TimeNormalizer::from_times(ctx.times);
  ctx.positions.reserve(sequence.frames.size());
  ctx.indexes.reserve(sequence.frames.size());
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    const Frame& f = sequence.frames[t];
    if (f.cloud.empty())
      throw DataError("loss context: frame " + std::to_string(t) + " is empty");
    ctx.positions.emplace_back(f.cloud.as_matrix());
    ctx.indexes.emplace_back(f.cloud);
  }
  return ctx;
}

namespace {

ChamferCorrespondence* cache_slot(EulerFlowCorrCache* cache, std::size_t& cursor,
                                  ChamferCorrespondence& local) {
  if (!cache) return &local;
  if (!cache->filled) {
    cache->chamfer.emplace_back();
    return &cache->chamfer.back();
  }
  if (cursor >= cache->chamfer.size())
    throw std::logic_error("eulerflow_loss: correspondence cache shape mismatch");
  return &cache->chamfer[cursor++];
}

void fill_correspondence(ChamferCorrespondence& corr, const Eigen::Ref<const RowMat>& pred,
                         const Eigen::Ref<const RowMat>& target, const NeighborIndex& target_index,
                         const ChamferConfig& config) {
  if (!corr.a_to_b.nn.empty()) return;  // frozen from a previous evaluation
  corr.a_to_b = match_into(pred, target_index, config.truncation_radius);
  if (config.symmetric) {
    const NeighborIndex pred_index(PointCloud::from_matrix(pred));
    corr.b_to_a = match_into(target, pred_index, config.truncation_radius);
  }
}

}  // namespace

LossBreakdown eulerflow_loss(const FlowSource& field, const SequenceContext& ctx, int frame,
                             const LossConfig& config, EulerFlowCorrCache* cache) {
  config.validate();
  const int last = ctx.frame_count() - 1;
  if (frame < 0 || frame > last) throw std::out_of_range("eulerflow_loss: frame out of range");

  LossBreakdown out;
  std::size_t cursor = 0;
  RowMat fwd_one_step;

  for (Direction dir : {Direction::Fwd, Direction::Bwd}) {
    const int step = dir == Direction::Fwd ? 1 : -1;
    RowMat cur = ctx.positions[static_cast<std::size_t>(frame)];
    for (int k = 1; k <= config.effective_max_k(); ++k) {
      const int target = frame + step * k;
      if (target < 0 || target > last) break;
      const double t_query = ctx.times.stamps[static_cast<std::size_t>(frame + step * (k - 1))];
      cur += field.query(cur, t_query, dir);
      if (dir == Direction::Fwd && k == 1) fwd_one_step = cur;

      ChamferCorrespondence local;
      ChamferCorrespondence* corr = cache_slot(cache, cursor, local);
      fill_correspondence(*corr, cur, ctx.positions[static_cast<std::size_t>(target)],
                          ctx.indexes[static_cast<std::size_t>(target)], config.chamfer);
      const double value = chamfer_value(cur, ctx.positions[static_cast<std::size_t>(target)],
                                         *corr, config.chamfer);
      out.terms.push_back({LossTerm::Kind::Chamfer, dir, k, value});
      out.total += value;
    }
  }

  if (config.enable_cycle && frame + 1 <= last) {
    const double t_back = ctx.times.stamps[static_cast<std::size_t>(frame + 1)];
    const RowMat back = fwd_one_step + field.query(fwd_one_step, t_back, Direction::Bwd);
    const RowMat diff = back - ctx.positions[static_cast<std::size_t>(frame)];
    double raw = 0.0;
    for (Eigen::Index i = 0; i < diff.rows(); ++i) raw += diff.row(i).norm();
    raw /= static_cast<double>(diff.rows());
    const double value = config.cycle_weight * raw;
    out.terms.push_back({LossTerm::Kind::Cycle, Direction::Fwd, 0, value});
    out.total += value;
  }

  if (cache && !cache->filled) cache->filled = true;
  return out;
}

TapeLoss eulerflow_loss(ad::Tape& tape, const ParamNodes& pnodes, const MLPConfig& mlp_config,
                        const TimeEncoding& encoding, const SequenceContext& ctx, int frame,
                        const LossConfig& config, EulerFlowCorrCache* cache) {
  config.validate();
  if (mlp_config.input_dim != encoding.input_dims())
    throw std::invalid_argument("eulerflow_loss: network input_dim does not match encoding");
  const int last = ctx.frame_count() - 1;
  if (frame < 0 || frame > last) throw std::out_of_range("eulerflow_loss: frame out of range");

  TapeLoss out;
  std::size_t cursor = 0;
  std::vector<ad::NodeRef> term_nodes;
  std::vector<double> coeffs;

  const ad::NodeRef start = tape.constant(ctx.positions[static_cast<std::size_t>(frame)]);
  const Eigen::Index n = ctx.positions[static_cast<std::size_t>(frame)].rows();
  ad::NodeRef fwd_one_step;

  auto one_step = [&](ad::NodeRef pos, double t_query, Direction dir) {
    const RowMat block =
        encode_time_direction(t_query, dir, ctx.normalizer, encoding, ctx.times);
    const ad::NodeRef input = tape.concat_cols(pos, tape.constant(block.replicate(n, 1)));
    const ad::NodeRef flow = mlp_apply(tape, pnodes, mlp_config, input);
    return tape.add_scaled(pos, flow, 1.0, 1.0);
  };

  for (Direction dir : {Direction::Fwd, Direction::Bwd}) {
    const int step = dir == Direction::Fwd ? 1 : -1;
    ad::NodeRef cur = start;
    for (int k = 1; k <= config.effective_max_k(); ++k) {
      const int target = frame + step * k;
      if (target < 0 || target > last) break;
      const double t_query = ctx.times.stamps[static_cast<std::size_t>(frame + step * (k - 1))];
      cur = one_step(cur, t_query, dir);
      if (dir == Direction::Fwd && k == 1) fwd_one_step = cur;

      ChamferCorrespondence local;
      ChamferCorrespondence* corr = cache_slot(cache, cursor, local);
      const ad::NodeRef term = truncated_chamfer(
          tape, cur, ctx.positions[static_cast<std::size_t>(target)],
          ctx.indexes[static_cast<std::size_t>(target)], config.chamfer, corr);
      out.breakdown.terms.push_back(
          {LossTerm::Kind::Chamfer, dir, k, tape.scalar_value(term)});
      term_nodes.push_back(term);
      coeffs.push_back(1.0);
    }
  }

  if (config.enable_cycle && frame + 1 <= last) {
    const double t_back = ctx.times.stamps[static_cast<std::size_t>(frame + 1)];
    const ad::NodeRef back = one_step(fwd_one_step, t_back, Direction::Bwd);
    const ad::NodeRef diff = tape.add_scaled(back, start, 1.0, -1.0);
    const ad::NodeRef raw = tape.mean_row_norm(diff);
    out.breakdown.terms.push_back({LossTerm::Kind::Cycle, Direction::Fwd, 0,
                                   config.cycle_weight * tape.scalar_value(raw)});
    term_nodes.push_back(raw);
    coeffs.push_back(config.cycle_weight);
  }

  out.total = tape.scalar_sum(term_nodes, coeffs);
  out.breakdown.total = tape.scalar_value(out.total);
  if (cache && !cache->filled) cache->filled = true;
  return out;
}

NsfpLoss nsfp_loss(ad::Tape& tape, const ParamNodes& fwd_nodes, const ParamNodes& bwd_nodes,
                   const MLPConfig& config, const Eigen::Ref<const RowMat>& pt,
                   const Eigen::Ref<const RowMat>& pnext, const NeighborIndex& next_index,
                   const ChamferConfig& chamfer_config, ChamferCorrespondence* corr) {
  if (pt.rows() == 0 || pnext.rows() == 0) throw DataError("nsfp_loss: empty cloud");
  if (config.input_dim != 3)
    throw std::invalid_argument("nsfp_loss: networks must take raw 3D positions");

  NsfpLoss out;
  const ad::NodeRef pos = tape.constant(pt);
  const ad::NodeRef fwd_flow = mlp_apply(tape, fwd_nodes, config, pos);
  const ad::NodeRef displaced = tape.add_scaled(pos, fwd_flow, 1.0, 1.0);
  const ad::NodeRef chamfer =
      truncated_chamfer(tape, displaced, pnext, next_index, chamfer_config, corr);
  const ad::NodeRef bwd_flow = mlp_apply(tape, bwd_nodes, config, displaced);
  const ad::NodeRef cycle = tape.mean_row_norm(tape.add_scaled(fwd_flow, bwd_flow, 1.0, 1.0));

  const ad::NodeRef nodes[] = {chamfer, cycle};
  const double coeffs[] = {1.0, 1.0};
  out.total_node = tape.scalar_sum(nodes, coeffs);
  out.chamfer = tape.scalar_value(chamfer);
  out.cycle = tape.scalar_value(cycle);
  out.total = tape.scalar_value(out.total_node);
  return out;
}

double nsfp_loss_value(const MLPParams& fwd, const MLPParams& bwd, const PointCloud& pt,
                       const PointCloud& pnext, const ChamferConfig& chamfer_config) {
  if (pt.empty() || pnext.empty()) throw DataError("nsfp_loss: empty cloud");
  const RowMat fwd_flow = forward_batch(fwd, pt.as_matrix());
  const RowMat displaced = pt.as_matrix() + fwd_flow;
  const RowMat bwd_flow = forward_batch(bwd, displaced);
  const double chamfer = truncated_chamfer(PointCloud::from_matrix(displaced), pnext,
                                           chamfer_config);
  const RowMat residual = fwd_flow + bwd_flow;
  double cycle = 0.0;
  for (Eigen::Index i = 0; i < residual.rows(); ++i) cycle += residual.row(i).norm();
  cycle /= static_cast<double>(residual.rows());
  return chamfer + cycle;
}

}  // namespace sceneflow
