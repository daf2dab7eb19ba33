#include "sceneflow/tape.hpp"

#include <cassert>
#include <cstring>
#include <stdexcept>

namespace sceneflow::ad {

namespace {
constexpr std::int64_t kAlign = 8;  // doubles; keeps arena blocks 64-byte aligned
std::int64_t aligned(std::int64_t n) { return (n + kAlign - 1) / kAlign * kAlign; }
}  // namespace

const Tape::Node& Tape::node(NodeRef n) const {
  assert(n.valid() && static_cast<std::size_t>(n.id) < nodes_.size());
  return nodes_[static_cast<std::size_t>(n.id)];
}

NodeRef Tape::push(OpKind kind, std::int32_t rows, std::int32_t cols, NodeRef a, NodeRef b,
                   NodeRef c) {
  Node n;
  n.kind = kind;
  n.rows = rows;
  n.cols = cols;
  n.in0 = a.id;
  n.in1 = b.id;
  n.in2 = c.id;
  n.offset = used_;
  used_ += aligned(static_cast<std::int64_t>(rows) * cols);
  if (static_cast<std::int64_t>(values_.size()) < used_) values_.resize(static_cast<std::size_t>(used_));
  n.requires_grad = kind == OpKind::Parameter;
  for (std::int32_t id : {a.id, b.id, c.id})
    if (id >= 0 && nodes_[static_cast<std::size_t>(id)].requires_grad) n.requires_grad = true;
  nodes_.push_back(n);
  return NodeRef{static_cast<std::int32_t>(nodes_.size()) - 1};
}

MatView Tape::value_mut(NodeRef n) {
  const Node& nd = node(n);
  return {values_.data() + nd.offset, nd.rows, nd.cols};
}

ConstMatView Tape::value(NodeRef n) const {
  const Node& nd = node(n);
  return {values_.data() + nd.offset, nd.rows, nd.cols};
}

double Tape::scalar_value(NodeRef n) const {
  const Node& nd = node(n);
  if (nd.rows != 1 || nd.cols != 1) throw std::invalid_argument("scalar_value: node is not 1x1");
  return values_[static_cast<std::size_t>(nd.offset)];
}

MatView Tape::grad_mut(const Node& n) {
  return {grads_.data() + n.offset, n.rows, n.cols};
}

ConstMatView Tape::grad(NodeRef n) const {
  const Node& nd = node(n);
  return {grads_.data() + nd.offset, nd.rows, nd.cols};
}

NodeRef Tape::constant(const Eigen::Ref<const RowMat>& v) {
  NodeRef r = push(OpKind::Constant, static_cast<std::int32_t>(v.rows()),
                   static_cast<std::int32_t>(v.cols()));
  value_mut(r) = v;
  return r;
}

NodeRef Tape::parameter(const Eigen::Ref<const RowMat>& v) {
  NodeRef r = push(OpKind::Parameter, static_cast<std::int32_t>(v.rows()),
                   static_cast<std::int32_t>(v.cols()));
  value_mut(r) = v;
  return r;
}

NodeRef Tape::affine(NodeRef x, NodeRef weight, NodeRef bias) {
  const Node& xn = node(x);
  const Node& wn = node(weight);
  const Node& bn = node(bias);
  if (xn.cols != wn.cols || bn.rows != 1 || bn.cols != wn.rows)
    throw std::invalid_argument("affine: shape mismatch");
  NodeRef r = push(OpKind::Affine, xn.rows, wn.rows, x, weight, bias);
  MatView y = value_mut(r);
  y.noalias() = value(x) * value(weight).transpose();
  y.rowwise() += value(bias).row(0);
  return r;
}

NodeRef Tape::affine_relu(NodeRef x, NodeRef weight, NodeRef bias) {
  const Node& xn = node(x);
  const Node& wn = node(weight);
  const Node& bn = node(bias);
  if (xn.cols != wn.cols || bn.rows != 1 || bn.cols != wn.rows)
    throw std::invalid_argument("affine_relu: shape mismatch");
  NodeRef r = push(OpKind::AffineRelu, xn.rows, wn.rows, x, weight, bias);
  MatView y = value_mut(r);
  y.noalias() = value(x) * value(weight).transpose();
  const double* b = values_.data() + bn.offset;
  double* d = values_.data() + nodes_.back().offset;
  for (std::int32_t row = 0; row < xn.rows; ++row, d += wn.rows)
    for (std::int32_t col = 0; col < wn.rows; ++col) {
      const double v = d[col] + b[col];
      d[col] = v > 0.0 ? v : 0.0;
    }
  return r;
}

NodeRef Tape::activation(NodeRef x, Activation act, double sigma) {
  const Node& xn = node(x);
  NodeRef r = push(OpKind::Activation, xn.rows, xn.cols, x);
  Node& nd = nodes_.back();
  nd.p0 = static_cast<double>(static_cast<int>(act));
  nd.p1 = sigma;
  const double* in = values_.data() + xn.offset;
  double* out = values_.data() + nd.offset;
  const std::int64_t count = static_cast<std::int64_t>(xn.rows) * xn.cols;
  switch (act) {
    case Activation::ReLU:
      for (std::int64_t i = 0; i < count; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Activation::SinC:
      for (std::int64_t i = 0; i < count; ++i) out[i] = sinc_value(in[i]);
      break;
    case Activation::Gaussian: {
      const double inv2s2 = -1.0 / (2.0 * sigma * sigma);
      for (std::int64_t i = 0; i < count; ++i) out[i] = std::exp(in[i] * in[i] * inv2s2);
      break;
    }
  }
  return r;
}

NodeRef Tape::add_scaled(NodeRef a, NodeRef b, double alpha, double beta) {
  const Node& an = node(a);
  const Node& bn = node(b);
  if (an.rows != bn.rows || an.cols != bn.cols)
    throw std::invalid_argument("add_scaled: shape mismatch");
  NodeRef r = push(OpKind::AddScaled, an.rows, an.cols, a, b);
  Node& nd = nodes_.back();
  nd.p0 = alpha;
  nd.p1 = beta;
  value_mut(r) = alpha * value(a) + beta * value(b);
  return r;
}

NodeRef Tape::concat_cols(NodeRef a, NodeRef b) {
  const Node& an = node(a);
  const Node& bn = node(b);
  if (an.rows != bn.rows) throw std::invalid_argument("concat_cols: row mismatch");
  NodeRef r = push(OpKind::ConcatCols, an.rows, an.cols + bn.cols, a, b);
  MatView y = value_mut(r);
  y.leftCols(an.cols) = value(a);
  y.rightCols(bn.cols) = value(b);
  return r;
}

Tape::ChamferPayload& Tape::new_chamfer_payload(std::int32_t& index) {
  if (chamfer_count_ == chamfer_payloads_.size()) chamfer_payloads_.emplace_back();
  index = static_cast<std::int32_t>(chamfer_count_);
  return chamfer_payloads_[chamfer_count_++];
}

NodeRef Tape::record_chamfer(OpKind kind, NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                             std::span<const std::int32_t> nn,
                             std::span<const std::uint8_t> within) {
  const Node& pn = node(pos);
  const std::size_t query_count =
      kind == OpKind::ChamferTo ? static_cast<std::size_t>(pn.rows)
                                : static_cast<std::size_t>(targets.rows());
  if (nn.size() != query_count || within.size() != query_count)
    throw std::invalid_argument("chamfer: correspondence size mismatch");
  NodeRef r = push(kind, 1, 1, pos);
  Node& nd = nodes_.back();
  ChamferPayload& pl = new_chamfer_payload(nd.payload);
  pl.targets = targets;
  pl.nn.assign(nn.begin(), nn.end());
  pl.within.assign(within.begin(), within.end());

  ConstMatView p = value(pos);
  double acc = 0.0;
  if (kind == OpKind::ChamferTo) {
    for (std::size_t i = 0; i < query_count; ++i) {
      if (!pl.within[i]) continue;
      acc += (p.row(static_cast<Eigen::Index>(i)) - pl.targets.row(pl.nn[i])).squaredNorm();
    }
  } else {
    for (std::size_t j = 0; j < query_count; ++j) {
      if (!pl.within[j]) continue;
      acc += (pl.targets.row(static_cast<Eigen::Index>(j)) - p.row(pl.nn[j])).squaredNorm();
    }
  }
  values_[static_cast<std::size_t>(nd.offset)] = acc / static_cast<double>(query_count);
  return r;
}

NodeRef Tape::chamfer_to_targets(NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                                 std::span<const std::int32_t> nn,
                                 std::span<const std::uint8_t> within) {
  return record_chamfer(OpKind::ChamferTo, pos, targets, nn, within);
}

NodeRef Tape::chamfer_from_targets(NodeRef pos, const Eigen::Ref<const RowMat>& targets,
                                   std::span<const std::int32_t> nn,
                                   std::span<const std::uint8_t> within) {
  return record_chamfer(OpKind::ChamferFrom, pos, targets, nn, within);
}

NodeRef Tape::mean_row_norm(NodeRef x) {
  NodeRef r = push(OpKind::MeanRowNorm, 1, 1, x);
  ConstMatView v = value(x);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) acc += v.row(i).norm();
  values_[static_cast<std::size_t>(nodes_.back().offset)] = acc / static_cast<double>(v.rows());
  return r;
}

NodeRef Tape::reduce_sum(NodeRef x) {
  NodeRef r = push(OpKind::ReduceSum, 1, 1, x);
  values_[static_cast<std::size_t>(nodes_.back().offset)] = value(x).sum();
  return r;
}

NodeRef Tape::scalar_sum(std::span<const NodeRef> scalars, std::span<const double> coeffs) {
  if (scalars.size() != coeffs.size() || scalars.empty())
    throw std::invalid_argument("scalar_sum: bad term list");
  NodeRef r = push(OpKind::ScalarSum, 1, 1);
  Node& nd = nodes_.back();
  if (sum_count_ == sum_payloads_.size()) sum_payloads_.emplace_back();
  nd.payload = static_cast<std::int32_t>(sum_count_);
  SumPayload& pl = sum_payloads_[sum_count_++];
  pl.ids.clear();
  pl.coeffs.assign(coeffs.begin(), coeffs.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Node& sn = node(scalars[i]);
    if (sn.rows != 1 || sn.cols != 1) throw std::invalid_argument("scalar_sum: non-scalar term");
    if (sn.requires_grad) nd.requires_grad = true;
    pl.ids.push_back(scalars[i].id);
    acc += coeffs[i] * values_[static_cast<std::size_t>(sn.offset)];
  }
  values_[static_cast<std::size_t>(nd.offset)] = acc;
  return r;
}

void Tape::backward(NodeRef loss) {
  const Node& ln = node(loss);
  if (ln.rows != 1 || ln.cols != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (static_cast<std::int64_t>(grads_.size()) < used_) grads_.resize(static_cast<std::size_t>(used_));
  grad_ready_.assign(nodes_.size(), 0);
  grads_[static_cast<std::size_t>(ln.offset)] = 1.0;
  grad_ready_[static_cast<std::size_t>(loss.id)] = 1;

  auto wants = [&](std::int32_t id) {
    return id >= 0 && nodes_[static_cast<std::size_t>(id)].requires_grad;
  };
  // First contribution to a buffer assigns, later ones accumulate.
  auto sink = [&](std::int32_t id) -> std::pair<MatView, bool> {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const bool fresh = !grad_ready_[static_cast<std::size_t>(id)];
    grad_ready_[static_cast<std::size_t>(id)] = 1;
    return {MatView{grads_.data() + n.offset, n.rows, n.cols}, fresh};
  };
  // Scatter-style ops need a zeroed buffer instead.
  auto zeroed_sink = [&](std::int32_t id) -> MatView {
    auto [g, fresh] = sink(id);
    if (fresh) g.setZero();
    return g;
  };

  for (std::int32_t id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !grad_ready_[static_cast<std::size_t>(id)]) continue;
    switch (n.kind) {
      case OpKind::Constant:
      case OpKind::Parameter:
        break;
      case OpKind::Affine:
      case OpKind::AffineRelu: {
        const Node& xn = nodes_[static_cast<std::size_t>(n.in0)];
        const Node& wn = nodes_[static_cast<std::size_t>(n.in1)];
        MatView dy{grads_.data() + n.offset, n.rows, n.cols};
        if (n.kind == OpKind::AffineRelu) {
          // dy becomes the pre-activation gradient in place; the output value
          // doubles as the ReLU mask.
          const double* y = values_.data() + n.offset;
          double* g = grads_.data() + n.offset;
          const std::int64_t count = static_cast<std::int64_t>(n.rows) * n.cols;
          for (std::int64_t i = 0; i < count; ++i)
            if (y[i] <= 0.0) g[i] = 0.0;
        }
        if (wants(n.in0)) {
          auto [dx, fresh] = sink(n.in0);
          const ConstMatView w{values_.data() + wn.offset, wn.rows, wn.cols};
          if (fresh) dx.noalias() = dy * w;
          else dx.noalias() += dy * w;
        }
        if (wants(n.in1)) {
          auto [dw, fresh] = sink(n.in1);
          const ConstMatView x{values_.data() + xn.offset, xn.rows, xn.cols};
          if (fresh) dw.noalias() = dy.transpose() * x;
          else dw.noalias() += dy.transpose() * x;
        }
        if (wants(n.in2)) {
          auto [db, fresh] = sink(n.in2);
          if (fresh) db.row(0) = dy.colwise().sum();
          else db.row(0) += dy.colwise().sum();
        }
        break;
      }
      case OpKind::Activation: {
        if (!wants(n.in0)) break;
        const Node& xn = nodes_[static_cast<std::size_t>(n.in0)];
        const double* x = values_.data() + xn.offset;
        const double* dy = grads_.data() + n.offset;
        auto [dxv, fresh] = sink(n.in0);
        if (fresh) dxv.setZero();
        double* dx = grads_.data() + xn.offset;
        const std::int64_t count = static_cast<std::int64_t>(n.rows) * n.cols;
        const auto act = static_cast<Activation>(static_cast<int>(n.p0));
        switch (act) {
          case Activation::ReLU:
            for (std::int64_t i = 0; i < count; ++i)
              if (x[i] > 0.0) dx[i] += dy[i];
            break;
          case Activation::SinC:
            for (std::int64_t i = 0; i < count; ++i) dx[i] += dy[i] * sinc_deriv(x[i]);
            break;
          case Activation::Gaussian: {
            const double sigma = n.p1;
            const double inv2s2 = -1.0 / (2.0 * sigma * sigma);
            const double invs2 = 1.0 / (sigma * sigma);
            for (std::int64_t i = 0; i < count; ++i)
              dx[i] += dy[i] * (-x[i] * invs2) * std::exp(x[i] * x[i] * inv2s2);
            break;
          }
        }
        break;
      }
      case OpKind::AddScaled: {
        ConstMatView dy{grads_.data() + n.offset, n.rows, n.cols};
        if (wants(n.in0)) {
          auto [da, fresh] = sink(n.in0);
          if (fresh) da = n.p0 * dy;
          else da += n.p0 * dy;
        }
        if (wants(n.in1)) {
          auto [db, fresh] = sink(n.in1);
          if (fresh) db = n.p1 * dy;
          else db += n.p1 * dy;
        }
        break;
      }
      case OpKind::ConcatCols: {
        ConstMatView dy{grads_.data() + n.offset, n.rows, n.cols};
        const Node& an = nodes_[static_cast<std::size_t>(n.in0)];
        if (wants(n.in0)) {
          auto [da, fresh] = sink(n.in0);
          if (fresh) da = dy.leftCols(an.cols);
          else da += dy.leftCols(an.cols);
        }
        if (wants(n.in1)) {
          auto [db, fresh] = sink(n.in1);
          if (fresh) db = dy.rightCols(n.cols - an.cols);
          else db += dy.rightCols(n.cols - an.cols);
        }
        break;
      }
      case OpKind::ChamferTo: {
        if (!wants(n.in0)) break;
        const Node& pn = nodes_[static_cast<std::size_t>(n.in0)];
        const ChamferPayload& pl = chamfer_payloads_[static_cast<std::size_t>(n.payload)];
        const double ds = grads_[static_cast<std::size_t>(n.offset)];
        const double scale = 2.0 * ds / static_cast<double>(pl.nn.size());
        ConstMatView p{values_.data() + pn.offset, pn.rows, pn.cols};
        MatView dp = zeroed_sink(n.in0);
        for (std::size_t i = 0; i < pl.nn.size(); ++i) {
          if (!pl.within[i]) continue;
          const auto ei = static_cast<Eigen::Index>(i);
          dp.row(ei) += scale * (p.row(ei) - pl.targets.row(pl.nn[i]));
        }
        break;
      }
      case OpKind::ChamferFrom: {
        if (!wants(n.in0)) break;
        const Node& pn = nodes_[static_cast<std::size_t>(n.in0)];
        const ChamferPayload& pl = chamfer_payloads_[static_cast<std::size_t>(n.payload)];
        const double ds = grads_[static_cast<std::size_t>(n.offset)];
        const double scale = 2.0 * ds / static_cast<double>(pl.nn.size());
        ConstMatView p{values_.data() + pn.offset, pn.rows, pn.cols};
        MatView dp = zeroed_sink(n.in0);
        for (std::size_t j = 0; j < pl.nn.size(); ++j) {
          if (!pl.within[j]) continue;
          dp.row(pl.nn[j]) +=
              scale * (p.row(pl.nn[j]) - pl.targets.row(static_cast<Eigen::Index>(j)));
        }
        break;
      }
      case OpKind::MeanRowNorm: {
        if (!wants(n.in0)) break;
        const Node& xn = nodes_[static_cast<std::size_t>(n.in0)];
        const double ds = grads_[static_cast<std::size_t>(n.offset)];
        ConstMatView x{values_.data() + xn.offset, xn.rows, xn.cols};
        MatView dx = zeroed_sink(n.in0);
        const double inv_n = 1.0 / static_cast<double>(xn.rows);
        for (Eigen::Index i = 0; i < xn.rows; ++i) {
          const double nrm = x.row(i).norm();
          if (nrm > 0.0) dx.row(i) += (ds * inv_n / nrm) * x.row(i);
        }
        break;
      }
      case OpKind::ReduceSum: {
        if (!wants(n.in0)) break;
        const double ds = grads_[static_cast<std::size_t>(n.offset)];
        auto [dx, fresh] = sink(n.in0);
        if (fresh) dx.setConstant(ds);
        else dx.array() += ds;
        break;
      }
      case OpKind::ScalarSum: {
        const SumPayload& pl = sum_payloads_[static_cast<std::size_t>(n.payload)];
        const double ds = grads_[static_cast<std::size_t>(n.offset)];
        for (std::size_t i = 0; i < pl.ids.size(); ++i) {
          const Node& term = nodes_[static_cast<std::size_t>(pl.ids[i])];
          if (!term.requires_grad) continue;
          auto [dt, fresh] = sink(pl.ids[i]);
          if (fresh) dt(0, 0) = ds * pl.coeffs[i];
          else dt(0, 0) += ds * pl.coeffs[i];
        }
        break;
      }
    }
  }

  // Parameters can legitimately be unreachable from the loss (a constant
  // objective); their gradient reads as zero.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind == OpKind::Parameter && !grad_ready_[i])
      MatView{grads_.data() + n.offset, n.rows, n.cols}.setZero();
  }
}

void Tape::reset() {
  nodes_.clear();
  used_ = 0;
  chamfer_count_ = 0;
  sum_count_ = 0;
}

}  // namespace sceneflow::ad
