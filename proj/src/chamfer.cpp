#include "sceneflow/chamfer.hpp"

#include <stdexcept>

namespace sceneflow {

void ChamferConfig::validate() const {
  if (!(truncation_radius > 0.0))
    throw std::invalid_argument("ChamferConfig: truncation_radius must be > 0");
}

ChamferMatch match_into(const Eigen::Ref<const RowMat>& queries, const NeighborIndex& targets,
                        double truncation_radius) {
  const double r2 = truncation_radius * truncation_radius;
  ChamferMatch m;
  m.nn.resize(static_cast<std::size_t>(queries.rows()));
  m.within.resize(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const NearestResult r = targets.nearest({queries(i, 0), queries(i, 1), queries(i, 2)});
    m.nn[static_cast<std::size_t>(i)] = r.index;
    m.within[static_cast<std::size_t>(i)] = r.squared_distance <= r2 ? 1 : 0;
  }
  return m;
}

namespace {
double half_value(const Eigen::Ref<const RowMat>& queries, const Eigen::Ref<const RowMat>& targets,
                  const ChamferMatch& m) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    if (!m.within[static_cast<std::size_t>(i)]) continue;
    acc += (queries.row(i) - targets.row(m.nn[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return acc / static_cast<double>(queries.rows());
}
}  // namespace

double chamfer_value(const Eigen::Ref<const RowMat>& a, const Eigen::Ref<const RowMat>& b,
                     const ChamferCorrespondence& corr, const ChamferConfig& config) {
  double value = half_value(a, b, corr.a_to_b);
  if (config.symmetric) value += half_value(b, a, corr.b_to_a);
  return value;
}

double truncated_chamfer(const PointCloud& a, const PointCloud& b, const ChamferConfig& config) {
  config.validate();
  if (a.empty() || b.empty()) throw DataError("truncated_chamfer: empty cloud");
  const NeighborIndex index_b(b);
  ChamferCorrespondence corr;
  corr.a_to_b = match_into(a.as_matrix(), index_b, config.truncation_radius);
  if (config.symmetric) {
    const NeighborIndex index_a(a);
    corr.b_to_a = match_into(b.as_matrix(), index_a, config.truncation_radius);
  }
  return chamfer_value(a.as_matrix(), b.as_matrix(), corr, config);
}

double truncated_chamfer_brute_force(const PointCloud& a, const PointCloud& b,
                                     const ChamferConfig& config) {
  config.validate();
  if (a.empty() || b.empty()) throw DataError("truncated_chamfer: empty cloud");
  const double r2 = config.truncation_radius * config.truncation_radius;
  auto one_way = [&](const PointCloud& from, const PointCloud& to) {
    double acc = 0.0;
    for (const auto& p : from.points) {
      const double d2 = nearest_brute_force(to, p).squared_distance;
      if (d2 <= r2) acc += d2;
    }
    return acc / static_cast<double>(from.size());
  };
  double value = one_way(a, b);
  if (config.symmetric) value += one_way(b, a);
  return value;
}

ad::NodeRef truncated_chamfer(ad::Tape& tape, ad::NodeRef predicted,
                              const Eigen::Ref<const RowMat>& target,
                              const NeighborIndex& target_index, const ChamferConfig& config,
                              ChamferCorrespondence* corr) {
  config.validate();
  const auto pred = tape.value(predicted);
  if (pred.rows() == 0 || target.rows() == 0) throw DataError("truncated_chamfer: empty cloud");

  ChamferCorrespondence local;
  ChamferCorrespondence* c = corr ? corr : &local;
  const bool fill = c->a_to_b.nn.empty();
  if (fill) {
    c->a_to_b = match_into(pred, target_index, config.truncation_radius);
    if (config.symmetric) {
      const NeighborIndex pred_index(PointCloud::from_matrix(pred));
      c->b_to_a = match_into(target, pred_index, config.truncation_radius);
    }
  }

  ad::NodeRef term = tape.chamfer_to_targets(predicted, target, c->a_to_b.nn, c->a_to_b.within);
  if (config.symmetric) {
    ad::NodeRef rev = tape.chamfer_from_targets(predicted, target, c->b_to_a.nn, c->b_to_a.within);
    const ad::NodeRef nodes[] = {term, rev};
    const double coeffs[] = {1.0, 1.0};
    term = tape.scalar_sum(nodes, coeffs);
  }
  return term;
}

}  // namespace sceneflow
