#include "sceneflow/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace sceneflow {

namespace {
inline double coord(const Point3& p, std::int32_t axis) {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}
}  // namespace

NeighborIndex::NeighborIndex(const PointCloud& cloud) : pts_(cloud.points) {
  if (pts_.empty()) throw DataError("build_index: empty cloud");
  order_.resize(pts_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int32_t>(i);
  nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::int32_t>(pts_.size()));
}

std::int32_t NeighborIndex::build(std::int32_t begin, std::int32_t end) {
  const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= kLeafSize) {
    nodes_[id].axis = -1;
    nodes_[id].left = begin;
    nodes_[id].right = end;
    return id;
  }
  // Split on the axis with the widest extent.
  Point3 lo = pts_[order_[begin]], hi = lo;
  for (std::int32_t i = begin + 1; i < end; ++i) {
    const Point3& p = pts_[order_[i]];
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const double ex = hi.x - lo.x, ey = hi.y - lo.y, ez = hi.z - lo.z;
  const std::int32_t axis = (ex >= ey && ex >= ez) ? 0 : (ey >= ez ? 1 : 2);

  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     return coord(pts_[a], axis) < coord(pts_[b], axis);
                   });
  const double split = coord(pts_[order_[mid]], axis);

  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NeighborIndex::search(std::int32_t node, const Point3& q, NearestResult& best) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  if (n.axis < 0) {
    for (std::int32_t i = n.left; i < n.right; ++i) {
      const std::int32_t idx = order_[static_cast<std::size_t>(i)];
      const double d2 = squared_distance(pts_[static_cast<std::size_t>(idx)], q);
      if (d2 < best.squared_distance ||
          (d2 == best.squared_distance && idx < best.index)) {
        best.index = idx;
        best.squared_distance = d2;
      }
    }
    return;
  }
  const double diff = coord(q, n.axis) - n.split;
  const std::int32_t near = diff < 0.0 ? n.left : n.right;
  const std::int32_t far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  // The far half-space can hold an equally distant point with a lower index,
  // so it is pruned only when strictly worse.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

NearestResult NeighborIndex::nearest(const Point3& query) const {
  NearestResult best;
  best.index = std::numeric_limits<std::int32_t>::max();
  best.squared_distance = std::numeric_limits<double>::infinity();
  search(root_, query, best);
  return best;
}

NeighborIndex build_index(const PointCloud& cloud) { return NeighborIndex(cloud); }

NearestResult nearest(const NeighborIndex& index, const Point3& query) {
  return index.nearest(query);
}

NearestResult nearest_brute_force(const PointCloud& cloud, const Point3& query) {
  NearestResult best;
  best.index = std::numeric_limits<std::int32_t>::max();
  best.squared_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d2 = squared_distance(cloud[i], query);
    if (d2 < best.squared_distance) {
      best.index = static_cast<std::int32_t>(i);
      best.squared_distance = d2;
    }
  }
  return best;
}

}  // namespace sceneflow
