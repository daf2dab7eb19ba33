#pragma once

#include <cstdint>
#include <vector>

#include "sceneflow/geometry.hpp"

namespace sceneflow {

struct NearestResult {
  std::int32_t index = -1;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbor index over a point cloud.
///
/// Queries return the same result as exhaustive search: minimal squared
/// distance, ties broken by the lowest point index. Immutable after build
/// and safe for concurrent queries.
class NeighborIndex {
 public:
  /// Throws DataError on an empty cloud.
  explicit NeighborIndex(const PointCloud& cloud);

  NearestResult nearest(const Point3& query) const;
  std::size_t size() const { return pts_.size(); }

 private:
  struct Node {
    double split = 0.0;
    std::int32_t axis = -1;   // -1 marks a leaf
    std::int32_t left = -1;   // child node ids, or [begin,end) into order_ for leaves
    std::int32_t right = -1;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void search(std::int32_t node, const Point3& q, NearestResult& best) const;

  std::vector<Point3> pts_;          // original order; queries report these indices
  std::vector<std::int32_t> order_;  // permutation grouped by leaf
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;

  static constexpr std::int32_t kLeafSize = 16;
};

/// Spec-level free functions over the index.
NeighborIndex build_index(const PointCloud& cloud);
NearestResult nearest(const NeighborIndex& index, const Point3& query);

/// Exhaustive reference search with the same tie rule (test oracle).
NearestResult nearest_brute_force(const PointCloud& cloud, const Point3& query);

}  // namespace sceneflow
