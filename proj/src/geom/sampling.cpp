#include "tosc/geom/sampling.hpp"

#include <limits>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"

namespace tosc {

std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m, std::size_t seed_index) {
  const std::size_t n = cloud.size();
  require(n > 0, "fps: empty cloud");
  require(m >= 1 && m <= n, "fps: m must be in [1, n]");
  require(seed_index < n, "fps: seed index out of range");

  std::vector<std::size_t> out;
  out.reserve(m);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t current = seed_index;
  for (std::size_t s = 0; s < m; ++s) {
    out.push_back(current);
    const Vec3 c = cloud.points[current];
    min_d[current] = -1.0;
    std::size_t best = 0;
    double best_d = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] < 0.0) continue;
      const double d = (cloud.points[i] - c).squaredNorm();
      if (d < min_d[i]) min_d[i] = d;
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    current = best;
  }
  return out;
}

PatchSet knn_group(const PointCloud& cloud, const std::vector<std::size_t>& centers,
                   std::size_t k) {
  require(!cloud.empty(), "knn_group: empty cloud");
  require(k >= 1 && k <= cloud.size(), "knn_group: k must be in [1, n]");
  const KdTree tree(cloud);
  PatchSet ps;
  ps.centers = centers;
  ps.k_neighbors = k;
  ps.groups.reserve(centers.size());
  for (std::size_t c : centers) {
    require(c < cloud.size(), "knn_group: center index out of range");
    std::vector<std::size_t> g;
    g.reserve(k);
    for (const auto& nb : tree.knn(cloud.points[c], k)) g.push_back(nb.index);
    ps.groups.push_back(std::move(g));
  }
  return ps;
}

std::vector<std::size_t> resample_indices(const PointCloud& cloud, std::size_t n) {
  require(!cloud.empty(), "resample: empty cloud");
  require(n >= 1, "resample: n must be >= 1");
  if (cloud.size() >= n) return fps(cloud, n, 0);
  std::vector<std::size_t> out(cloud.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  const auto order = fps(cloud, cloud.size(), 0);
  for (std::size_t i = 0; out.size() < n; ++i) out.push_back(order[i % order.size()]);
  return out;
}

PointCloud resample(const PointCloud& cloud, std::size_t n) {
  const auto idx = resample_indices(cloud, n);
  return cloud.subset(idx);
}

}  // namespace tosc
