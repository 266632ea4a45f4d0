#include "tosc/reg/fuse.hpp"

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/geom/sampling.hpp"

namespace tosc {

FuseResult fuse_with_provenance(const PointCloud& input_cloud, const PointCloud& aligned_gen,
                                std::size_t n_out, double merge_fraction) {
  require(n_out >= 1, "fuse: n_out must be >= 1");
  require(!input_cloud.empty() && !aligned_gen.empty(), "fuse: empty input");
  require(merge_fraction >= 0.0, "fuse: merge fraction must be non-negative");

  const PointCloud all = concat(input_cloud, aligned_gen);
  const double r = merge_fraction * bounding_box(all).diagonal();
  const double r2 = r * r;

  const KdTree tree(all);
  std::vector<bool> keep(all.size(), false);
  for (std::size_t i = 0; i < input_cloud.size(); ++i) keep[i] = true;
  for (std::size_t i = input_cloud.size(); i < all.size(); ++i) {
    bool dup = false;
    for (std::size_t j : tree.radius(all.points[i], r2)) {
      if (keep[j] && (all.points[j] - all.points[i]).squaredNorm() < r2) {
        dup = true;
        break;
      }
    }
    keep[i] = !dup;
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (keep[i]) kept.push_back(i);
  }
  const PointCloud merged = all.subset(kept);
  const auto pick = resample_indices(merged, n_out);

  FuseResult out;
  out.cloud = merged.subset(pick);
  out.from_input.reserve(pick.size());
  for (std::size_t i : pick) out.from_input.push_back(kept[i] < input_cloud.size());
  return out;
}

}  // namespace tosc
