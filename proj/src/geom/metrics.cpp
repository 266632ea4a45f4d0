#include "tosc/geom/metrics.hpp"

#include <cmath>
#include <vector>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"

namespace tosc {
namespace {

// Mean nearest-neighbour term from `from` into the tree of `to`.
double directed_mean(const PointCloud& from, const KdTree& to, ChamferVariant v) {
  double sum = 0.0;
  for (const auto& p : from.points) {
    const double d2 = to.nearest(p).sq_dist;
    sum += v == ChamferVariant::L2 ? d2 : std::sqrt(d2);
  }
  return sum / static_cast<double>(from.size());
}

double fraction_within(const PointCloud& from, const KdTree& to, double tau) {
  std::size_t hit = 0;
  for (const auto& p : from.points) {
    if (std::sqrt(to.nearest(p).sq_dist) < tau) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

double dcd_directed(const PointCloud& from, const KdTree& to, double alpha) {
  std::vector<Neighbor> nn(from.size());
  std::vector<std::size_t> count(to.size(), 0);
  for (std::size_t i = 0; i < from.size(); ++i) {
    nn[i] = to.nearest(from.points[i]);
    ++count[nn[i].index];
  }
  double sum = 0.0;
  for (const auto& n : nn) {
    sum += 1.0 - std::exp(-alpha * n.sq_dist) / static_cast<double>(count[n.index]);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b, ChamferVariant variant) {
  require(!a.empty() && !b.empty(), "chamfer: empty input cloud");
  const KdTree ta(a), tb(b);
  return directed_mean(a, tb, variant) + directed_mean(b, ta, variant);
}

double fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  require(!pred.empty() && !gt.empty(), "fscore: empty input cloud");
  require(tau > 0.0, "fscore: tau must be positive");
  const KdTree tp(pred), tg(gt);
  const double precision = fraction_within(pred, tg, tau);
  const double recall = fraction_within(gt, tp, tau);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * (precision * recall) / (precision + recall);
}

double default_fscore_tau(const PointCloud& gt) {
  return kDefaultFscoreFraction * bounding_box(gt).diagonal();
}

double dcd(const PointCloud& a, const PointCloud& b, double alpha) {
  require(!a.empty() && !b.empty(), "dcd: empty input cloud");
  require(alpha > 0.0, "dcd: alpha must be positive");
  const KdTree ta(a), tb(b);
  return 0.5 * (dcd_directed(a, tb, alpha) + dcd_directed(b, ta, alpha));
}

}  // namespace tosc
