#pragma once

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

enum class ChamferVariant { L1, L2 };

inline constexpr double kDefaultDcdAlpha = 40.0;
/// F-score threshold as a fraction of the ground-truth bbox diagonal.
inline constexpr double kDefaultFscoreFraction = 0.01;

/// Two-sided (un-halved) Chamfer distance: mean of squared (L2) or plain
/// Euclidean (L1) nearest-neighbour distances from a to b, plus b to a.
double chamfer(const PointCloud& a, const PointCloud& b,
               ChamferVariant variant = ChamferVariant::L2);

/// F1 of precision (pred within tau of gt) and recall (gt within tau of pred).
double fscore(const PointCloud& pred, const PointCloud& gt, double tau);

/// tau = kDefaultFscoreFraction * bbox diagonal of gt.
double default_fscore_tau(const PointCloud& gt);

/// Density-aware Chamfer distance in [0, 1].
double dcd(const PointCloud& a, const PointCloud& b, double alpha = kDefaultDcdAlpha);

}  // namespace tosc
