#pragma once

#include "tosc/geom/kdtree.hpp"
#include "tosc/nnet/tensor.hpp"

namespace tosc::nn {

/// Mean of squared differences over all entries; grad is w.r.t. a.
double mse(const Matrix& a, const Matrix& b, Matrix* grad_a = nullptr);

/// Two-sided squared chamfer between the rows of p (n x 3) and g (m x 3):
/// mean_i min_j |p_i - g_j|^2 + mean_j min_i |p_i - g_j|^2. grad is w.r.t. p.
double chamfer_loss(const Matrix& p, const Matrix& g, Matrix* grad_p = nullptr);
/// Same, with a prebuilt tree over the rows of g.
double chamfer_loss(const Matrix& p, const Matrix& g, const KdTree& g_tree,
                    Matrix* grad_p = nullptr);

/// Per-dimension-mean KL( N(mu, exp(h)^2) || N(target, 1) ) where h is the
/// log standard deviation (half log-variance). Gradients are optional.
double gaussian_kl(const RowVector& mu, const RowVector& h, double target,
                   RowVector* grad_mu = nullptr, RowVector* grad_h = nullptr);

/// Closed-form KL between univariate Gaussians.
double gaussian_kl_closed(double mu1, double sigma1, double mu2, double sigma2);

}  // namespace tosc::nn
