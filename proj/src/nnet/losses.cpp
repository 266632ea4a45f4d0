#include "tosc/nnet/losses.hpp"

#include <cmath>
#include <vector>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"

namespace tosc::nn {

double mse(const Matrix& a, const Matrix& b, Matrix* grad_a) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  require(a.size() > 0, "mse: empty input");
  const Matrix d = a - b;
  const double n = static_cast<double>(a.size());
  if (grad_a) *grad_a = (2.0 / n) * d;
  return d.squaredNorm() / n;
}

namespace {

std::vector<Vec3> rows_as_points(const Matrix& m) {
  std::vector<Vec3> pts(static_cast<std::size_t>(m.rows()));
  for (long i = 0; i < m.rows(); ++i) pts[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return pts;
}

}  // namespace

double chamfer_loss(const Matrix& p, const Matrix& g, Matrix* grad_p) {
  require(g.cols() == 3 && g.rows() > 0, "chamfer_loss: expected non-empty n x 3 inputs");
  return chamfer_loss(p, g, KdTree(rows_as_points(g)), grad_p);
}

double chamfer_loss(const Matrix& p, const Matrix& g, const KdTree& gt, Matrix* grad_p) {
  require(p.cols() == 3 && g.cols() == 3, "chamfer_loss: expected n x 3 inputs");
  require(p.rows() > 0 && g.rows() > 0, "chamfer_loss: empty input");
  require(gt.size() == static_cast<std::size_t>(g.rows()), "chamfer_loss: tree does not match g");
  const auto pp = rows_as_points(p), gp = rows_as_points(g);
  const KdTree pt(pp);
  const double np = static_cast<double>(p.rows()), ng = static_cast<double>(g.rows());
  if (grad_p) grad_p->setZero(p.rows(), 3);
  double a = 0.0, b = 0.0;
  for (long i = 0; i < p.rows(); ++i) {
    const auto nn = gt.nearest(pp[static_cast<std::size_t>(i)]);
    a += nn.sq_dist;
    if (grad_p) grad_p->row(i) += (2.0 / np) * (p.row(i) - g.row(static_cast<long>(nn.index)));
  }
  for (long j = 0; j < g.rows(); ++j) {
    const auto nn = pt.nearest(gp[static_cast<std::size_t>(j)]);
    b += nn.sq_dist;
    const long i = static_cast<long>(nn.index);
    if (grad_p) grad_p->row(i) += (2.0 / ng) * (p.row(i) - g.row(j));
  }
  return a / np + b / ng;
}

double gaussian_kl(const RowVector& mu, const RowVector& h, double target, RowVector* grad_mu,
                   RowVector* grad_h) {
  require(mu.size() == h.size() && mu.size() > 0, "gaussian_kl: shape mismatch");
  const double d = static_cast<double>(mu.size());
  const Eigen::ArrayXd var = (2.0 * h.array()).exp().transpose();
  const Eigen::ArrayXd diff = (mu.array() - target).transpose();
  const double kl = (-h.array().transpose() + 0.5 * (var + diff.square()) - 0.5).sum() / d;
  if (grad_mu) *grad_mu = (diff / d).matrix().transpose();
  if (grad_h) *grad_h = ((var - 1.0) / d).matrix().transpose();
  return kl;
}

double gaussian_kl_closed(double mu1, double sigma1, double mu2, double sigma2) {
  require(sigma1 > 0.0 && sigma2 > 0.0, "gaussian_kl_closed: sigma must be positive");
  return std::log(sigma2 / sigma1) +
         (sigma1 * sigma1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * sigma2 * sigma2) - 0.5;
}

}  // namespace tosc::nn
