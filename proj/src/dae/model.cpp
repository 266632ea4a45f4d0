#include "tosc/dae/dae.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/common/rng.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/nnet/losses.hpp"

namespace tosc {

using nn::Matrix;
using nn::RowVector;
using nlohmann::json;

void DaeConfig::validate() const {
  require(n_patch >= 2, "dae: n_patch must be >= 2");
  require(k_neighbors >= 1, "dae: k_neighbors must be >= 1");
  require(width >= 1 && heads >= 1 && width % heads == 0, "dae: width must be a multiple of heads");
  require(mlp_dim >= 1 && latent >= 1 && token_hidden >= 1 && restore_hidden >= 1,
          "dae: layer widths must be positive");
  require(n_encoder >= 1 && n_decoder >= 1, "dae: need at least one encoder and decoder block");
  require(n_restore >= static_cast<std::size_t>(std::max(n_patch, k_neighbors)),
          "dae: n_restore must be >= max(n_patch, k_neighbors)");
  require(mask_ratio >= 0.0 && mask_ratio < 1.0, "dae: mask_ratio must be in [0, 1)");
}

std::string DaeConfig::to_json() const {
  json j = {{"n_patch", n_patch},       {"k_neighbors", k_neighbors},
            {"width", width},           {"heads", heads},
            {"mlp_dim", mlp_dim},       {"latent", latent},
            {"n_encoder", n_encoder},   {"n_decoder", n_decoder},
            {"token_hidden", token_hidden}, {"restore_hidden", restore_hidden},
            {"n_restore", n_restore},   {"mask_ratio", mask_ratio}};
  return j.dump();
}

DaeConfig DaeConfig::from_json(const std::string& text) {
  DaeConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("dae config: ") + e.what());
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    get("n_patch", c.n_patch);
    get("k_neighbors", c.k_neighbors);
    get("width", c.width);
    get("heads", c.heads);
    get("mlp_dim", c.mlp_dim);
    get("latent", c.latent);
    get("n_encoder", c.n_encoder);
    get("n_decoder", c.n_decoder);
    get("token_hidden", c.token_hidden);
    get("restore_hidden", c.restore_hidden);
    get("n_restore", c.n_restore);
    get("mask_ratio", c.mask_ratio);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("dae config: ") + e.what());
  }
  c.validate();
  return c;
}

TokenGeometry patch_geometry(const PointCloud& cloud, long n_patch, long k_neighbors) {
  require(cloud.size() >= static_cast<std::size_t>(std::max(n_patch, k_neighbors)),
          "patch_geometry: cloud smaller than max(n_patch, k_neighbors)");
  TokenGeometry g;
  g.normalization = unit_diagonal_normalization(cloud);
  PointCloud norm = apply(g.normalization, cloud);
  const long n = static_cast<long>(norm.size());
  g.points.resize(n, 3);
  for (long i = 0; i < n; ++i) g.points.row(i) = norm.points[i].transpose();

  auto centers = fps(norm, static_cast<std::size_t>(n_patch));
  g.patches = knn_group(norm, centers, static_cast<std::size_t>(k_neighbors));
  g.centers.resize(n_patch, 3);
  g.rel.resize(n_patch * k_neighbors, 3);
  std::vector<Vec3> cpts(n_patch);
  for (long j = 0; j < n_patch; ++j) {
    cpts[j] = norm.points[centers[j]];
    g.centers.row(j) = cpts[j].transpose();
    for (long m = 0; m < k_neighbors; ++m) {
      g.rel.row(j * k_neighbors + m) =
          (norm.points[g.patches.groups[j][m]] - cpts[j]).transpose();
    }
  }
  KdTree tree(cpts);
  g.assign.resize(n);
  for (long i = 0; i < n; ++i) g.assign[i] = static_cast<long>(tree.nearest(norm.points[i]).index);
  return g;
}

std::vector<bool> task_flags(const TokenGeometry& g, const std::vector<std::size_t>& task_indices) {
  std::vector<bool> is_task(g.points.rows(), false);
  for (auto i : task_indices) {
    require(i < is_task.size(), "task_flags: task index out of range");
    is_task[i] = true;
  }
  std::vector<bool> flags(g.patches.size(), false);
  for (std::size_t j = 0; j < g.patches.size(); ++j) {
    for (auto i : g.patches.groups[j]) {
      if (is_task[i]) {
        flags[j] = true;
        break;
      }
    }
  }
  return flags;
}

DaeModel::DaeModel(const DaeConfig& config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  const long d = config_.width;
  pool_ = nn::SetPool(params_, "tok.pool", 3, config_.token_hidden, d);
  pos1_ = nn::Linear(params_, "tok.pos1", 3, d);
  pos2_ = nn::Linear(params_, "tok.pos2", d, d);
  flag_ = nn::Embedding(params_, "tok.flag", 2, d);
  for (int b = 0; b < config_.n_encoder; ++b) {
    encoder_.emplace_back(params_, "enc." + std::to_string(b), d, config_.heads, config_.mlp_dim);
  }
  enc_norm_ = nn::LayerNorm(params_, "enc.norm", d);
  mu1_ = nn::Linear(params_, "head.mu1", d, d);
  mu2_ = nn::Linear(params_, "head.mu2", d, config_.latent);
  h1_ = nn::Linear(params_, "head.h1", d, d);
  h2_ = nn::Linear(params_, "head.h2", d, config_.latent);
  mask_token_ = &params_.add("dec.mask_token", 1, d, nn::Init::Normal002);
  global_ = nn::Linear(params_, "dec.global", d, d);
  for (int b = 0; b < config_.n_decoder; ++b) {
    decoder_.emplace_back(params_, "dec." + std::to_string(b), d, config_.heads, config_.mlp_dim);
  }
  dec_norm_ = nn::LayerNorm(params_, "dec.norm", d);
  token_proj_ = nn::Linear(params_, "restore.token", d, config_.restore_hidden);
  point_proj_ = &params_.add("restore.point", 3, config_.restore_hidden, nn::Init::Xavier);
  // Zero output layer: an untrained decoder returns its input unchanged.
  restore_out_ = nn::Linear(params_, "restore.out", config_.restore_hidden, 3, nn::Init::Zero);
}

Matrix DaeModel::embed_tokens(const TokenGeometry& g, const std::vector<bool>& flags,
                              TokenCache& cache) const {
  require(flags.size() == static_cast<std::size_t>(g.centers.rows()), "embed_tokens: flag count");
  Matrix tokens = pool_.forward(g.rel, config_.k_neighbors, cache.pool);
  cache.pos_pre = pos1_.forward(g.centers);
  cache.pos = pos2_.forward(nn::gelu(cache.pos_pre));
  tokens += cache.pos;
  const RowVector f0 = flag_.forward(0), f1 = flag_.forward(1);
  for (long j = 0; j < tokens.rows(); ++j) tokens.row(j) += flags[j] ? f1 : f0;
  return tokens;
}

void DaeModel::embed_tokens_backward(const TokenGeometry& g, const std::vector<bool>& flags,
                                     const Matrix& dtokens, const Matrix& dpos,
                                     const TokenCache& cache) const {
  pool_.backward(dtokens, cache.pool);
  Matrix dp = dtokens;
  if (dpos.size() > 0) dp += dpos;
  Matrix da = pos2_.backward(nn::gelu(cache.pos_pre), dp);
  pos1_.backward(g.centers, nn::gelu_backward(cache.pos_pre, da));
  RowVector d0 = RowVector::Zero(dtokens.cols()), d1 = d0;
  for (long j = 0; j < dtokens.rows(); ++j) (flags[j] ? d1 : d0) += dtokens.row(j);
  flag_.backward(0, d0);
  flag_.backward(1, d1);
}

DaeModel::EncoderOut DaeModel::encode_tokens(const Matrix& tokens, EncoderCache& cache) const {
  if (tokens.rows() == 0) fail(ErrorCode::InvalidState, "encode: no visible tokens");
  cache.blocks.resize(encoder_.size());
  cache.n_tokens = tokens.rows();
  Matrix x = tokens;
  for (std::size_t b = 0; b < encoder_.size(); ++b) x = encoder_[b].forward(x, cache.blocks[b]);
  EncoderOut out;
  out.features = enc_norm_.forward(x, cache.ln);
  out.pooled = out.features.colwise().mean();
  cache.pooled = out.pooled;
  cache.mu_pre = mu1_.forward(out.pooled);
  cache.h_pre = h1_.forward(out.pooled);
  out.mu = mu2_.forward(nn::gelu(cache.mu_pre));
  out.h = h2_.forward(nn::gelu(cache.h_pre));
  nn::require_finite(out.features, "dae encoder features");
  return out;
}

Matrix DaeModel::encode_backward(const Matrix& dfeatures, const RowVector& dpooled,
                                 const RowVector& dmu, const RowVector& dh,
                                 const EncoderCache& cache) const {
  const long n = cache.n_tokens;
  RowVector dp = RowVector::Zero(config_.width);
  if (dpooled.size() > 0) dp += dpooled;
  if (dmu.size() > 0) {
    Matrix da = mu2_.backward(nn::gelu(cache.mu_pre), dmu);
    dp += mu1_.backward(cache.pooled, nn::gelu_backward(cache.mu_pre, da));
  }
  if (dh.size() > 0) {
    Matrix da = h2_.backward(nn::gelu(cache.h_pre), dh);
    dp += h1_.backward(cache.pooled, nn::gelu_backward(cache.h_pre, da));
  }
  Matrix dy = Matrix::Zero(n, config_.width);
  if (dfeatures.size() > 0) dy += dfeatures;
  dy.rowwise() += dp / static_cast<double>(n);
  Matrix dx = enc_norm_.backward(dy, cache.ln);
  for (std::size_t b = encoder_.size(); b-- > 0;) dx = encoder_[b].backward(dx, cache.blocks[b]);
  return dx;
}

Matrix DaeModel::decode_restore(const TokenGeometry& g, const Matrix& features,
                                const std::vector<bool>& visible, const Matrix& pos,
                                const RowVector& pooled, DecoderCache& cache) const {
  const long np = g.centers.rows();
  require(static_cast<long>(visible.size()) == np && pos.rows() == np,
          "decode: token count mismatch");
  cache.visible_index.assign(np, -1);
  long v = 0;
  for (long j = 0; j < np; ++j) {
    if (visible[j]) cache.visible_index[j] = v++;
  }
  require(v == features.rows(), "decode: visible feature count mismatch");
  cache.pooled = pooled;
  Matrix x = pos;
  x.rowwise() += global_.forward(pooled).row(0);
  for (long j = 0; j < np; ++j) {
    x.row(j) += cache.visible_index[j] >= 0 ? Matrix(features.row(cache.visible_index[j]))
                                            : mask_token_->value;
  }
  cache.blocks.resize(decoder_.size());
  for (std::size_t b = 0; b < decoder_.size(); ++b) x = decoder_[b].forward(x, cache.blocks[b]);
  cache.decoded = dec_norm_.forward(x, cache.ln);
  cache.token_proj = token_proj_.forward(cache.decoded);

  const long n = g.points.rows();
  cache.pre.resize(n, config_.restore_hidden);
  for (long i = 0; i < n; ++i) {
    const long a = g.assign[i];
    RowVector rel = g.points.row(i) - g.centers.row(a);
    cache.pre.row(i) = cache.token_proj.row(a) + rel * point_proj_->value;
  }
  cache.act = nn::relu(cache.pre);
  Matrix out = g.points + restore_out_.forward(cache.act);
  nn::require_finite(out, "dae restored points");
  return out;
}

DaeModel::DecoderGrads DaeModel::decode_backward(const TokenGeometry& g, const Matrix& dpoints,
                                                 const DecoderCache& cache) const {
  const long np = g.centers.rows();
  const long n = g.points.rows();
  Matrix dact = restore_out_.backward(cache.act, dpoints);
  Matrix dpre = nn::relu_backward(cache.pre, dact);
  Matrix dtp = Matrix::Zero(np, config_.restore_hidden);
  Matrix rel(n, 3);
  for (long i = 0; i < n; ++i) {
    const long a = g.assign[i];
    rel.row(i) = g.points.row(i) - g.centers.row(a);
    dtp.row(a) += dpre.row(i);
  }
  point_proj_->grad += rel.transpose() * dpre;
  Matrix dx = dec_norm_.backward(token_proj_.backward(cache.decoded, dtp), cache.ln);
  for (std::size_t b = decoder_.size(); b-- > 0;) dx = decoder_[b].backward(dx, cache.blocks[b]);

  DecoderGrads grads;
  long nv = 0;
  for (long j = 0; j < np; ++j) nv += cache.visible_index[j] >= 0;
  grads.dfeatures = Matrix::Zero(nv, config_.width);
  for (long j = 0; j < np; ++j) {
    if (cache.visible_index[j] >= 0) {
      grads.dfeatures.row(cache.visible_index[j]) = dx.row(j);
    } else {
      mask_token_->grad += dx.row(j);
    }
  }
  grads.dpos = dx;
  RowVector dg = dx.colwise().sum();
  grads.dpooled = global_.backward(cache.pooled, dg);
  return grads;
}

TokenizedCloud tokenize(const DaeModel& model, const PointCloud& cloud,
                        const std::vector<std::size_t>& task_indices) {
  const auto& c = model.config();
  TokenGeometry g = patch_geometry(cloud, c.n_patch, c.k_neighbors);
  TokenizedCloud tc;
  tc.task_flags = task_flags(g, task_indices);
  DaeModel::TokenCache cache;
  tc.tokens = model.embed_tokens(g, tc.task_flags, cache);
  tc.positions = g.centers;
  tc.visible_mask.assign(tc.task_flags.size(), true);
  return tc;
}

std::vector<bool> mask_flags(const std::vector<bool>& flags, double ratio, std::uint64_t seed) {
  require(ratio >= 0.0 && ratio < 1.0, "mask_tokens: ratio must be in [0, 1)");
  std::vector<std::size_t> pool;
  for (std::size_t j = 0; j < flags.size(); ++j) {
    if (!flags[j]) pool.push_back(j);
  }
  const auto n_mask = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pool.size())));
  Rng rng(seed);
  for (std::size_t i = 0; i < n_mask; ++i) {
    std::size_t r = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[r]);
  }
  std::vector<bool> visible(flags.size(), true);
  for (std::size_t i = 0; i < n_mask; ++i) visible[pool[i]] = false;
  return visible;
}

TokenizedCloud mask_tokens(const TokenizedCloud& tc, double ratio, std::uint64_t seed) {
  TokenizedCloud out = tc;
  auto vis = mask_flags(tc.task_flags, ratio, seed);
  for (std::size_t j = 0; j < vis.size(); ++j) out.visible_mask[j] = tc.visible_mask[j] && vis[j];
  return out;
}

EncodeResult encode(const DaeModel& model, const TokenizedCloud& tc) {
  std::vector<long> rows;
  for (std::size_t j = 0; j < tc.visible_mask.size(); ++j) {
    if (tc.visible_mask[j]) rows.push_back(static_cast<long>(j));
  }
  if (rows.empty()) fail(ErrorCode::InvalidState, "encode: every token is masked");
  Matrix vis(rows.size(), tc.tokens.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) vis.row(r) = tc.tokens.row(rows[r]);
  DaeModel::EncoderCache cache;
  auto out = model.encode_tokens(vis, cache);
  EncodeResult res;
  res.features = std::move(out.features);
  res.latent = out.pooled;
  res.stats.mu = out.mu;
  res.stats.sigma = out.h.array().exp().matrix();
  return res;
}

double latent_kl(const LatentStats& s, double target) {
  require(s.mu.size() == s.sigma.size() && s.mu.size() > 0, "latent_kl: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < s.mu.size(); ++i) {
    acc += nn::gaussian_kl_closed(s.mu[i], s.sigma[i], target, 1.0);
  }
  return acc / static_cast<double>(s.mu.size());
}

double plausibility_from_stats(const LatentStats& s) {
  const double z = -latent_kl(s, 0.0) + latent_kl(s, 1.0);
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

PointCloud prepared(const DaeModel& model, const PointCloud& cloud,
                    const std::vector<std::size_t>& task_indices,
                    std::vector<std::size_t>& task_out) {
  cloud.validate();
  require(!cloud.empty(), "dae: empty cloud");
  const std::size_t need = static_cast<std::size_t>(
      std::max(model.config().n_patch, model.config().k_neighbors));
  std::vector<bool> is_task(cloud.size(), false);
  for (auto i : task_indices) {
    require(i < cloud.size(), "dae: task index out of range");
    is_task[i] = true;
  }
  if (cloud.size() >= need && cloud.size() == model.config().n_restore) {
    task_out = task_indices;
    return cloud;
  }
  auto idx = resample_indices(cloud, model.config().n_restore);
  task_out.clear();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (is_task[idx[r]]) task_out.push_back(r);
  }
  return cloud.subset(idx);
}

}  // namespace

double plausibility(const DaeModel& model, const PointCloud& cloud,
                    const std::vector<std::size_t>& task_indices) {
  std::vector<std::size_t> task;
  PointCloud c = prepared(model, cloud, task_indices, task);
  auto tc = tokenize(model, c, task);
  return plausibility_from_stats(encode(model, tc).stats);
}

PointCloud restore(const DaeModel& model, const PointCloud& cloud,
                   const std::vector<std::size_t>& task_indices) {
  const auto& cfg = model.config();
  std::vector<std::size_t> task;
  PointCloud c = prepared(model, cloud, task_indices, task);
  TokenGeometry g = patch_geometry(c, cfg.n_patch, cfg.k_neighbors);
  auto flags = task_flags(g, task);
  DaeModel::TokenCache tcache;
  Matrix tokens = model.embed_tokens(g, flags, tcache);
  DaeModel::EncoderCache ecache;
  auto enc = model.encode_tokens(tokens, ecache);
  DaeModel::DecoderCache dcache;
  std::vector<bool> all(flags.size(), true);
  Matrix pts = model.decode_restore(g, enc.features, all, tcache.pos, enc.pooled, dcache);
  PointCloud out;
  out.points.resize(pts.rows());
  const double inv = 1.0 / g.normalization.scale;
  for (long i = 0; i < pts.rows(); ++i) {
    out.points[i] = pts.row(i).transpose() * inv + g.normalization.center;
  }
  out.labels = c.labels;
  return out;
}

Selection select_and_restore(const DaeModel& model, const std::vector<Candidate>& candidates) {
  Selection sel;
  sel.scores.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  double best = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.failed) continue;
    sel.scores[i] = plausibility(model, c.cloud, c.task_mask);
    if (!any || sel.scores[i] > best) {
      best = sel.scores[i];
      sel.best_index = i;
      any = true;
    }
  }
  if (!any) fail(ErrorCode::NoCandidate, "select_and_restore: every candidate failed");
  const auto& c = candidates[sel.best_index];
  sel.restored = restore(model, c.cloud, c.task_mask);
  return sel;
}

}  // namespace tosc
