#include "tosc/dae/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/common/rng.hpp"
#include "tosc/nnet/adam.hpp"
#include "tosc/nnet/checkpoint.hpp"
#include "tosc/nnet/losses.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc {

using nn::Matrix;
using nn::RowVector;

DaeExample make_example(const DaeConfig& config, const DatasetSample& sample) {
  PointCloud obs = sample.partial;
  if (obs.size() != config.n_restore) obs = resample(obs, config.n_restore);
  DaeExample ex;
  ex.plausible = sample.plausible;
  ex.geometry = patch_geometry(obs, config.n_patch, config.k_neighbors);
  const RegionId region = region_from_name(sample.task.target_region);
  ex.flags = task_flags(ex.geometry, obs.indices_with_label(region));
  const auto& nrm = ex.geometry.normalization;
  ex.ground_truth.resize(static_cast<long>(sample.ground_truth.size()), 3);
  for (std::size_t i = 0; i < sample.ground_truth.size(); ++i) {
    ex.ground_truth.row(static_cast<long>(i)) = nrm.apply(sample.ground_truth.points[i]).transpose();
  }
  ex.ground_truth_tree = KdTree(apply(nrm, sample.ground_truth));
  return ex;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<bool>& keep) {
  long n = 0;
  for (bool k : keep) n += k;
  Matrix out(n, m.cols());
  long r = 0;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) out.row(r++) = m.row(static_cast<long>(j));
  }
  return out;
}

Matrix scatter_rows(const Matrix& m, const std::vector<bool>& keep) {
  Matrix out = Matrix::Zero(static_cast<long>(keep.size()), m.cols());
  long r = 0;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j]) out.row(static_cast<long>(j)) = m.row(r++);
  }
  return out;
}

}  // namespace

DaeLossTerms loss_terms(DaeModel& model, const std::vector<const DaeExample*>& plausible,
                        const std::vector<const DaeExample*>& implausible, double mask_ratio,
                        std::uint64_t mask_seed, bool accumulate) {
  require(!plausible.empty() && !implausible.empty(), "loss_terms: batches must be non-empty");
  require(mask_ratio >= 0.0 && mask_ratio < 1.0, "loss_terms: mask_ratio must be in [0, 1)");
  DaeLossTerms out;
  const double wp = 1.0 / static_cast<double>(plausible.size());
  const double wn = 1.0 / static_cast<double>(implausible.size());

  for (std::size_t s = 0; s < plausible.size(); ++s) {
    const DaeExample& ex = *plausible[s];
    DaeModel::TokenCache tcache;
    Matrix tokens = model.embed_tokens(ex.geometry, ex.flags, tcache);

    // Full-input pass: KL to N(0,1) and the L_mask target.
    DaeModel::EncoderCache full_cache;
    auto full = model.encode_tokens(tokens, full_cache);
    RowVector dmu, dh;
    out.pos_kl += wp * nn::gaussian_kl(full.mu, full.h, 0.0, &dmu, &dh);

    // Masked pass: L_mask against the full-input features, and restoration.
    auto visible = mask_flags(ex.flags, mask_ratio, derive_seed(mask_seed, "mask", s));
    Matrix vis_tokens = gather_rows(tokens, visible);
    DaeModel::EncoderCache mask_cache;
    auto masked = model.encode_tokens(vis_tokens, mask_cache);
    Matrix dfeat_mask;
    out.mask += wp * nn::mse(masked.features, gather_rows(full.features, visible), &dfeat_mask);

    DaeModel::DecoderCache dcache;
    Matrix restored = model.decode_restore(ex.geometry, masked.features, visible, tcache.pos,
                                           masked.pooled, dcache);
    Matrix dpts;
    out.restore += wp * nn::chamfer_loss(restored, ex.ground_truth, ex.ground_truth_tree, accumulate ? &dpts : nullptr);

    if (!accumulate) continue;
    auto dgr = model.decode_backward(ex.geometry, dpts * wp, dcache);
    Matrix dvis = model.encode_backward(dgr.dfeatures + dfeat_mask * wp, dgr.dpooled, {}, {},
                                        mask_cache);
    Matrix dtokens = scatter_rows(dvis, visible);
    dtokens += model.encode_backward(scatter_rows(-dfeat_mask * wp, visible), {}, dmu * wp,
                                     dh * wp, full_cache);
    model.embed_tokens_backward(ex.geometry, ex.flags, dtokens, dgr.dpos, tcache);
  }

  for (const DaeExample* exp : implausible) {
    const DaeExample& ex = *exp;
    DaeModel::TokenCache tcache;
    Matrix tokens = model.embed_tokens(ex.geometry, ex.flags, tcache);
    DaeModel::EncoderCache cache;
    auto full = model.encode_tokens(tokens, cache);
    RowVector dmu, dh;
    out.neg_kl += wn * nn::gaussian_kl(full.mu, full.h, 1.0, &dmu, &dh);
    if (!accumulate) continue;
    Matrix dtokens = model.encode_backward({}, {}, dmu * wn, dh * wn, cache);
    model.embed_tokens_backward(ex.geometry, ex.flags, dtokens, {}, tcache);
  }
  out.total = out.pos_kl + out.neg_kl + out.restore + out.mask;
  return out;
}

std::vector<DaeEpochLog> train_dae(DaeModel& model, const std::vector<DatasetSample>& dataset,
                                   const DaeTrainConfig& config, const DaeEpochCallback& on_epoch) {
  require(config.epochs >= 1, "train_dae: epochs must be >= 1");
  require(config.batch >= 2, "train_dae: batch must be >= 2");
  require(config.lr > 0.0 && config.weight_decay >= 0.0, "train_dae: bad optimizer settings");
  std::vector<DaeExample> pos, neg;
  for (const auto& s : dataset) {
    (s.plausible ? pos : neg).push_back(make_example(model.config(), s));
  }
  require(!pos.empty() && !neg.empty(), "train_dae: dataset must contain both classes");

  nn::AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;
  const std::size_t half = static_cast<std::size_t>(std::max(1, config.batch / 2));
  const std::size_t steps = (std::max(pos.size(), neg.size()) + half - 1) / half;

  std::vector<std::size_t> pord(pos.size()), nord(neg.size());
  std::vector<DaeEpochLog> log;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(pord.begin(), pord.end(), 0);
    std::iota(nord.begin(), nord.end(), 0);
    Rng rng = make_rng(config.seed, "dae-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(pord.begin(), pord.end(), rng);
    std::shuffle(nord.begin(), nord.end(), rng);

    DaeEpochLog entry;
    entry.epoch = epoch;
    for (std::size_t st = 0; st < steps; ++st) {
      std::vector<const DaeExample*> pb, nb;
      for (std::size_t i = 0; i < half; ++i) {
        pb.push_back(&pos[pord[(st * half + i) % pos.size()]]);
        nb.push_back(&neg[nord[(st * half + i) % neg.size()]]);
      }
      model.params().zero_grad();
      const auto seed = derive_seed(config.seed, "dae-step",
                                    static_cast<std::uint64_t>(epoch) * steps + st);
      auto l = loss_terms(model, pb, nb, config.mask_ratio, seed, true);
      model.params().check_finite();
      nn::adam_step(model.params(), adam);
      entry.loss.pos_kl += l.pos_kl / steps;
      entry.loss.neg_kl += l.neg_kl / steps;
      entry.loss.restore += l.restore / steps;
      entry.loss.mask += l.mask / steps;
      entry.loss.total += l.total / steps;
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<DaeEpochLog>& log) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
  f << "epoch,l_pos_kl,l_neg_kl,l_restore,l_mask,total\n";
  f.precision(10);
  for (const auto& e : log) {
    f << e.epoch << ',' << e.loss.pos_kl << ',' << e.loss.neg_kl << ',' << e.loss.restore << ','
      << e.loss.mask << ',' << e.loss.total << '\n';
  }
}

void save_dae(const std::filesystem::path& path, const DaeModel& model) {
  nlohmann::json meta = {{"model", "dae"},
                         {"config", nlohmann::json::parse(model.config().to_json())}};
  nn::save_checkpoint(path, model.params(), meta.dump());
}

std::unique_ptr<DaeModel> load_dae(const std::filesystem::path& path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(nn::read_checkpoint_meta(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, "dae checkpoint meta: " + std::string(e.what()));
  }
  if (meta.value("model", "") != "dae" || !meta.contains("config")) {
    fail(ErrorCode::InvalidArgument, "not a dae checkpoint: " + path.string());
  }
  auto model = std::make_unique<DaeModel>(DaeConfig::from_json(meta["config"].dump()), 0);
  nn::load_checkpoint(path, model->params());
  return model;
}

}  // namespace tosc
