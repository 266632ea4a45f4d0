#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tosc/candgen/candidates.hpp"
#include "tosc/geom/point_cloud.hpp"
#include "tosc/geom/sampling.hpp"
#include "tosc/nnet/layers.hpp"
#include "tosc/nnet/tensor.hpp"

namespace tosc {

struct DaeConfig {
  long n_patch = 64;
  long k_neighbors = 32;
  long width = 128;
  int heads = 4;
  long mlp_dim = 256;
  long latent = 64;
  int n_encoder = 4;
  int n_decoder = 2;
  long token_hidden = 64;    // set-pool hidden width
  long restore_hidden = 64;  // per-point restore head width
  std::size_t n_restore = 2048;
  double mask_ratio = 0.6;

  void validate() const;
  std::string to_json() const;
  static DaeConfig from_json(const std::string& text);
};

/// Patch structure of one cloud, independent of the network weights. The
/// cloud is normalized (unit bbox diagonal, zero centroid) before patching.
struct TokenGeometry {
  Normalization normalization;
  nn::Matrix points;   // n x 3, normalized
  nn::Matrix centers;  // n_patch x 3
  nn::Matrix rel;      // (n_patch * k) x 3, group members minus their center
  PatchSet patches;
  std::vector<long> assign;  // nearest patch center of every point
};

TokenGeometry patch_geometry(const PointCloud& cloud, long n_patch, long k_neighbors);

struct TokenizedCloud {
  nn::Matrix tokens;     // n_patch x width
  nn::Matrix positions;  // patch centers, n_patch x 3
  std::vector<bool> task_flags;
  std::vector<bool> visible_mask;
};

struct LatentStats {
  nn::RowVector mu;
  nn::RowVector sigma;
};

class DaeModel {
 public:
  DaeModel(const DaeConfig& config, std::uint64_t seed);
  DaeModel(const DaeModel&) = delete;
  DaeModel& operator=(const DaeModel&) = delete;

  const DaeConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  // Stage caches; exposed so training can run the stages separately.
  struct TokenCache {
    nn::SetPool::Cache pool;
    nn::Matrix pos_pre;
    nn::Matrix pos;  // positional embedding, n_patch x width
  };
  struct EncoderCache {
    std::vector<nn::TransformerBlock::Cache> blocks;
    nn::LayerNorm::Cache ln;
    nn::RowVector pooled;
    nn::Matrix mu_pre, h_pre;
    long n_tokens = 0;
  };
  struct EncoderOut {
    nn::Matrix features;  // visible tokens x width
    nn::RowVector pooled;
    nn::RowVector mu, h;  // h is the log standard deviation
  };
  struct DecoderCache {
    std::vector<nn::TransformerBlock::Cache> blocks;
    nn::LayerNorm::Cache ln;
    std::vector<long> visible_index;  // token -> row in features, or -1
    nn::Matrix decoded;
    nn::Matrix token_proj;  // n_patch x restore_hidden
    nn::Matrix pre, act;    // per-point restore head
    nn::RowVector pooled;
  };

  nn::Matrix embed_tokens(const TokenGeometry& g, const std::vector<bool>& flags,
                          TokenCache& cache) const;
  void embed_tokens_backward(const TokenGeometry& g, const std::vector<bool>& flags,
                             const nn::Matrix& dtokens, const nn::Matrix& dpos,
                             const TokenCache& cache) const;

  EncoderOut encode_tokens(const nn::Matrix& tokens, EncoderCache& cache) const;
  /// Returns d(tokens). Any of the upstream gradients may be empty.
  nn::Matrix encode_backward(const nn::Matrix& dfeatures, const nn::RowVector& dpooled,
                             const nn::RowVector& dmu, const nn::RowVector& dh,
                             const EncoderCache& cache) const;

  /// Restored points (normalized frame) for every point of g.
  nn::Matrix decode_restore(const TokenGeometry& g, const nn::Matrix& features,
                            const std::vector<bool>& visible, const nn::Matrix& pos,
                            const nn::RowVector& pooled, DecoderCache& cache) const;
  struct DecoderGrads {
    nn::Matrix dfeatures;
    nn::Matrix dpos;
    nn::RowVector dpooled;
  };
  DecoderGrads decode_backward(const TokenGeometry& g, const nn::Matrix& dpoints,
                               const DecoderCache& cache) const;

 private:
  DaeConfig config_;
  nn::ParamSet params_;
  nn::SetPool pool_;
  nn::Linear pos1_, pos2_;
  nn::Embedding flag_;
  std::vector<nn::TransformerBlock> encoder_;
  nn::LayerNorm enc_norm_;
  nn::Linear mu1_, mu2_, h1_, h2_;
  nn::Tensor* mask_token_ = nullptr;
  nn::Linear global_;
  std::vector<nn::TransformerBlock> decoder_;
  nn::LayerNorm dec_norm_;
  nn::Linear token_proj_;
  nn::Tensor* point_proj_ = nullptr;  // 3 x restore_hidden
  nn::Linear restore_out_;
};

/// Task flags: token i is flagged iff its KNN group contains a task index.
std::vector<bool> task_flags(const TokenGeometry& g, const std::vector<std::size_t>& task_indices);

TokenizedCloud tokenize(const DaeModel& model, const PointCloud& cloud,
                        const std::vector<std::size_t>& task_indices);

/// Masks floor(ratio * non-task tokens) uniformly chosen non-task tokens.
TokenizedCloud mask_tokens(const TokenizedCloud& tc, double ratio, std::uint64_t seed);
std::vector<bool> mask_flags(const std::vector<bool>& task_flags, double ratio, std::uint64_t seed);

struct EncodeResult {
  nn::Matrix features;
  nn::RowVector latent;  // l_can
  LatentStats stats;
};

/// Attention over the visible tokens only; throws InvalidState if none.
EncodeResult encode(const DaeModel& model, const TokenizedCloud& tc);

/// Per-dimension-mean KL( N(mu, sigma^2) || N(target, 1) ).
double latent_kl(const LatentStats& s, double target);
/// sigmoid(-KL to N(0,1) + KL to N(1,1)).
double plausibility_from_stats(const LatentStats& s);

double plausibility(const DaeModel& model, const PointCloud& cloud,
                    const std::vector<std::size_t>& task_indices);

/// Restored cloud (n_restore points, labels carried) from the unmasked encoding.
PointCloud restore(const DaeModel& model, const PointCloud& cloud,
                   const std::vector<std::size_t>& task_indices);

struct Selection {
  std::size_t best_index = 0;
  std::vector<double> scores;  // NaN for failed candidates
  PointCloud restored;
};

/// argmax plausibility over non-failed candidates (ties -> lowest index).
Selection select_and_restore(const DaeModel& model, const std::vector<Candidate>& candidates);

}  // namespace tosc
