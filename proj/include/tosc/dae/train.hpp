#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "tosc/dae/dae.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/synth/dataset.hpp"

namespace tosc {

struct DaeLossTerms {
  double pos_kl = 0.0;
  double neg_kl = 0.0;
  double restore = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

/// One training observation with its cached patch geometry. The ground truth
/// is expressed in the observation's normalized frame.
struct DaeExample {
  TokenGeometry geometry;
  std::vector<bool> flags;
  nn::Matrix ground_truth;
  KdTree ground_truth_tree;
  bool plausible = true;
};

DaeExample make_example(const DaeConfig& config, const DatasetSample& sample);

/// Evaluates the four loss terms on the two batches. With accumulate set,
/// gradients of `total` are added to the model's parameter grads. Masks are
/// drawn from mask_seed, one stream per plausible example.
DaeLossTerms loss_terms(DaeModel& model, const std::vector<const DaeExample*>& plausible,
                        const std::vector<const DaeExample*>& implausible, double mask_ratio,
                        std::uint64_t mask_seed, bool accumulate = false);

struct DaeTrainConfig {
  int epochs = 300;
  double lr = 5e-4;
  double weight_decay = 0.05;
  int batch = 16;  // half plausible, half implausible
  double mask_ratio = 0.6;
  std::uint64_t seed = 0;
};

struct DaeEpochLog {
  int epoch = 0;
  DaeLossTerms loss;
  double seconds = 0.0;
};

using DaeEpochCallback = std::function<void(const DaeEpochLog&)>;

/// Throws InvalidArgument unless the dataset contains both classes.
std::vector<DaeEpochLog> train_dae(DaeModel& model, const std::vector<DatasetSample>& dataset,
                                   const DaeTrainConfig& config,
                                   const DaeEpochCallback& on_epoch = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<DaeEpochLog>& log);

void save_dae(const std::filesystem::path& path, const DaeModel& model);
std::unique_ptr<DaeModel> load_dae(const std::filesystem::path& path);

}  // namespace tosc
