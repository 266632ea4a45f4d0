#include "tosc/synth/dataset.hpp"

#include <fstream>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/geom/io.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/geom/metrics.hpp"
#include "tosc/geom/sampling.hpp"

namespace tosc {

namespace fs = std::filesystem;
using nlohmann::json;

double task_retention(const PointCloud& sample, const PointCloud& gt, RegionId region,
                      double radius) {
  const auto idx = gt.indices_with_label(region);
  if (idx.empty()) return 1.0;
  if (sample.empty()) return 0.0;
  const KdTree tree(sample);
  std::size_t hit = 0;
  for (std::size_t i : idx) hit += tree.nearest(gt.points[i]).sq_dist <= radius * radius ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

PointCloud plausible_observation(const GeneratedShape& gt, const TaskSpec& task,
                                 const DatasetConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "observation"));
  const RegionId target = region_from_name(task.target_region);
  const int views = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.max_views)));
  PointCloud merged;
  for (int v = 0; v < views; ++v) {
    const Vec3 eye = random_viewpoint(gt.cloud, rng, config.view_distance);
    const int occ = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.max_occluders) + 1));
    merged = concat(merged, render_partial(gt.cloud, eye, config.noise_sigma, occ,
                                           derive_seed(seed, "view", v)));
  }
  merged = concat(merged, gt.cloud.subset(gt.cloud.indices_with_label(target)));
  return resample(merged, config.n_points);
}

namespace {

std::vector<SabotageOp> random_ops(Rng& rng) {
  const std::size_t mask = 1 + uniform_index(rng, 7);
  std::vector<SabotageOp> ops;
  if (mask & 1u) ops.push_back(SabotageOp::RemoveTaskRegion);
  if (mask & 2u) ops.push_back(SabotageOp::AddNoise);
  if (mask & 4u) ops.push_back(SabotageOp::PerturbPatches);
  return ops;
}

double region_chamfer(const PointCloud& a, const PointCloud& b, RegionId r) {
  const auto ia = a.indices_with_label(r), ib = b.indices_with_label(r);
  if (ia.empty() || ib.empty()) return 0.0;
  return chamfer(a.subset(ia), b.subset(ib));
}

}  // namespace

std::vector<DatasetSample> build_dataset(std::size_t n_plausible, std::size_t n_implausible,
                                         std::uint64_t seed, const DatasetConfig& config) {
  require(n_plausible >= 1 && n_implausible >= 1, "build_dataset: counts must be >= 1");
  require(!config.kinds.empty(), "build_dataset: no shape kinds");
  require(config.max_views >= 1 && config.max_occluders >= 0, "build_dataset: bad view config");

  std::vector<DatasetSample> out;
  double cd_implausible = 0.0, cd_plausible_task = 0.0;
  for (std::size_t i = 0; i < n_plausible + n_implausible; ++i) {
    DatasetSample s;
    s.seed = derive_seed(seed, "sample", i);
    s.plausible = i < n_plausible;
    Rng rng(s.seed);
    const ShapeKind kind = config.kinds[uniform_index(rng, config.kinds.size())];
    const auto tasks = tasks_for(kind_name(kind));
    s.task = make_task(kind_name(kind), tasks[uniform_index(rng, tasks.size())]);
    const auto params = jitter_params(kind, rng, config.param_spread);
    const auto gt = generate_shape(kind, params, config.n_points, derive_seed(s.seed, "shape"));
    s.ground_truth = gt.cloud;
    s.partial = plausible_observation(gt, s.task, config, derive_seed(s.seed, "observe"));
    const RegionId target = region_from_name(s.task.target_region);
    if (s.plausible) {
      const double kept = task_retention(s.partial, gt.cloud, target, config.retention_radius);
      if (kept < 0.95) {
        fail(ErrorCode::InvalidState, "build_dataset: plausible sample lost its task region");
      }
      cd_plausible_task += region_chamfer(s.partial, s.ground_truth, target);
    } else {
      const auto ops = random_ops(rng);
      auto sab = sabotage(s.partial, s.task, ops, derive_seed(s.seed, "sabotage"));
      s.corruption = sab.record;
      s.partial = resample(sab.cloud, config.n_points);
      cd_implausible += chamfer(s.partial, s.ground_truth);
    }
    s.id = (s.plausible ? "p" : "n") + std::to_string(i);
    out.push_back(std::move(s));
  }
  cd_implausible /= static_cast<double>(n_implausible);
  cd_plausible_task /= static_cast<double>(n_plausible);
  if (!(cd_implausible > cd_plausible_task)) {
    fail(ErrorCode::InvalidState, "build_dataset: implausible samples are not separated");
  }
  return out;
}

namespace {

json record_json(const CorruptionRecord& r) {
  json ops = json::array();
  for (auto op : r.ops) ops.push_back(to_string(op));
  return {{"ops", ops},
          {"removed_points", r.removed_points},
          {"outlier_points", r.outlier_points},
          {"perturbed_patches", r.perturbed_patches},
          {"max_shift", r.max_shift}};
}

CorruptionRecord record_from_json(const json& j) {
  CorruptionRecord r;
  for (const auto& op : j.at("ops")) r.ops.push_back(sabotage_op_from_string(op.get<std::string>()));
  r.removed_points = j.at("removed_points").get<int>();
  r.outlier_points = j.at("outlier_points").get<int>();
  r.perturbed_patches = j.at("perturbed_patches").get<int>();
  r.max_shift = j.at("max_shift").get<double>();
  return r;
}

}  // namespace

void write_dataset(const fs::path& dir, const std::vector<DatasetSample>& samples) {
  fs::create_directories(dir / "clouds");
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
  if (!manifest) fail(ErrorCode::Io, "cannot write " + (dir / "manifest.jsonl").string());
  for (const auto& s : samples) {
    const std::string partial = "clouds/" + s.id + "_partial.ply";
    const std::string gt = "clouds/" + s.id + "_gt.ply";
    io::write_ply(dir / partial, s.partial);
    io::write_ply(dir / gt, s.ground_truth);
    const json rec = {{"id", s.id},
                      {"partial", partial},
                      {"ground_truth", gt},
                      {"task_text", s.task.task_text},
                      {"category", s.task.category},
                      {"target_region", s.task.target_region},
                      {"plausible", s.plausible},
                      {"corruption_record", record_json(s.corruption)},
                      {"seed", s.seed}};
    manifest << rec.dump() << '\n';
  }
  if (!manifest) fail(ErrorCode::Io, "write failed: " + (dir / "manifest.jsonl").string());
}

std::vector<DatasetSample> read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.jsonl";
  std::ifstream in(mpath);
  if (!in) fail(ErrorCode::Io, "cannot open dataset manifest " + mpath.string());
  std::vector<DatasetSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      DatasetSample s;
      s.id = j.at("id").get<std::string>();
      s.partial = io::read_ply(dir / j.at("partial").get<std::string>());
      s.ground_truth = io::read_ply(dir / j.at("ground_truth").get<std::string>());
      s.task = TaskSpec{j.at("task_text").get<std::string>(), j.at("category").get<std::string>(),
                        j.at("target_region").get<std::string>()};
      s.plausible = j.at("plausible").get<bool>();
      s.corruption = record_from_json(j.at("corruption_record"));
      s.seed = j.at("seed").get<std::uint64_t>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      fail(ErrorCode::Io, mpath.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tosc
