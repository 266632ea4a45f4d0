#include <cmath>
#include <fstream>
#include <sstream>

#include "tosc/candgen/candidates.hpp"
#include "tosc/cli/pipeline.hpp"
#include "tosc/common/rng.hpp"
#include "tosc/dae/train.hpp"
#include "tosc/evalx/evalx.hpp"
#include "tosc/flowgrasp/flow.hpp"
#include "tosc/flowgrasp/grasps.hpp"
#include "tosc/geom/io.hpp"
#include "tosc/geom/metrics.hpp"
#include "tosc/geom/sampling.hpp"
#include "tosc/synth/dataset.hpp"
#include "tosc/synth/partial.hpp"

namespace tosc::cli {

namespace {

template <class T>
T get(const json& cfg, const std::string& path) {
  const json& v = at_path(cfg, path);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Config, "config " + path + ": wrong type");
  }
}

// Library argument errors raised while building a section become config
// errors naming that section.
template <class F>
auto in_section(const std::string& section, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument && e.code() != ErrorCode::Config) throw;
    fail(ErrorCode::Config, "config " + section + ": " + e.what());
  }
}

fs::path out_dir(const json& cfg) {
  const auto out = get<std::string>(cfg, "paths.out");
  if (out.empty()) fail(ErrorCode::Config, "config paths.out: required");
  fs::create_directories(out);
  return out;
}

fs::path input_path(const json& cfg, const std::string& key) {
  const auto p = get<std::string>(cfg, "paths." + key);
  if (p.empty()) fail(ErrorCode::Config, "config paths." + key + ": required");
  if (!fs::exists(p)) fail(ErrorCode::Io, "missing file: " + p);
  return p;
}

std::uint64_t root_seed(const json& cfg) { return get<std::uint64_t>(cfg, "seed"); }

TaskSpec task_of(const json& cfg) {
  return make_task(get<std::string>(cfg, "task.category"), get<std::string>(cfg, "task.text"));
}

ShapeKind category_kind(const std::string& category) {
  try {
    return kind_from_name(category);
  } catch (const Error& e) {
    fail(ErrorCode::CategoryNotFound, e.what());
  }
}

DatasetConfig dataset_config(const json& cfg) {
  DatasetConfig d;
  d.n_points = get<std::size_t>(cfg, "data.n_points");
  d.noise_sigma = get<double>(cfg, "data.noise_sigma");
  d.max_views = get<int>(cfg, "data.max_views");
  d.max_occluders = get<int>(cfg, "data.max_occluders");
  d.view_distance = get<double>(cfg, "data.view_distance");
  d.param_spread = get<double>(cfg, "data.param_spread");
  d.retention_radius = get<double>(cfg, "data.retention_radius");
  d.kinds.clear();
  for (const auto& k : at_path(cfg, "data.kinds")) {
    d.kinds.push_back(in_section("data.kinds", [&] { return kind_from_name(k.get<std::string>()); }));
  }
  return d;
}

DaeConfig dae_config(const json& cfg) {
  return in_section("dae.model", [&] { return DaeConfig::from_json(at_path(cfg, "dae.model").dump()); });
}

FlowConfig flow_config(const json& cfg) {
  return in_section("flow.model", [&] { return FlowConfig::from_json(at_path(cfg, "flow.model").dump()); });
}

DisplacementConfig displacement_config(const json& cfg) {
  DisplacementConfig d;
  d.mu = get<double>(cfg, "evaluate.mu");
  d.d_max_cm = get<double>(cfg, "evaluate.d_max_cm");
  d.steps = get<int>(cfg, "evaluate.solver_steps");
  d.contact_threshold = get<double>(cfg, "evaluate.contact_threshold");
  d.stiffness = get<double>(cfg, "evaluate.stiffness");
  d.preload = get<double>(cfg, "evaluate.preload");
  return d;
}

void write_text(const fs::path& path, const std::string& text, RunManifest& m) {
  write_file_atomic(path, text);
  m.add_output(path);
}

void write_ply(const fs::path& path, const PointCloud& cloud, RunManifest& m) {
  io::write_ply(path, cloud);
  m.add_output(path);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

// ---- shapes and fixtures ----

json shape_spec_json(const ShapeSpec& s) {
  return {{"kind", std::string(kind_name(s.kind))},
          {"params", s.params},
          {"n_points", s.n_points},
          {"seed", s.seed}};
}

ShapeSpec shape_spec_from_json(const json& j) {
  ShapeSpec s;
  try {
    s.kind = category_kind(j.at("kind").get<std::string>());
    s.params = j.at("params").get<ShapeParams>();
    s.n_points = j.at("n_points").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, std::string("shape spec: ") + e.what());
  }
  return s;
}

ShapeSpec read_shape_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::Io, path.string() + ": not valid JSON");
  return shape_spec_from_json(j);
}

GeneratedShape build(const ShapeSpec& s) { return generate_shape(s.kind, s.params, s.n_points, s.seed); }

PointCloud dense_surface(const ShapeSpec& s, std::size_t n_points) {
  const GeneratedShape frame = build(s);
  GeneratedShape dense = generate_shape(s.kind, s.params, n_points, s.seed);
  const Normalization& from = dense.shape.normalization;
  const Normalization& to = frame.shape.normalization;
  for (auto& p : dense.cloud.points) p = to.apply(p / from.scale + from.center);
  return dense.cloud;
}

Fixture make_fixture(const json& cfg, std::size_t index) {
  const std::uint64_t seed = derive_seed(get<std::uint64_t>(cfg, "data.fixture_seed"), "fixture", index);
  Rng rng(seed);
  Fixture f;
  f.spec.kind = category_kind(get<std::string>(cfg, "task.category"));
  f.spec.params = jitter_params(f.spec.kind, rng, get<double>(cfg, "data.param_spread"));
  f.spec.n_points = get<std::size_t>(cfg, "data.n_points");
  f.spec.seed = derive_seed(seed, "shape");
  f.shape = build(f.spec);
  const Vec3 eye = random_viewpoint(f.shape.cloud, rng, get<double>(cfg, "data.view_distance"));
  f.partial = render_partial(f.shape.cloud, eye, get<double>(cfg, "data.noise_sigma"), 0,
                             derive_seed(seed, "view"));
  return f;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  require(scores.size() == positive.size(), "roc_auc: size mismatch");
  double pairs = 0.0, wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
    }
  }
  require(pairs > 0.0, "roc_auc: need both classes");
  return wins / pairs;
}

// ---- commands ----

RunManifest cmd_gen_data(const json& cfg) {
  RunManifest m("gen-data", cfg);
  const fs::path out = out_dir(cfg);
  const auto dcfg = dataset_config(cfg);
  const auto np = get<std::size_t>(cfg, "data.plausible"), nn = get<std::size_t>(cfg, "data.implausible");
  m.set_seed("root", root_seed(cfg));
  std::vector<DatasetSample> samples;
  {
    StageTimer t(m, "build");
    samples = in_section("data", [&] { return build_dataset(np, nn, root_seed(cfg), dcfg); });
  }
  {
    StageTimer t(m, "write");
    write_dataset(out, samples);
    m.add_output(out / "manifest.jsonl");
    for (const auto& s : samples) {
      m.add_output(out / "clouds" / (s.id + "_partial.ply"));
      m.add_output(out / "clouds" / (s.id + "_gt.ply"));
    }
  }
  const auto nf = get<std::size_t>(cfg, "data.fixtures");
  if (nf > 0) {
    StageTimer t(m, "fixtures");
    m.set_seed("fixtures", get<std::uint64_t>(cfg, "data.fixture_seed"));
    for (std::size_t i = 0; i < nf; ++i) {
      const Fixture f = make_fixture(cfg, i);
      char name[32];
      std::snprintf(name, sizeof name, "f%03zu", i);
      const fs::path dir = out / "fixtures" / name;
      fs::create_directories(dir);
      write_text(dir / "shape.json", shape_spec_json(f.spec).dump(2) + "\n", m);
      write_ply(dir / "gt.ply", f.shape.cloud, m);
      write_ply(dir / "partial.ply", f.partial, m);
    }
  }
  m.set_summary({{"samples", samples.size()}, {"plausible", np}, {"implausible", nn}, {"fixtures", nf}});
  m.write(out);
  return m;
}

RunManifest cmd_train_dae(const json& cfg) {
  RunManifest m("train-dae", cfg);
  const fs::path data = input_path(cfg, "data");
  const fs::path out = out_dir(cfg);
  m.add_input(data / "manifest.jsonl");
  const auto dataset = read_dataset(data);
  const DaeConfig mc = dae_config(cfg);
  DaeTrainConfig tc;
  tc.epochs = get<int>(cfg, "dae.epochs");
  tc.lr = get<double>(cfg, "dae.lr");
  tc.weight_decay = get<double>(cfg, "dae.weight_decay");
  tc.batch = get<int>(cfg, "dae.batch");
  tc.mask_ratio = get<double>(cfg, "dae.mask_ratio");
  tc.seed = derive_seed(root_seed(cfg), "dae-train");
  const std::uint64_t init = derive_seed(root_seed(cfg), "dae-init");
  m.set_seed("root", root_seed(cfg));
  m.set_seed("init", init);
  m.set_seed("train", tc.seed);
  DaeModel model(mc, init);
  std::vector<DaeEpochLog> log;
  {
    StageTimer t(m, "train");
    log = in_section("dae", [&] { return train_dae(model, dataset, tc); });
  }
  save_dae(out / "dae.ckpt", model);
  m.add_output(out / "dae.ckpt");
  write_loss_csv(out / "dae_loss.csv", log);
  m.add_output(out / "dae_loss.csv");
  m.set_summary({{"samples", dataset.size()},
                 {"epochs", log.size()},
                 {"final_total", log.empty() ? 0.0 : log.back().loss.total}});
  m.write(out);
  return m;
}

RunManifest cmd_score(const json& cfg) {
  RunManifest m("score", cfg);
  const fs::path ckpt = input_path(cfg, "dae");
  const fs::path out = out_dir(cfg);
  m.add_input(ckpt);
  const auto model = load_dae(ckpt);
  const bool dataset_mode = !get<std::string>(cfg, "paths.data").empty();
  if (dataset_mode) {
    const fs::path data = input_path(cfg, "data");
    m.add_input(data / "manifest.jsonl");
    const auto dataset = read_dataset(data);
    std::vector<double> scores;
    std::vector<bool> labels;
    std::ostringstream csv;
    csv << "id,plausible,score\n";
    {
      StageTimer t(m, "score");
      for (const auto& s : dataset) {
        const auto task = resolve_task_region(s.partial, s.task);
        const double v = plausibility(*model, s.partial, task);
        scores.push_back(v);
        labels.push_back(s.plausible);
        csv << s.id << ',' << (s.plausible ? 1 : 0) << ',' << fmt(v) << '\n';
      }
    }
    write_text(out / "scores.csv", csv.str(), m);
    json summary = {{"count", scores.size()}};
    const bool both = std::count(labels.begin(), labels.end(), true) > 0 &&
                      std::count(labels.begin(), labels.end(), false) > 0;
    summary["auc"] = both ? json(roc_auc(scores, labels)) : json(nullptr);
    write_text(out / "score_summary.json", summary.dump(2) + "\n", m);
    m.set_summary(summary);
  } else {
    const fs::path input = input_path(cfg, "input");
    m.add_input(input);
    const PointCloud cloud = io::read_cloud(input);
    const TaskSpec task = task_of(cfg);
    const double v = plausibility(*model, cloud, resolve_task_region(cloud, task));
    const json j = {{"input", input.filename().string()}, {"task", task.task_text}, {"score", v}};
    write_text(out / "score.json", j.dump(2) + "\n", m);
    m.set_summary(j);
  }
  m.write(out);
  return m;
}

RunManifest cmd_complete(const json& cfg) {
  RunManifest m("complete", cfg);
  const fs::path ckpt = input_path(cfg, "dae");
  const fs::path input = input_path(cfg, "input");
  const fs::path out = out_dir(cfg);
  m.add_input(ckpt);
  m.add_input(input);
  const auto model = load_dae(ckpt);
  const TaskSpec task = task_of(cfg);
  const ShapeKind kind = category_kind(task.category);
  const auto n_can = get<std::size_t>(cfg, "complete.n_can");

  StubBackendConfig sc;
  sc.deform_amplitude = get<double>(cfg, "complete.stub.deform_amplitude");
  sc.max_bumps = get<int>(cfg, "complete.stub.max_bumps");
  sc.bump_height = get<double>(cfg, "complete.stub.bump_height");
  sc.bump_width = get<double>(cfg, "complete.stub.bump_width");
  sc.max_rotation = get<double>(cfg, "complete.stub.max_rotation");
  sc.max_translation = get<double>(cfg, "complete.stub.max_translation");
  sc.max_scale_error = get<double>(cfg, "complete.stub.max_scale_error");
  sc.coverage_radius = get<double>(cfg, "complete.stub.coverage_radius");
  sc.n_points = n_can;
  const auto catalog_seed = get<std::uint64_t>(cfg, "complete.catalog_seed");
  // The stub stands in for image-conditioned generation: with paths.shape it
  // generates from the observed object's own shape, otherwise from the
  // category's default shape.
  GeneratedShape source;
  if (get<std::string>(cfg, "paths.shape").empty()) {
    source = generate_shape(kind, default_params(kind), n_can, catalog_seed);
  } else {
    const fs::path sp = input_path(cfg, "shape");
    m.add_input(sp);
    const ShapeSpec spec = read_shape_spec(sp);
    if (spec.kind != kind) {
      fail(ErrorCode::Config, "config paths.shape: shape kind does not match task.category " + task.category);
    }
    source = generate_shape(spec.kind, spec.params, n_can, spec.seed);
  }
  const StubBackend backend({{task.category, std::move(source)}}, sc);

  CandidateRequest req;
  req.partial = io::read_cloud(input);
  req.task = task;
  req.perturb_scales = get<std::vector<double>>(cfg, "complete.perturb_scales");
  req.n_candidates = req.perturb_scales.size();
  CandidateConfig cc;
  cc.n_can = n_can;
  cc.seed = derive_seed(root_seed(cfg), "candgen");
  m.set_seed("root", root_seed(cfg));
  m.set_seed("candgen", cc.seed);
  m.set_seed("catalog", catalog_seed);

  std::vector<Candidate> candidates;
  {
    StageTimer t(m, "candidates");
    candidates = in_section("complete", [&] { return make_candidates(req, backend, cc); });
  }
  Selection sel;
  {
    StageTimer t(m, "select_restore");
    sel = select_and_restore(*model, candidates);
  }
  write_ply(out / "restored.ply", sel.restored, m);
  json cands = json::array();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    json rec = {{"index", k},
                {"source_scale", c.source_scale},
                {"failed", c.failed},
                {"score", finite_or_null(sel.scores[k])}};
    if (c.failed) rec["error"] = c.error;
    if (!c.failed) {
      const fs::path p = out / ("candidate_" + std::to_string(k) + ".ply");
      write_ply(p, c.cloud, m);
      rec["cloud"] = p.filename().string();
    }
    cands.push_back(rec);
  }
  json summary = {{"best_index", sel.best_index}, {"candidates", cands}, {"restored_points", sel.restored.size()}};
  write_text(out / "candidates.json", summary.dump(2) + "\n", m);

  const auto gt_path = get<std::string>(cfg, "paths.gt");
  if (!gt_path.empty()) {
    const fs::path gtp = input_path(cfg, "gt");
    m.add_input(gtp);
    const PointCloud gt = io::read_cloud(gtp);
    const auto report = [&](const PointCloud& pred) {
      const auto r = completion_report(pred, gt);
      json j = {{"CD-l2 x1e-4", r.cd_l2_x1e4()}, {"F-Score@1", r.fscore}, {"DCD", r.dcd}};
      const auto tg = resolve_task_region(gt, task);
      j["task_region_cd_l2_x1e4"] = tg.empty() ? json(nullptr) : json(task_region_chamfer(pred, gt, tg) * 1e4);
      return j;
    };
    const json comp = {{"partial", report(req.partial)}, {"restored", report(sel.restored)}};
    write_text(out / "completion.json", comp.dump(2) + "\n", m);
    summary["completion"] = comp;
  }
  summary.erase("candidates");
  m.set_summary(summary);
  m.write(out);
  return m;
}

RunManifest cmd_train_flow(const json& cfg) {
  RunManifest m("train-flow", cfg);
  const fs::path out = out_dir(cfg);
  const FlowConfig fc = flow_config(cfg);
  const GripperModel gripper;
  if (fc.dim != gripper.dim()) {
    fail(ErrorCode::Config, "config flow.model.dim: must equal the gripper dimension " +
                                std::to_string(gripper.dim()));
  }
  const TaskSpec task = task_of(cfg);
  const ShapeKind kind = category_kind(task.category);
  const RegionId region = region_from_name(task.target_region);
  const auto n_obj = get<std::size_t>(cfg, "flow.objects");
  const auto per = get<std::size_t>(cfg, "flow.grasps_per_object");
  if (n_obj == 0 || per == 0) fail(ErrorCode::Config, "config flow.objects: need at least one object and grasp");

  OracleGraspConfig oc;
  oc.iterations = get<int>(cfg, "flow.oracle.iterations");
  oc.lr = get<double>(cfg, "flow.oracle.lr");
  oc.max_attempts = get<int>(cfg, "flow.oracle.max_attempts");
  oc.max_penetration = get<double>(cfg, "flow.oracle.max_penetration");
  oc.contact_tolerance = get<double>(cfg, "flow.oracle.contact_tolerance");
  oc.min_contacts = get<int>(cfg, "flow.oracle.min_contacts");
  ConstraintWeights w;
  w.penetration = get<double>(cfg, "flow.weights.penetration");
  w.contact = get<double>(cfg, "flow.weights.contact");
  w.joint_limits = get<double>(cfg, "flow.weights.joint_limits");
  const double alpha0 = get<double>(cfg, "flow.alpha0");

  const std::uint64_t seed = root_seed(cfg);
  m.set_seed("root", seed);
  std::vector<FlowObject> objects;
  std::vector<FlowExample> data;
  std::vector<GraspRecord> records;
  {
    StageTimer t(m, "oracle");
    for (std::size_t i = 0; i < n_obj; ++i) {
      const std::uint64_t si = derive_seed(seed, "flow-object", i);
      Rng rng(si);
      const auto params = jitter_params(kind, rng, get<double>(cfg, "flow.param_spread"));
      const auto gen = generate_shape(kind, params, get<std::size_t>(cfg, "flow.object_points"),
                                      derive_seed(si, "shape"));
      const auto task_idx = gen.cloud.indices_with_label(region);
      if (task_idx.empty()) fail(ErrorCode::InvalidState, "train-flow: object has no task region");
      const auto grasps = in_section("flow.oracle", [&] {
        return synthesize_grasps(gripper, gen.shape, gen.cloud.subset(task_idx), per,
                                 derive_seed(si, "oracle"), oc);
      });
      objects.push_back(in_section("flow", [&] {
        return make_flow_object(gen.cloud, task_idx, 0, gripper, fc, w, alpha0);
      }));
      for (const auto& x : grasps) {
        data.push_back({x, i});
        records.push_back({x, "tri3x2", "flow-object-" + std::to_string(i), task.task_text, si});
      }
    }
  }
  if (data.empty()) fail(ErrorCode::InvalidState, "train-flow: the oracle produced no grasps");
  write_grasps(out / "oracle_grasps.json", records);
  m.add_output(out / "oracle_grasps.json");

  FlowTrainConfig tc;
  tc.epochs = get<int>(cfg, "flow.epochs");
  tc.batch = get<int>(cfg, "flow.batch");
  tc.lr = get<double>(cfg, "flow.lr");
  tc.weight_decay = get<double>(cfg, "flow.weight_decay");
  tc.seed = derive_seed(seed, "flow-train");
  const std::uint64_t init = derive_seed(seed, "flow-init");
  m.set_seed("init", init);
  m.set_seed("train", tc.seed);
  FlowModel model(fc, init);
  std::vector<FlowEpochLog> log;
  {
    StageTimer t(m, "train");
    log = in_section("flow", [&] { return train_flowgrasp(model, data, objects, tc); });
  }
  save_flow(out / "flow.ckpt", model);
  m.add_output(out / "flow.ckpt");
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (const auto& e : log) csv << e.epoch << ',' << fmt(e.loss) << '\n';
  write_text(out / "flow_loss.csv", csv.str(), m);
  m.set_summary({{"objects", n_obj},
                 {"grasps", data.size()},
                 {"alpha0", alpha0},
                 {"initial_loss", log.empty() ? 0.0 : log.front().loss},
                 {"final_loss", log.empty() ? 0.0 : log.back().loss}});
  m.write(out);
  return m;
}

RunManifest cmd_sample(const json& cfg) {
  RunManifest m("sample", cfg);
  const fs::path ckpt = input_path(cfg, "flow");
  const fs::path input = input_path(cfg, "input");
  const fs::path out = out_dir(cfg);
  m.add_input(ckpt);
  m.add_input(input);
  const auto model = load_flow(ckpt);
  const PointCloud cloud = io::read_cloud(input);
  const TaskSpec task = task_of(cfg);
  const auto task_idx = resolve_task_region(cloud, task);
  if (task_idx.empty()) {
    fail(ErrorCode::InvalidState, "sample: " + input.string() + " has no points labelled " + task.target_region);
  }
  const auto count = get<long>(cfg, "sample.count");
  const auto steps = get<int>(cfg, "sample.steps");
  if (count < 1) fail(ErrorCode::Config, "config sample.count: must be >= 1");
  if (steps < 1) fail(ErrorCode::Config, "config sample.steps: must be >= 1");
  const std::uint64_t seed = derive_seed(root_seed(cfg), "sample");
  m.set_seed("root", root_seed(cfg));
  m.set_seed("sample", seed);
  FlowModel::CondCache cache;
  const auto cond = model->encode_condition(
      make_condition_input(cloud, task_idx, model->config().cond_points, 0), cache);
  nn::Matrix xs;
  {
    StageTimer t(m, "sample");
    xs = sample_flow(*model, model->config().conditional ? cond : nn::RowVector(), count, steps, seed);
  }
  std::vector<GraspRecord> records;
  for (long i = 0; i < xs.rows(); ++i) {
    records.push_back({xs.row(i).transpose(), "tri3x2", input.filename().string(), task.task_text, seed});
  }
  write_grasps(out / "grasps.json", records);
  m.add_output(out / "grasps.json");
  m.set_summary({{"count", count}, {"steps", steps}, {"numeric_failures", 0}});
  m.write(out);
  return m;
}

RunManifest cmd_evaluate(const json& cfg) {
  RunManifest m("evaluate", cfg);
  const fs::path grasps_path = input_path(cfg, "grasps");
  const fs::path shape_path = input_path(cfg, "shape");
  const fs::path out = out_dir(cfg);
  m.add_input(grasps_path);
  m.add_input(shape_path);
  const auto grasps = read_grasps(grasps_path);
  const ShapeSpec spec = read_shape_spec(shape_path);
  const GeneratedShape shape = build(spec);
  Solid solid = solid_from_shape(shape.shape, shape.cloud);
  const TaskSpec task = task_of(cfg);
  const PointCloud dense = dense_surface(spec, get<std::size_t>(cfg, "evaluate.task_points"));
  const PointCloud task_cloud = dense.subset(dense.indices_with_label(region_from_name(task.target_region)));
  if (task_cloud.empty()) fail(ErrorCode::InvalidState, "evaluate: object has no " + task.target_region + " region");
  const KdTree tree(task_cloud.points);

  ContactConfig cc;
  cc.threshold = get<double>(cfg, "evaluate.contact_threshold");
  cc.depth_tolerance_cm = get<double>(cfg, "evaluate.depth_tolerance_cm");
  PenetrationConfig pc;
  pc.voxel_fraction = get<double>(cfg, "evaluate.voxel_fraction");
  pc.surface_samples = get<int>(cfg, "evaluate.surface_samples");
  const DisplacementConfig dc = displacement_config(cfg);
  const GripperModel gripper;

  std::vector<GraspEvalReport> rows;
  {
    StageTimer t(m, "evaluate");
    for (std::size_t i = 0; i < grasps.size(); ++i) {
      const auto& x = grasps[i].x;
      if (x.size() != gripper.dim()) fail(ErrorCode::Io, "evaluate: grasp " + std::to_string(i) + " has the wrong dimension");
      if (!x.allFinite()) fail(ErrorCode::NumericFailure, "evaluate: grasp " + std::to_string(i) + " is not finite");
      rows.push_back(in_section("evaluate", [&] {
        return evaluate_grasp(gripper, x, solid, task_cloud, tree, cc, dc, pc);
      }));
    }
  }
  write_grasp_reports_csv(out / "grasp_eval.csv", rows);
  m.add_output(out / "grasp_eval.csv");
  const json summary = json::parse(grasp_summary_json(rows, cc.threshold));
  write_text(out / "grasp_summary.json", summary.dump(2) + "\n", m);
  m.set_summary(summary);
  m.write(out);
  return m;
}

RunManifest cmd_export(const json& cfg) {
  RunManifest m("export", cfg);
  const fs::path out = out_dir(cfg);
  const auto format = get<std::string>(cfg, "export.format");
  if (format != "obj" && format != "ply") fail(ErrorCode::Config, "config export.format: expected obj or ply");
  const auto write_cloud = [&](const fs::path& stem, const PointCloud& c) {
    const fs::path p = stem.string() + "." + format;
    if (format == "obj") {
      io::write_obj(p, c);
    } else {
      io::write_ply(p, c, io::PlyFormat::Ascii);
    }
    m.add_output(p);
  };
  const bool has_input = !get<std::string>(cfg, "paths.input").empty();
  const bool has_grasps = !get<std::string>(cfg, "paths.grasps").empty();
  if (!has_input && !has_grasps) fail(ErrorCode::Config, "config paths.input: export needs paths.input or paths.grasps");
  if (has_input) {
    const fs::path input = input_path(cfg, "input");
    m.add_input(input);
    write_cloud(out / input.stem(), io::read_cloud(input));
  }
  if (has_grasps) {
    const fs::path gp = input_path(cfg, "grasps");
    m.add_input(gp);
    const auto grasps = read_grasps(gp);
    const GripperModel gripper;
    const int n = get<int>(cfg, "export.sphere_samples");
    if (n < 1) fail(ErrorCode::Config, "config export.sphere_samples: must be >= 1");
    // Hand spheres as surface points; the label is the grasp index.
    PointCloud hands;
    const double golden = 3.141592653589793 * (3.0 - std::sqrt(5.0));
    for (std::size_t gi = 0; gi < grasps.size(); ++gi) {
      const HandPoints hp = hand_spheres(gripper, grasps[gi].x);
      for (std::size_t s = 0; s < hp.points.size(); ++s) {
        for (int k = 0; k < n; ++k) {
          const double z = 1.0 - 2.0 * (k + 0.5) / n, r = std::sqrt(std::max(0.0, 1.0 - z * z));
          hands.points.push_back(hp.points[s] + hp.radii[s] * Vec3(r * std::cos(golden * k), r * std::sin(golden * k), z));
          hands.labels.push_back(static_cast<RegionId>(gi));
        }
      }
    }
    write_cloud(out / (gp.stem().string() + "_hands"), hands);
  }
  m.write(out);
  return m;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "train-dae", "score",    "complete",
                                              "train-flow", "sample",  "evaluate", "export"};
  return names;
}

RunManifest run_command(const std::string& name, const json& cfg) {
  if (name == "gen-data") return cmd_gen_data(cfg);
  if (name == "train-dae") return cmd_train_dae(cfg);
  if (name == "score") return cmd_score(cfg);
  if (name == "complete") return cmd_complete(cfg);
  if (name == "train-flow") return cmd_train_flow(cfg);
  if (name == "sample") return cmd_sample(cfg);
  if (name == "evaluate") return cmd_evaluate(cfg);
  if (name == "export") return cmd_export(cfg);
  fail(ErrorCode::Config, "unknown command " + name);
}

}  // namespace tosc::cli
