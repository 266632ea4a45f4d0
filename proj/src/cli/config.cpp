#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "tosc/cli/pipeline.hpp"
#include "tosc/dae/dae.hpp"
#include "tosc/flowgrasp/flow.hpp"

namespace tosc::cli {

json default_config() {
  json kinds = json::array();
  for (auto k : kAllShapeKinds) kinds.push_back(std::string(kind_name(k)));
  FlowConfig flow;
  flow.dim = GripperModel{}.dim();
  return {
      {"seed", 7},
      {"paths",
       {{"out", ""},
        {"data", ""},
        {"dae", ""},
        {"flow", ""},
        {"input", ""},
        {"gt", ""},
        {"shape", ""},
        {"grasps", ""}}},
      {"task", {{"category", "mug"}, {"text", "pick up by handle"}}},
      {"data",
       {{"plausible", 500},
        {"implausible", 500},
        {"n_points", 2048},
        {"noise_sigma", 0.002},
        {"max_views", 3},
        {"max_occluders", 2},
        {"view_distance", 2.0},
        {"param_spread", 0.15},
        {"retention_radius", 0.05},
        {"kinds", kinds},
        {"fixtures", 0},
        {"fixture_seed", 9001}}},
      {"dae",
       {{"model", json::parse(DaeConfig{}.to_json())},
        {"epochs", 300},
        {"lr", 5e-4},
        {"weight_decay", 0.05},
        {"batch", 16},
        {"mask_ratio", 0.6}}},
      {"complete",
       {{"perturb_scales", {0.25, 0.5, 0.75, 1.0}},
        {"n_can", 2048},
        {"catalog_seed", 1000},
        {"stub",
         {{"deform_amplitude", 0.04},
          {"max_bumps", 4},
          {"bump_height", 0.06},
          {"bump_width", 0.08},
          {"max_rotation", 0.25},
          {"max_translation", 0.05},
          {"max_scale_error", 0.1},
          {"coverage_radius", 0.04}}}}},
      {"flow",
       {{"model", json::parse(flow.to_json())},
        {"epochs", 350},
        {"batch", 64},
        {"lr", 1e-3},
        {"weight_decay", 0.0},
        {"alpha0", 0.1},
        {"weights", {{"penetration", 1.0}, {"contact", 0.5}, {"joint_limits", 0.1}}},
        {"objects", 24},
        {"grasps_per_object", 32},
        {"object_points", 2048},
        {"param_spread", 0.15},
        {"oracle",
         {{"iterations", 250},
          {"lr", 0.01},
          {"max_attempts", 8},
          {"max_penetration", 0.004},
          {"contact_tolerance", 0.015},
          {"min_contacts", 2}}}}},
      {"sample", {{"count", 200}, {"steps", 50}}},
      {"evaluate",
       {{"contact_threshold", 0.01},
        {"depth_tolerance_cm", 0.5},
        {"voxel_fraction", 1.0 / 64.0},
        {"surface_samples", 256},
        {"mu", 0.8},
        {"d_max_cm", 10.0},
        {"solver_steps", 400},
        {"stiffness", 20.0},
        {"preload", 1.0},
        {"task_points", 16384}}},
      {"export", {{"format", "obj"}, {"sphere_samples", 64}}},
  };
}

namespace {

const char* type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

bool compatible(const json& base, const json& v) {
  if (base.is_boolean()) return v.is_boolean();
  if (base.is_number_integer()) return v.is_number_integer();
  if (base.is_number()) return v.is_number();
  if (base.is_string()) return v.is_string();
  if (base.is_array()) {
    if (!v.is_array()) return false;
    if (base.empty()) return true;
    for (const auto& e : v) {
      if (!compatible(base.front(), e)) return false;
    }
    return true;
  }
  return false;
}

}  // namespace

void merge_config(json& base, const json& layer, const std::string& prefix) {
  if (!layer.is_object()) fail(ErrorCode::Config, "config " + (prefix.empty() ? "root" : prefix) + ": expected an object");
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) fail(ErrorCode::Config, "config " + key + ": unknown key");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, it.value(), key);
    } else if (compatible(slot, it.value())) {
      slot = it.value();
    } else {
      fail(ErrorCode::Config, "config " + key + ": expected " + type_name(slot) + ", got " +
                                  type_name(it.value()));
    }
  }
}

json assignment_layer(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::Config, "config assignment '" + assignment + "': expected key=value");
  }
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json layer = value;
  std::size_t end = path.size();
  while (true) {
    const auto dot = path.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string key = path.substr(start, end - start);
    if (key.empty()) fail(ErrorCode::Config, "config assignment '" + assignment + "': empty key");
    layer = json{{key, layer}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return layer;
}

json layered_config(const std::string& config_file, const std::vector<json>& flag_layers) {
  json cfg = default_config();
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) fail(ErrorCode::Io, "cannot open config file " + config_file);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) fail(ErrorCode::Config, "config file " + config_file + ": not valid JSON");
    merge_config(cfg, file);
  }
  for (const auto& layer : flag_layers) merge_config(cfg, layer);
  return cfg;
}

const json& at_path(const json& cfg, const std::string& path) {
  const json* node = &cfg;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) fail(ErrorCode::Config, "config " + path + ": missing");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return *node;
}

// ---- manifest ----

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot write " + tmp.string());
    f << bytes;
    if (!f) fail(ErrorCode::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

RunManifest::RunManifest(std::string command, json config)
    : command_(std::move(command)), config_(std::move(config)) {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  started_ = buf;
}

void RunManifest::add_input(const fs::path& path) { inputs_.push_back(path); }
void RunManifest::add_output(const fs::path& path) { outputs_.push_back(path); }
void RunManifest::set_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
void RunManifest::set_timing(const std::string& stage, double seconds) { timings_[stage] += seconds; }

json RunManifest::to_json() const {
  json inputs = json::array(), outputs = json::array();
  for (const auto& p : inputs_) {
    json rec = {{"path", p.string()}};
    if (fs::is_regular_file(p)) rec["fnv1a64"] = file_digest(p);
    inputs.push_back(rec);
  }
  for (const auto& p : outputs_) {
    outputs.push_back({{"path", p.string()}, {"bytes", fs::file_size(p)}, {"fnv1a64", file_digest(p)}});
  }
  std::ostringstream id;
  std::uint64_t h = 1469598103934665603ull;
  for (char c : command_ + config_.dump()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return {{"run_id", command_ + "-" + hex},
          {"command", command_},
          {"config", config_},
          {"inputs", inputs},
          {"outputs", outputs},
          {"seeds", seeds_},
          {"timings_s", timings_},
          {"summary", summary_},
          {"versions",
           {{"tosc", kVersion}, {"checkpoint", "TOSCNN01"}, {"grasps", 1}, {"compiler", __VERSION__}}},
          {"started_at", started_}};
}

void RunManifest::write(const fs::path& dir) const {
  write_file_atomic(dir / "run_manifest.json", to_json().dump(2) + "\n");
}

StageTimer::StageTimer(RunManifest& m, std::string stage)
    : manifest_(m), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

StageTimer::~StageTimer() {
  manifest_.set_timing(stage_,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
}

// ---- errors ----

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
      return 2;
    case ErrorCode::NumericFailure:
      return 4;
    case ErrorCode::Io:
    case ErrorCode::CategoryNotFound:
    case ErrorCode::UnknownTask:
    case ErrorCode::NoCandidate:
    case ErrorCode::UnsupportedObject:
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::InvalidState:
      return 3;
  }
  return 1;
}

json error_record(const std::string& command, const std::string& code, const std::string& message,
                  int exit_code) {
  return {{"error", {{"command", command}, {"code", code}, {"message", message}, {"exit_code", exit_code}}}};
}

}  // namespace tosc::cli
