#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/geom/point_cloud.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

// ---- configuration ----

/// Every tunable with its default value. Paths are empty until set.
json default_config();

/// Overlays `layer` onto `base`. Keys must already exist in `base` with a
/// compatible type; violations throw Config naming the key path.
void merge_config(json& base, const json& layer, const std::string& prefix = "");

/// "a.b.c=value"; the value is parsed as JSON, falling back to a string.
json assignment_layer(const std::string& assignment);

/// defaults < config file < flag layers, in order.
json layered_config(const std::string& config_file, const std::vector<json>& flag_layers);

/// Value at a dotted key path; Config error naming the path when missing.
const json& at_path(const json& cfg, const std::string& path);

// ---- run manifest ----

/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_digest(const fs::path& path);

class RunManifest {
 public:
  RunManifest(std::string command, json config);

  void add_input(const fs::path& path);
  void add_output(const fs::path& path);
  void set_seed(const std::string& name, std::uint64_t seed);
  void set_timing(const std::string& stage, double seconds);
  void set_summary(const json& summary) { summary_ = summary; }
  const std::vector<fs::path>& outputs() const { return outputs_; }

  json to_json() const;
  /// Writes run_manifest.json into `dir` via a temporary file and rename.
  void write(const fs::path& dir) const;

 private:
  std::string command_;
  json config_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, double> timings_;
  json summary_ = json::object();
  std::string started_;
};

/// Scoped wall-clock timer that records into a manifest.
class StageTimer {
 public:
  StageTimer(RunManifest& m, std::string stage);
  ~StageTimer();

 private:
  RunManifest& manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

/// Writes bytes to `path` through a temporary sibling and a rename.
void write_file_atomic(const fs::path& path, const std::string& bytes);

// ---- shapes ----

/// Everything needed to rebuild a procedural object in a fixture's frame.
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Mug;
  ShapeParams params;
  std::size_t n_points = 2048;
  std::uint64_t seed = 0;
};

json shape_spec_json(const ShapeSpec& s);
ShapeSpec shape_spec_from_json(const json& j);
ShapeSpec read_shape_spec(const fs::path& path);
GeneratedShape build(const ShapeSpec& s);

/// Dense surface samples of `s` expressed in the frame of build(s).
PointCloud dense_surface(const ShapeSpec& s, std::size_t n_points);

/// Held-out completion fixture: one jittered object seen from one random
/// viewpoint (a single hemisphere of the surface, no occluders).
struct Fixture {
  ShapeSpec spec;
  GeneratedShape shape;
  PointCloud partial;
};

Fixture make_fixture(const json& cfg, std::size_t index);

/// Area under the ROC curve of `scores` for the positive labels, ties
/// counted half.
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

// ---- commands ----

/// Each command reads its inputs from cfg["paths"], writes its outputs and
/// the run manifest into cfg["paths"]["out"], and returns the manifest.
RunManifest cmd_gen_data(const json& cfg);
RunManifest cmd_train_dae(const json& cfg);
RunManifest cmd_score(const json& cfg);
RunManifest cmd_complete(const json& cfg);
RunManifest cmd_train_flow(const json& cfg);
RunManifest cmd_sample(const json& cfg);
RunManifest cmd_evaluate(const json& cfg);
RunManifest cmd_export(const json& cfg);

RunManifest run_command(const std::string& name, const json& cfg);
const std::vector<std::string>& command_names();

// ---- errors ----

/// 2 config, 3 data, 4 numeric failure, 1 anything else.
int exit_code_for(ErrorCode code);
json error_record(const std::string& command, const std::string& code, const std::string& message,
                  int exit_code);

}  // namespace tosc::cli
