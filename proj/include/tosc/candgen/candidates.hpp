#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tosc/geom/point_cloud.hpp"
#include "tosc/reg/registration.hpp"
#include "tosc/synth/shapes.hpp"
#include "tosc/synth/tasks.hpp"

namespace tosc {

inline constexpr std::size_t kDefaultCandidatePoints = 2048;
inline constexpr std::size_t kDefaultCandidateCount = 4;

struct CandidateRequest {
  PointCloud partial;
  TaskSpec task;
  std::size_t n_candidates = kDefaultCandidateCount;
  std::vector<double> perturb_scales{0.25, 0.5, 0.75, 1.0};

  void validate() const;
};

struct Candidate {
  PointCloud cloud;  // exactly n_can points unless failed
  double source_scale = 0.0;
  RegistrationResult alignment;
  std::vector<std::size_t> task_mask;
  std::vector<bool> from_input;  // provenance of each cloud point
  bool failed = false;
  std::string error;
};

/// Seam for the generative model that hallucinates full shapes from a partial
/// observation. Returned clouds must be labelled with region ids.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string name() const = 0;
  /// Returns exactly request.n_candidates clouds, one per perturb scale.
  virtual std::vector<PointCloud> generate(const CandidateRequest& request,
                                           std::uint64_t seed) const = 0;
  /// Whether generate() may be called from several threads at once.
  virtual bool concurrent_safe() const { return true; }
};

struct StubBackendConfig {
  double deform_amplitude = 0.04;  // global low-frequency deformation at scale 0
  int max_bumps = 4;
  double bump_height = 0.06;
  double bump_width = 0.08;
  double max_rotation = 0.25;     // radians at scale 0
  double max_translation = 0.05;  // normalized units at scale 0
  double max_scale_error = 0.1;   // relative scale error at scale 0
  double coverage_radius = 0.04;  // partial coverage test for hole artifacts
  std::size_t n_points = 2048;
};

/// Deterministic surrogate: takes the catalog shape for the request category
/// and corrupts it. Low perturb scales give stronger global deformation, bumps
/// and pose error; high scales stay faithful but copy the partial's holes
/// (ground-truth points the partial does not cover are dropped with
/// probability equal to the scale).
class StubBackend final : public GeneratorBackend {
 public:
  explicit StubBackend(std::map<std::string, GeneratedShape> catalog, StubBackendConfig config = {});
  std::string name() const override { return "stub"; }
  std::vector<PointCloud> generate(const CandidateRequest& request,
                                   std::uint64_t seed) const override;

  const StubBackendConfig& config() const { return config_; }

 private:
  std::map<std::string, GeneratedShape> catalog_;
  StubBackendConfig config_;
};

/// Indices whose label is the lexicon region of the task. Unlabelled clouds
/// give an empty set; unknown tasks throw UnknownTask.
std::vector<std::size_t> resolve_task_region(const PointCloud& cloud, const TaskSpec& task);

struct CandidateConfig {
  IcpConfig icp;
  std::size_t n_can = kDefaultCandidatePoints;
  std::uint64_t seed = 0;
};

/// Generate, register (task-weighted) and fuse one candidate per perturb
/// scale. Failures become marked slots; order follows perturb_scales.
std::vector<Candidate> make_candidates(const CandidateRequest& request,
                                       const GeneratorBackend& backend,
                                       const CandidateConfig& config = {});

}  // namespace tosc
