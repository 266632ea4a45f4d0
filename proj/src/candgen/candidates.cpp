#include "tosc/candgen/candidates.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/reg/fuse.hpp"

namespace tosc {

void CandidateRequest::validate() const {
  require(!partial.empty(), "candidate request: empty partial cloud");
  require(n_candidates >= 1, "candidate request: n_candidates must be >= 1");
  require(perturb_scales.size() == n_candidates,
          "candidate request: n_candidates must equal the number of perturb scales");
  for (double s : perturb_scales) {
    require(std::isfinite(s) && s >= 0.0 && s <= 1.0, "candidate request: scales must lie in [0, 1]");
  }
  partial.validate();
}

namespace {

Vec3 random_direction(Rng& rng) {
  Vec3 d;
  do {
    d = Vec3(normal(rng), normal(rng), normal(rng));
  } while (d.squaredNorm() < 1e-24);
  return d.normalized();
}

}  // namespace

StubBackend::StubBackend(std::map<std::string, GeneratedShape> catalog, StubBackendConfig config)
    : catalog_(std::move(catalog)), config_(config) {
  require(config_.n_points >= 1, "stub backend: n_points must be >= 1");
}

std::vector<PointCloud> StubBackend::generate(const CandidateRequest& request,
                                              std::uint64_t seed) const {
  request.validate();
  const auto it = catalog_.find(request.task.category);
  if (it == catalog_.end()) {
    fail(ErrorCode::CategoryNotFound, "stub backend: no catalog shape for " + request.task.category);
  }
  const PointCloud& base = it->second.cloud;
  const KdTree partial_tree(request.partial);
  const double cov2 = config_.coverage_radius * config_.coverage_radius;
  std::vector<bool> covered(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    covered[i] = partial_tree.nearest(base.points[i]).sq_dist <= cov2;
  }
  const Vec3 c0 = centroid(base.points);

  std::vector<PointCloud> out;
  for (std::size_t k = 0; k < request.n_candidates; ++k) {
    const double s = request.perturb_scales[k];
    const double w = 1.0 - s;
    Rng rng(derive_seed(seed, "stub-candidate", k));

    // Holes copied from the observation.
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const bool drop = !covered[i] && uniform(rng) < s;
      if (!drop) keep.push_back(i);
    }
    if (keep.empty()) keep.push_back(0);
    PointCloud g = base.subset(keep);

    // Smooth global deformation.
    Vec3 freq[3], phase;
    for (auto& f : freq) f = 6.283185307179586 * Vec3(uniform(rng, 0.5, 1.5), uniform(rng, 0.5, 1.5), uniform(rng, 0.5, 1.5));
    for (int a = 0; a < 3; ++a) phase[a] = uniform(rng, 0.0, 6.283185307179586);
    const double amp = config_.deform_amplitude * w;
    for (auto& p : g.points) {
      Vec3 d;
      for (int a = 0; a < 3; ++a) d[a] = std::sin(freq[a].dot(p) + phase[a]);
      p += amp * d;
    }

    // Spurious outward bumps.
    const int bumps = static_cast<int>(std::lround(w * config_.max_bumps));
    const double inv2w2 = 1.0 / (2.0 * config_.bump_width * config_.bump_width);
    for (int b = 0; b < bumps; ++b) {
      const Vec3 c = g.points[uniform_index(rng, g.size())];
      const double h = config_.bump_height * w * uniform(rng, 0.5, 1.0);
      for (auto& p : g.points) {
        const Vec3 radial = p - c0;
        const double n = radial.norm();
        if (n < 1e-12) continue;
        p += h * std::exp(-(p - c).squaredNorm() * inv2w2) * radial / n;
      }
    }

    // Pose and scale error about the centroid.
    const Mat3 rot =
        Eigen::AngleAxisd(w * config_.max_rotation * uniform(rng), random_direction(rng)).toRotationMatrix();
    const Vec3 shift = w * config_.max_translation * uniform(rng) * random_direction(rng);
    const double scale = 1.0 + w * config_.max_scale_error * uniform(rng, -1.0, 1.0);
    for (auto& p : g.points) p = c0 + scale * (rot * (p - c0)) + shift;

    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::size_t> resolve_task_region(const PointCloud& cloud, const TaskSpec& task) {
  const RegionId r = region_from_name(lexicon_region(task.category, task.task_text));
  if (!cloud.labeled()) return {};
  return cloud.indices_with_label(r);
}

std::vector<Candidate> make_candidates(const CandidateRequest& request,
                                       const GeneratorBackend& backend,
                                       const CandidateConfig& config) {
  request.validate();
  require(config.n_can >= 1, "make_candidates: n_can must be >= 1");
  const auto task_in_idx = resolve_task_region(request.partial, request.task);
  const PointCloud task_in = request.partial.subset(task_in_idx);

  std::vector<Candidate> out(request.n_candidates);
  for (std::size_t k = 0; k < out.size(); ++k) out[k].source_scale = request.perturb_scales[k];

  std::vector<PointCloud> generated;
  try {
    generated = backend.generate(request, derive_seed(config.seed, "backend"));
    if (generated.size() != request.n_candidates) {
      fail(ErrorCode::InvalidState, "backend " + backend.name() + " returned the wrong number of clouds");
    }
  } catch (const Error& e) {
    for (auto& c : out) {
      c.failed = true;
      c.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    return out;
  }

  for (std::size_t k = 0; k < out.size(); ++k) {
    Candidate& c = out[k];
    try {
      const PointCloud& gen = generated[k];
      const PointCloud task_gen = gen.subset(resolve_task_region(gen, request.task));
      c.alignment = task_weighted_icp(request.partial, gen, task_in, task_gen, config.icp);
      auto fused = fuse_with_provenance(request.partial, c.alignment.transform.apply(gen), config.n_can);
      c.cloud = std::move(fused.cloud);
      c.from_input = std::move(fused.from_input);
      c.task_mask = resolve_task_region(c.cloud, request.task);
    } catch (const Error& e) {
      c = Candidate{};
      c.source_scale = request.perturb_scales[k];
      c.failed = true;
      c.error = std::string(to_string(e.code())) + ": " + e.what();
    }
  }
  return out;
}

}  // namespace tosc
