#include "tosc/geom/convex_hull.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "tosc/common/error.hpp"

namespace tosc {
namespace {

struct Face {
  std::array<std::size_t, 3> v{};
  std::array<int, 3> nbr{-1, -1, -1};
  Vec3 n = Vec3::Zero();
  double d = 0.0;
  std::vector<std::size_t> outside;
  bool alive = true;
  int stamp = -1;
};

class QuickHull {
 public:
  QuickHull(std::span<const Vec3> pts, double eps) : p_(pts), eps_(eps) {}

  // Returns false if the input is degenerate (affine dimension < 3).
  bool run(std::array<std::size_t, 4> simplex);

  std::vector<Face> faces;

 private:
  int add_face(std::size_t a, std::size_t b, std::size_t c) {
    Face f;
    f.v = {a, b, c};
    f.n = (p_[b] - p_[a]).cross(p_[c] - p_[a]);
    const double len = f.n.norm();
    if (len > 0.0) f.n /= len;
    f.d = f.n.dot(p_[a]);
    faces.push_back(std::move(f));
    return static_cast<int>(faces.size()) - 1;
  }
  double dist(const Face& f, std::size_t i) const { return f.n.dot(p_[i]) - f.d; }

  struct HorizonEdge {
    std::size_t a, b;
    int outer;  // non-visible face across the edge
  };
  void horizon(int f, int entered_edge, std::size_t eye, int stamp,
               std::vector<int>& visible, std::vector<HorizonEdge>& edges);

  std::span<const Vec3> p_;
  double eps_;
};

int edge_index(const Face& f, std::size_t a, std::size_t b) {
  for (int e = 0; e < 3; ++e) {
    if (f.v[e] == a && f.v[(e + 1) % 3] == b) return e;
  }
  return -1;
}

void QuickHull::horizon(int fi, int entered_edge, std::size_t eye, int stamp,
                        std::vector<int>& visible, std::vector<HorizonEdge>& edges) {
  faces[fi].stamp = stamp;
  visible.push_back(fi);
  const int start = entered_edge < 0 ? 0 : entered_edge + 1;
  const int count = entered_edge < 0 ? 3 : 2;
  for (int k = 0; k < count; ++k) {
    const int e = (start + k) % 3;
    const int nb = faces[fi].nbr[e];
    if (faces[nb].stamp == stamp) continue;
    const std::size_t a = faces[fi].v[e];
    const std::size_t b = faces[fi].v[(e + 1) % 3];
    if (dist(faces[nb], eye) > eps_) {
      horizon(nb, edge_index(faces[nb], b, a), eye, stamp, visible, edges);
    } else {
      edges.push_back({a, b, nb});
    }
  }
}

bool QuickHull::run(std::array<std::size_t, 4> s) {
  const Vec3 inner = 0.25 * (p_[s[0]] + p_[s[1]] + p_[s[2]] + p_[s[3]]);
  const std::array<std::array<std::size_t, 3>, 4> tri = {{
      {s[0], s[1], s[2]}, {s[0], s[3], s[1]}, {s[1], s[3], s[2]}, {s[2], s[3], s[0]}}};
  for (auto t : tri) {
    const int f = add_face(t[0], t[1], t[2]);
    if (faces[f].n.dot(inner) - faces[f].d > 0.0) {
      faces.pop_back();
      add_face(t[0], t[2], t[1]);
    }
  }
  // Link the tetrahedron.
  for (int f = 0; f < 4; ++f) {
    for (int e = 0; e < 3; ++e) {
      const std::size_t a = faces[f].v[e];
      const std::size_t b = faces[f].v[(e + 1) % 3];
      for (int g = 0; g < 4; ++g) {
        if (g != f && edge_index(faces[g], b, a) >= 0) faces[f].nbr[e] = g;
      }
    }
  }
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (i == s[0] || i == s[1] || i == s[2] || i == s[3]) continue;
    for (auto& f : faces) {
      if (dist(f, i) > eps_) {
        f.outside.push_back(i);
        break;
      }
    }
  }

  int stamp = 0;
  std::vector<int> visible;
  std::vector<HorizonEdge> edges;
  std::vector<std::size_t> orphans;
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    if (!faces[fi].alive || faces[fi].outside.empty()) continue;
    // Farthest conflict point of this face.
    std::size_t eye = faces[fi].outside.front();
    double best = -1.0;
    for (std::size_t i : faces[fi].outside) {
      const double d = dist(faces[fi], i);
      if (d > best) {
        best = d;
        eye = i;
      }
    }
    visible.clear();
    edges.clear();
    horizon(static_cast<int>(fi), -1, eye, stamp++, visible, edges);

    orphans.clear();
    for (int v : visible) {
      faces[v].alive = false;
      for (std::size_t i : faces[v].outside) {
        if (i != eye) orphans.push_back(i);
      }
      faces[v].outside.clear();
      faces[v].outside.shrink_to_fit();
    }

    std::unordered_map<std::size_t, int> starting_at;
    std::vector<int> created;
    created.reserve(edges.size());
    for (const auto& he : edges) {
      const int nf = add_face(he.a, he.b, eye);
      created.push_back(nf);
      starting_at[he.a] = nf;
      faces[nf].nbr[0] = he.outer;
      const int oe = edge_index(faces[he.outer], he.b, he.a);
      if (oe < 0) fail(ErrorCode::NumericFailure, "convex hull: broken horizon");
      faces[he.outer].nbr[oe] = nf;
    }
    for (int nf : created) {
      const std::size_t b = faces[nf].v[1];
      const auto it = starting_at.find(b);
      if (it == starting_at.end()) fail(ErrorCode::NumericFailure, "convex hull: open horizon");
      faces[nf].nbr[1] = it->second;
      faces[it->second].nbr[2] = nf;
    }
    for (std::size_t i : orphans) {
      for (int nf : created) {
        if (dist(faces[nf], i) > eps_) {
          faces[nf].outside.push_back(i);
          break;
        }
      }
    }
  }
  return true;
}

std::vector<std::size_t> hull_2d(std::span<const Vec3> pts, const Vec3& origin, const Vec3& u,
                                 const Vec3& v) {
  struct P2 {
    double x, y;
    std::size_t i;
  };
  std::vector<P2> q;
  q.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 r = pts[i] - origin;
    q.push_back({r.dot(u), r.dot(v), i});
  }
  std::sort(q.begin(), q.end(), [](const P2& a, const P2& b) {
    return a.x < b.x || (a.x == b.x && (a.y < b.y || (a.y == b.y && a.i < b.i)));
  });
  auto cross = [](const P2& o, const P2& a, const P2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<P2> h(2 * q.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], q[i]) <= 0) --k;
    h[k++] = q[i];
  }
  for (std::size_t i = q.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], q[i - 1]) <= 0) --k;
    h[k++] = q[i - 1];
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(h[i].i);
  return out;
}

}  // namespace

ConvexHull convex_hull(std::span<const Vec3> pts, double rel_eps) {
  require(!pts.empty(), "convex_hull: empty input");
  ConvexHull out;
  out.is_vertex.assign(pts.size(), false);

  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double eps = std::max(scale, 1.0e-300) * rel_eps;

  // Extreme pair along the coordinate axes.
  std::array<std::size_t, 6> ext{};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (pts[i][a] < pts[ext[2 * a]][a]) ext[2 * a] = i;
      if (pts[i][a] > pts[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
    }
  }
  std::size_t i0 = ext[0], i1 = ext[1];
  double best = -1.0;
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = a + 1; b < 6; ++b) {
      const double d = (pts[ext[a]] - pts[ext[b]]).squaredNorm();
      if (d > best) {
        best = d;
        i0 = ext[a];
        i1 = ext[b];
      }
    }
  }
  if (std::sqrt(best) <= eps) {
    out.dimension = 0;
    out.is_vertex[0] = true;
    return out;
  }

  const Vec3 dir = (pts[i1] - pts[i0]).normalized();
  std::size_t i2 = i0;
  best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 r = pts[i] - pts[i0];
    const double d = (r - r.dot(dir) * dir).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (best <= eps) {
    out.dimension = 1;
    out.is_vertex[i0] = out.is_vertex[i1] = true;
    return out;
  }

  const Vec3 nrm = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  std::size_t i3 = i0;
  best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = std::abs(nrm.dot(pts[i] - pts[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (best <= eps) {
    out.dimension = 2;
    const Vec3 v = nrm.cross(dir);
    for (std::size_t i : hull_2d(pts, pts[i0], dir, v)) out.is_vertex[i] = true;
    return out;
  }

  QuickHull qh(pts, eps);
  qh.run({i0, i1, i2, i3});
  for (const auto& f : qh.faces) {
    if (!f.alive) continue;
    out.faces.push_back(f.v);
    for (std::size_t v : f.v) out.is_vertex[v] = true;
  }
  return out;
}

}  // namespace tosc
