// Builds the sample dataset meshes and the two few-shot exemplar parts as
// binary STL. Output is deterministic; rerun after changing any shape.
//
//   make_sample_parts <repo_root>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "afr/mesh.hpp"
#include "afr/util.hpp"

namespace {

using afr::Vec3;

struct P2 {
  double x, y;
};

using Loop = std::vector<P2>;
using Map = std::function<Vec3(double u, double v, double w)>;

double cross(const P2& o, const P2& a, const P2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double signed_area(const Loop& l) {
  double a = 0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    const P2 &p = l[i], &q = l[(i + 1) % l.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a / 2;
}

Loop oriented(Loop l, bool ccw) {
  if ((signed_area(l) > 0) != ccw) std::reverse(l.begin(), l.end());
  return l;
}

bool same(const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }

bool in_triangle(const P2& p, const P2& a, const P2& b, const P2& c) {
  double d1 = cross(a, b, p), d2 = cross(b, c, p), d3 = cross(c, a, p);
  return d1 >= 0 && d2 >= 0 && d3 >= 0;
}

bool on_segment(const P2& p, const P2& a, const P2& b) {
  return cross(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// True if segment pq touches segment ab anywhere other than at p or q.
bool blocks(const P2& p, const P2& q, const P2& a, const P2& b) {
  for (const P2& e : {a, b})
    if (!same(e, p) && !same(e, q) && on_segment(e, p, q)) return true;
  if (same(a, p) || same(a, q) || same(b, p) || same(b, q)) return false;
  double d1 = cross(p, q, a), d2 = cross(p, q, b), d3 = cross(a, b, p), d4 = cross(a, b, q);
  return ((d1 > 0) != (d2 > 0)) && d1 != 0 && d2 != 0 && ((d3 > 0) != (d4 > 0)) && d3 != 0 && d4 != 0;
}

// Splices each hole into the outer loop through a bridge from its rightmost
// vertex to the nearest outer vertex that the bridge can reach unobstructed.
Loop bridge_holes(Loop outer, std::vector<Loop> holes) {
  auto max_x = [](const Loop& l) { return std::max_element(l.begin(), l.end(), [](P2 p, P2 q) { return p.x < q.x; })->x; };
  std::sort(holes.begin(), holes.end(), [&](const Loop& a, const Loop& b) { return max_x(a) > max_x(b); });
  for (std::size_t h = 0; h < holes.size(); ++h) {
    const Loop& hole = holes[h];
    std::size_t m = 0;
    for (std::size_t i = 1; i < hole.size(); ++i)
      if (hole[i].x > hole[m].x || (hole[i].x == hole[m].x && hole[i].y > hole[m].y)) m = i;
    const P2 M = hole[m];
    auto clear = [&](const P2& V) {
      auto crosses = [&](const Loop& l) {
        for (std::size_t i = 0; i < l.size(); ++i)
          if (blocks(M, V, l[i], l[(i + 1) % l.size()])) return true;
        return false;
      };
      if (crosses(outer)) return false;
      for (std::size_t k = h; k < holes.size(); ++k)
        if (crosses(holes[k])) return false;
      return true;
    };
    std::size_t p = outer.size();
    double best = 1e300;
    for (std::size_t i = 0; i < outer.size(); ++i) {
      double d = std::hypot(outer[i].x - M.x, outer[i].y - M.y);
      if (d < best && clear(outer[i])) {
        best = d;
        p = i;
      }
    }
    if (p == outer.size()) throw std::runtime_error("no bridge for hole");
    const P2 P = outer[p];
    Loop merged(outer.begin(), outer.begin() + static_cast<long>(p) + 1);
    for (std::size_t k = 0; k <= hole.size(); ++k) merged.push_back(hole[(m + k) % hole.size()]);
    merged.push_back(P);
    merged.insert(merged.end(), outer.begin() + static_cast<long>(p) + 1, outer.end());
    outer = std::move(merged);
  }
  return outer;
}

std::vector<std::array<P2, 3>> triangulate(const Loop& outer_in, const std::vector<Loop>& holes_in) {
  std::vector<Loop> holes;
  for (const auto& h : holes_in) holes.push_back(oriented(h, false));
  Loop poly = bridge_holes(oriented(outer_in, true), holes);
  std::vector<std::size_t> idx(poly.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::array<P2, 3>> tris;
  while (idx.size() > 3) {
    std::size_t n = idx.size(), ear = n, fallback = 0;
    double fallback_cross = -1e300;
    for (std::size_t i = 0; i < n && ear == n; ++i) {
      const P2 &a = poly[idx[(i + n - 1) % n]], &b = poly[idx[i]], &c = poly[idx[(i + 1) % n]];
      double cr = cross(a, b, c);
      if (cr > fallback_cross) {
        fallback_cross = cr;
        fallback = i;
      }
      if (cr <= 1e-12) continue;
      bool blocked = false;
      for (std::size_t k = 0; k < n && !blocked; ++k) {
        const P2& q = poly[idx[k]];
        if (same(q, a) || same(q, b) || same(q, c)) continue;
        blocked = in_triangle(q, a, b, c);
      }
      if (!blocked) ear = i;
    }
    if (ear == n) ear = fallback;
    const P2 &a = poly[idx[(ear + n - 1) % n]], &b = poly[idx[ear]], &c = poly[idx[(ear + 1) % n]];
    if (cross(a, b, c) > 1e-12) tris.push_back({a, b, c});
    idx.erase(idx.begin() + static_cast<long>(ear));
  }
  if (cross(poly[idx[0]], poly[idx[1]], poly[idx[2]]) > 1e-12) tris.push_back({poly[idx[0]], poly[idx[1]], poly[idx[2]]});
  return tris;
}

class Builder {
 public:
  void tri(Vec3 a, Vec3 b, Vec3 c) {
    auto base = static_cast<std::uint32_t>(mesh_.vertices.size());
    mesh_.vertices.insert(mesh_.vertices.end(), {a, b, c});
    mesh_.triangles.push_back({base, base + 1, base + 2});
  }
  void quad(Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
    tri(a, b, c);
    tri(a, c, d);
  }

  // Faces of a region at w = w0 and w = w1 (local frame), without walls.
  void caps(const Loop& outer, const std::vector<Loop>& holes, double w0, double w1, const Map& f) {
    for (const auto& t : triangulate(outer, holes)) {
      tri(f(t[0].x, t[0].y, w1), f(t[1].x, t[1].y, w1), f(t[2].x, t[2].y, w1));
      tri(f(t[0].x, t[0].y, w0), f(t[2].x, t[2].y, w0), f(t[1].x, t[1].y, w0));
    }
  }

  void walls(const Loop& loop, double w0, double w1, const Map& f) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const P2 &a = loop[i], &b = loop[(i + 1) % loop.size()];
      quad(f(a.x, a.y, w0), f(b.x, b.y, w0), f(b.x, b.y, w1), f(a.x, a.y, w1));
    }
  }

  void extrude(const Loop& outer, const std::vector<Loop>& holes, double w0, double w1, const Map& f) {
    caps(outer, holes, w0, w1, f);
    walls(outer, w0, w1, f);
    for (const auto& h : holes) walls(h, w0, w1, f);
  }

  // Spherical cap of base radius r and height h sitting on z = z0.
  void dome(double cx, double cy, double z0, double r, double h, int seg = 32, int rings = 8) {
    double R = (r * r + h * h) / (2 * h);
    double zc = z0 + h - R;
    double phi0 = std::asin(r / R);
    auto at = [&](int ring, int s) {
      double phi = phi0 * (1.0 - static_cast<double>(ring) / rings);
      double th = 2 * std::numbers::pi * s / seg;
      return Vec3{cx + R * std::sin(phi) * std::cos(th), cy + R * std::sin(phi) * std::sin(th), zc + R * std::cos(phi)};
    };
    for (int ring = 0; ring < rings; ++ring) {
      for (int s = 0; s < seg; ++s) {
        if (ring == rings - 1) {
          tri(at(ring, s), at(ring, s + 1), at(rings, 0));
        } else {
          quad(at(ring, s), at(ring, s + 1), at(ring + 1, s + 1), at(ring + 1, s));
        }
      }
    }
  }

  afr::TriangleMesh& mesh() { return mesh_; }

 private:
  afr::TriangleMesh mesh_;
};

Map xy_plane() {
  return [](double u, double v, double w) { return Vec3{u, v, w}; };
}

Loop circle(double cx, double cy, double r, int n = 24) {
  Loop l;
  for (int i = 0; i < n; ++i) {
    double a = 2 * std::numbers::pi * i / n;
    l.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return l;
}

Loop rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

// Stadium shape; `horizontal` puts the long axis along u.
Loop obround(double cx, double cy, double length, double r, bool horizontal, int n = 12) {
  Loop l;
  double half = length / 2 - r;
  for (int end = 0; end < 2; ++end) {
    double base = horizontal ? (end == 0 ? -std::numbers::pi / 2 : std::numbers::pi / 2) : (end == 0 ? 0.0 : std::numbers::pi);
    double ox = horizontal ? (end == 0 ? half : -half) : 0;
    double oy = horizontal ? 0 : (end == 0 ? half : -half);
    for (int i = 0; i <= n; ++i) {
      double a = base + std::numbers::pi * i / n;
      l.push_back({cx + ox + r * std::cos(a), cy + oy + r * std::sin(a)});
    }
  }
  return l;
}

// Rectangle whose corners are rounded (radius > 0), chamfered (radius < 0)
// or sharp (0); corners ordered (x0,y0), (x1,y0), (x1,y1), (x0,y1).
Loop shaped_rect(double x0, double y0, double x1, double y1, std::array<double, 4> corner, int arc_n = 8) {
  const P2 c[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  const double start[4] = {std::numbers::pi, 1.5 * std::numbers::pi, 0.0, 0.5 * std::numbers::pi};
  const P2 inward[4] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
  Loop l;
  for (int k = 0; k < 4; ++k) {
    double r = corner[k];
    if (r == 0) {
      l.push_back(c[k]);
    } else if (r < 0) {
      double d = -r;
      P2 before = k == 0 ? P2{x0, y0 + d} : k == 1 ? P2{x1 - d, y0} : k == 2 ? P2{x1, y1 - d} : P2{x0 + d, y1};
      P2 after = k == 0 ? P2{x0 + d, y0} : k == 1 ? P2{x1, y0 + d} : k == 2 ? P2{x1 - d, y1} : P2{x0, y1 - d};
      l.push_back(before);
      l.push_back(after);
    } else {
      P2 ctr{c[k].x + inward[k].x * r, c[k].y + inward[k].y * r};
      for (int i = 0; i <= arc_n; ++i) {
        double a = start[k] + 0.5 * std::numbers::pi * i / arc_n;
        l.push_back({ctr.x + r * std::cos(a), ctr.y + r * std::sin(a)});
      }
    }
  }
  return l;
}

void cylinder(Builder& b, double cx, double cy, double r, double z0, double z1, int n = 24) {
  b.extrude(circle(cx, cy, r, n), {}, z0, z1, xy_plane());
}

void box(Builder& b, double x0, double y0, double z0, double x1, double y1, double z1) {
  b.extrude(rect(x0, y0, x1, y1), {}, z0, z1, xy_plane());
}

// ---- sample dataset ----

afr::TriangleMesh part_001() {
  // Block with four rounded vertical edges and one through hole.
  Builder b;
  b.extrude(shaped_rect(0, 0, 60, 40, {6, 6, 6, 6}), {circle(30, 20, 7)}, 0, 20, xy_plane());
  return b.mesh();
}

afr::TriangleMesh part_002() {
  // Round flange with five bolt holes and a pipe through the centre.
  Builder b;
  std::vector<Loop> holes{circle(0, 0, 12, 32)};
  for (int k = 0; k < 5; ++k) {
    double a = 2 * std::numbers::pi * k / 5 + std::numbers::pi / 2;
    holes.push_back(circle(35 * std::cos(a), 35 * std::sin(a), 4, 16));
  }
  b.extrude(circle(0, 0, 50, 64), holes, 0, 10, xy_plane());
  b.extrude(circle(0, 0, 16, 32), {circle(0, 0, 12, 32)}, 10, 60, xy_plane());
  return b.mesh();
}

// Sheet region on a grid of cells; cells listed in `features` carry a hole.
// Cells share full edges so the caps have no T-junctions.
void perforated_sheet(Builder& b, const std::vector<double>& us, const std::vector<double>& vs, double w0, double w1,
                      const std::function<std::optional<Loop>(std::size_t, std::size_t)>& feature, const Map& f) {
  for (std::size_t i = 0; i + 1 < us.size(); ++i) {
    for (std::size_t j = 0; j + 1 < vs.size(); ++j) {
      Loop cell = rect(us[i], vs[j], us[i + 1], vs[j + 1]);
      std::vector<Loop> holes;
      if (auto h = feature(i, j)) {
        holes.push_back(*h);
        b.walls(*h, w0, w1, f);
      }
      b.caps(cell, holes, w0, w1, f);
    }
  }
  const double u0 = us.front(), u1 = us.back(), v0 = vs.front(), v1 = vs.back();
  Loop boundary;
  for (double u : us) boundary.push_back({u, v0});
  for (std::size_t j = 1; j < vs.size(); ++j) boundary.push_back({u1, vs[j]});
  for (std::size_t i = us.size() - 1; i-- > 0;) boundary.push_back({us[i], v1});
  for (std::size_t j = vs.size() - 1; j-- > 1;) boundary.push_back({u0, vs[j]});
  b.walls(boundary, w0, w1, f);
}

afr::TriangleMesh part_003() {
  // Sheet-metal L bracket: 17 x 7 perforation grid, bent-up flange with four
  // slots, and a joggle step along the front edge.
  Builder b;
  constexpr double t = 2.0;
  std::vector<double> us{0}, vs{15};
  for (int i = 0; i <= 17; ++i) us.push_back(5 + 10.0 * i);
  us.push_back(180);
  for (int j = 0; j <= 7; ++j) vs.push_back(20 + 10.0 * j);
  vs.push_back(95);
  perforated_sheet(
      b, us, vs, 0, t,
      [&](std::size_t i, std::size_t j) -> std::optional<Loop> {
        if (i == 0 || j == 0 || i + 2 == us.size() || j + 2 == vs.size()) return std::nullopt;
        return circle((us[i] + us[i + 1]) / 2, (vs[j] + vs[j + 1]) / 2, 2.5, 16);
      },
      xy_plane());

  // Bend: quarter annulus in (y, z) swept along x.
  constexpr double r_in = 3.0, r_out = r_in + t, bend_y = 95.0, bend_z = r_out;
  Loop sector;
  constexpr int kArc = 10;
  for (int i = 0; i <= kArc; ++i) {
    double a = -std::numbers::pi / 2 + (std::numbers::pi / 2) * i / kArc;
    sector.push_back({bend_y + r_out * std::cos(a), bend_z + r_out * std::sin(a)});
  }
  for (int i = kArc; i >= 0; --i) {
    double a = -std::numbers::pi / 2 + (std::numbers::pi / 2) * i / kArc;
    sector.push_back({bend_y + r_in * std::cos(a), bend_z + r_in * std::sin(a)});
  }
  b.extrude(sector, {}, 0, 180, [](double u, double v, double w) { return Vec3{w, u, v}; });

  // Upright flange in (x, z), thickness along y.
  std::vector<double> fu{0, 10, 35, 55, 80, 100, 125, 145, 170, 180}, fv{bend_z, 18, 32, 45};
  perforated_sheet(
      b, fu, fv, bend_y + r_in, bend_y + r_out,
      [&](std::size_t i, std::size_t j) -> std::optional<Loop> {
        if (j != 1 || i % 2 == 0) return std::nullopt;
        return obround((fu[i] + fu[i + 1]) / 2, 25, 20, 3, true);
      },
      [](double u, double v, double w) { return Vec3{u, w, v}; });

  // Joggle: short down-step and a lower lip.
  box(b, 0, 13, -6, 180, 15, t);
  box(b, 0, 0, -6, 180, 13, -6 + t);
  return b.mesh();
}

// ---- few-shot exemplars ----

afr::TriangleMesh exemplar_plate() {
  Builder b;
  // Base slab: three filleted corners, one chamfered; two holes and two
  // slots through the step ledges.
  std::vector<Loop> through{circle(7.5, 20, 4, 20), circle(7.5, 60, 4, 20), obround(112.5, 25, 20, 3.5, false),
                            obround(112.5, 55, 20, 3.5, false)};
  b.extrude(shaped_rect(0, 0, 120, 80, {8, 8, -8, 8}), through, 0, 10, xy_plane());
  // Raised middle section forms a step on each side and holds three pockets.
  std::vector<Loop> pockets{rect(20, 8, 40, 28), rect(20, 52, 40, 72), rect(48, 8, 68, 28)};
  b.extrude(rect(15, 0, 105, 80), pockets, 10, 18, xy_plane());
  cylinder(b, 58, 62, 6, 18, 26);
  cylinder(b, 80, 15, 6, 18, 26);
  b.extrude(circle(95, 65, 7, 28), {circle(95, 65, 4, 28)}, 18, 34, xy_plane());
  // Threaded stud: core with evenly spaced crests.
  cylinder(b, 78, 40, 3.6, 18, 33, 20);
  for (int k = 0; k < 7; ++k) cylinder(b, 78, 40, 4.6, 19.0 + 2.0 * k, 20.0 + 2.0 * k, 20);
  b.dome(50, 45, 18, 8, 5);
  return b.mesh();
}

afr::TriangleMesh exemplar_base() {
  Builder b;
  // Base with a bevelled front top edge, swept along x.
  Loop profile{{0, 0}, {60, 0}, {60, 8}, {5, 8}, {0, 3}};
  b.extrude(profile, {}, 0, 100, [](double u, double v, double w) { return Vec3{w, u, v}; });
  box(b, 0, 52, 8, 100, 60, 50);
  // Gusset between wall and base.
  Loop gusset{{52, 8}, {30, 8}, {52, 40}};
  b.extrude(gusset, {}, 46, 54, [](double u, double v, double w) { return Vec3{w, u, v}; });
  box(b, 20, 15, 8, 24, 52, 16);
  b.dome(78, 25, 8, 10, 6);
  // Turn half a revolution about z so the iso view faces the gusset side.
  auto m = b.mesh();
  for (auto& v : m.vertices) v = Vec3{100 - v.x, 60 - v.y, v.z};
  return m;
}

void write(const std::filesystem::path& path, const afr::TriangleMesh& m) {
  afr::write_file_atomic(path, afr::write_binary_stl(m, "afrbench sample part"));
  std::printf("%s: %zu triangles\n", path.string().c_str(), m.triangles.size());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_sample_parts <repo_root>\n");
    return 1;
  }
  const std::filesystem::path root = argv[1];
  try {
    write(root / "samples/meshes/part_001.stl", part_001());
    write(root / "samples/meshes/part_002.stl", part_002());
    write(root / "samples/meshes/part_003.stl", part_003());
    write(root / "assets/fewshot/exemplar_plate.stl", exemplar_plate());
    write(root / "assets/fewshot/exemplar_base.stl", exemplar_base());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_sample_parts: %s\n", e.what());
    return 1;
  }
  return 0;
}
