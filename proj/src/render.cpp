#include "afr/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

namespace {

constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = std::int64_t{1} << kSubpixelBits;

struct Camera {
  Vec3 right, up, toward;
};

Camera camera_for(const ViewSpec& v) {
  Vec3 right = normalized(cross(v.up_hint, v.direction));
  return {right, cross(v.direction, right), v.direction};
}

struct Pt {
  std::int64_t x, y;
};

std::int64_t edge(const Pt& a, const Pt& b, const Pt& p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

// For counter-oriented (positive area) triangles in y-down screen space.
bool top_left(const Pt& a, const Pt& b) {
  std::int64_t dx = b.x - a.x, dy = b.y - a.y;
  return (dy == 0 && dx > 0) || dy < 0;
}

std::uint8_t shade(std::uint8_t base, double intensity) {
  double v = std::round(base * intensity);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

void check_params(const RenderParams& p) {
  if (p.width < 64 || p.height < 64) throw Error(Errc::invalid_argument, "render size must be at least 64x64");
  if (!(p.margin_fraction > 0 && p.margin_fraction < 1))
    throw Error(Errc::invalid_argument, "margin_fraction must lie in (0,1)");
}

// Depth is normalised by the projected extent, so this is scale invariant.
constexpr double kDepthJump = 0.02;

void overlay_edges(Image& img, const std::vector<std::uint8_t>& covered, const std::vector<double>& zbuf, Rgb color) {
  Image src = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!covered[static_cast<std::size_t>(y) * img.width + x]) continue;
      Rgb c = src.at(x, y);
      bool boundary = false;
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4 && !boundary; ++k) {
        int nx = x + dx[k], ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) {
          boundary = true;
          continue;
        }
        const std::size_t n = static_cast<std::size_t>(ny) * img.width + nx;
        if (!covered[n]) {
          boundary = true;
        } else if (zbuf[static_cast<std::size_t>(y) * img.width + x] + kDepthJump < zbuf[n]) {
          // Depth step: mark only the farther pixel.
          boundary = true;
        } else if (src.at(nx, ny) != c) {
          // Only one side of a shade change is marked so lines stay one pixel wide.
          boundary = k % 2 == 0;
        }
      }
      if (boundary) img.set(x, y, color);
    }
  }
}

}  // namespace

ViewSpec make_view(std::string name, Vec3 direction, Vec3 up_hint) {
  double dn = norm(direction), un = norm(up_hint);
  if (!(dn > 0) || !(un > 0) || !std::isfinite(dn) || !std::isfinite(un))
    throw Error(Errc::invalid_argument, "view vectors must be nonzero");
  Vec3 d = direction / dn, u = up_hint / un;
  if (norm(cross(d, u)) < 1e-9) throw Error(Errc::invalid_argument, "view direction is parallel to up hint");
  return {std::move(name), d, u};
}

ViewSpec view_by_name(std::string_view name) {
  const Vec3 z{0, 0, 1}, y{0, 1, 0};
  if (name == "iso") return make_view("iso", {1, 1, 1}, z);
  if (name == "iso2") return make_view("iso2", {-1, -1, 1}, z);
  if (name == "top") return make_view("top", {0, 0, 1}, y);
  if (name == "bottom") return make_view("bottom", {0, 0, -1}, y);
  if (name == "front") return make_view("front", {0, -1, 0}, z);
  if (name == "back") return make_view("back", {0, 1, 0}, z);
  if (name == "right") return make_view("right", {1, 0, 0}, z);
  if (name == "left") return make_view("left", {-1, 0, 0}, z);
  throw Error(Errc::invalid_argument, "unknown view \"" + std::string(name) + "\"");
}

std::vector<ViewSpec> default_views() { return {view_by_name("iso"), view_by_name("iso2"), view_by_name("top")}; }

std::string RenderParams::digest() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "w=%d;h=%d;m=%.17g;bg=%d,%d,%d;base=%d,%d,%d;light=%.17g,%.17g,%.17g;amb=%.17g;edges=%d;ec=%d,%d,%d",
                width, height, margin_fraction, background.r, background.g, background.b, base_color.r, base_color.g,
                base_color.b, light_direction.x, light_direction.y, light_direction.z, ambient, edge_overlay ? 1 : 0,
                edge_color.r, edge_color.g, edge_color.b);
  return "sha256:" + sha256_hex(buf);
}

Image rasterize_view(const TriangleMesh& mesh, const ViewSpec& view, const RenderParams& p) {
  check_params(p);
  if (mesh.triangles.empty()) throw Error(Errc::degenerate_mesh, "mesh has no triangles");
  const Camera cam = camera_for(view);

  // Project every referenced vertex; the fit uses the 2D extent so that it
  // does not depend on the mesh's orientation in world space.
  std::vector<Vec3> cs(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    cs[i] = {dot(v, cam.right), dot(v, cam.up), dot(v, cam.toward)};
  }
  double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u, lo_v = lo_u, hi_v = -lo_u;
  for (const auto& t : mesh.triangles) {
    for (auto k : t) {
      lo_u = std::min(lo_u, cs[k].x);
      hi_u = std::max(hi_u, cs[k].x);
      lo_v = std::min(lo_v, cs[k].y);
      hi_v = std::max(hi_v, cs[k].y);
    }
  }
  const double ext_u = hi_u - lo_u, ext_v = hi_v - lo_v;
  const double extent = std::max(ext_u, ext_v);
  if (!(extent > 0)) throw Error(Errc::degenerate_mesh, "mesh projects to a point");
  const double cu = 0.5 * (lo_u + hi_u), cv = 0.5 * (lo_v + hi_v);
  // Work in units of the projected extent first so that uniform scaling of
  // the input cancels before the pixel transform.
  const double su = ext_u > 0 ? p.margin_fraction * p.width / (ext_u / extent) : std::numeric_limits<double>::infinity();
  const double sv = ext_v > 0 ? p.margin_fraction * p.height / (ext_v / extent) : std::numeric_limits<double>::infinity();
  const double scale = std::min(su, sv);

  const int W = p.width, H = p.height;
  std::vector<Pt> sp(cs.size());
  std::vector<double> depth_of(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    double u = (cs[i].x - cu) / extent, v = (cs[i].y - cv) / extent;
    double px = 0.5 * W + u * scale;
    double py = 0.5 * H - v * scale;
    sp[i] = {std::llround(px * kSubpixel), std::llround(py * kSubpixel)};
    depth_of[i] = cs[i].z / extent;
  }

  Image img(W, H, p.background);
  std::vector<double> zbuf(static_cast<std::size_t>(W) * H, -std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(W) * H, 0);

  for (const auto& t : mesh.triangles) {
    std::uint32_t ia = t[0], ib = t[1], ic = t[2];
    std::int64_t area = edge(sp[ia], sp[ib], sp[ic]);
    if (area == 0) continue;
    if (area < 0) {
      std::swap(ib, ic);
      area = -area;
    }
    const Pt &a = sp[ia], &b = sp[ib], &c = sp[ic];

    // Normal in camera space, flipped to face the viewer (two-sided).
    Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    n = normalized(n);
    Vec3 nc{dot(n, cam.right), dot(n, cam.up), dot(n, cam.toward)};
    if (nc.z < 0) nc = nc * -1.0;
    double intensity = p.ambient + (1.0 - p.ambient) * std::max(0.0, dot(nc, p.light_direction));
    Rgb color{shade(p.base_color.r, intensity), shade(p.base_color.g, intensity), shade(p.base_color.b, intensity)};

    std::int64_t min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
    std::int64_t min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
    // Pixel x covers sample (x + 0.5); convert subpixel bounds to pixel range.
    int x0 = static_cast<int>(std::max<std::int64_t>(0, (min_x - kSubpixel / 2 + kSubpixel - 1) >> kSubpixelBits));
    int x1 = static_cast<int>(std::min<std::int64_t>(W - 1, (max_x - kSubpixel / 2) >> kSubpixelBits));
    int y0 = static_cast<int>(std::max<std::int64_t>(0, (min_y - kSubpixel / 2 + kSubpixel - 1) >> kSubpixelBits));
    int y1 = static_cast<int>(std::min<std::int64_t>(H - 1, (max_y - kSubpixel / 2) >> kSubpixelBits));
    if (x0 > x1 || y0 > y1) continue;

    const bool tl0 = top_left(b, c), tl1 = top_left(c, a), tl2 = top_left(a, b);
    const double za = depth_of[ia], zb = depth_of[ib], zc = depth_of[ic];
    const double inv_area = 1.0 / static_cast<double>(area);
    for (int y = y0; y <= y1; ++y) {
      const std::int64_t sy = (static_cast<std::int64_t>(y) << kSubpixelBits) + kSubpixel / 2;
      for (int x = x0; x <= x1; ++x) {
        const Pt s{(static_cast<std::int64_t>(x) << kSubpixelBits) + kSubpixel / 2, sy};
        std::int64_t w0 = edge(b, c, s), w1 = edge(c, a, s), w2 = edge(a, b, s);
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        if ((w0 == 0 && !tl0) || (w1 == 0 && !tl1) || (w2 == 0 && !tl2)) continue;
        double z = (static_cast<double>(w0) * za + static_cast<double>(w1) * zb + static_cast<double>(w2) * zc) * inv_area;
        std::size_t idx = static_cast<std::size_t>(y) * W + x;
        if (z > zbuf[idx]) {
          zbuf[idx] = z;
          covered[idx] = 1;
          img.set(x, y, color);
        }
      }
    }
  }
  if (p.edge_overlay) overlay_edges(img, covered, zbuf, p.edge_color);
  return img;
}

std::string render_view(const TriangleMesh& mesh, const ViewSpec& view, const RenderParams& p) {
  return encode_png(rasterize_view(mesh, view, p));
}

RenderedViewSet render_view_set(const TriangleMesh& mesh, const std::vector<ViewSpec>& views, const RenderParams& p) {
  if (views.empty() || views.size() > 3) throw Error(Errc::invalid_argument, "a view set holds 1 to 3 views");
  RenderedViewSet set;
  set.mesh_digest = mesh.source_digest.empty() ? sha256_hex(write_binary_stl(mesh)) : mesh.source_digest;
  set.params_digest = p.digest();
  for (const auto& v : views) {
    RenderedView rv;
    rv.name = v.name;
    rv.image = rasterize_view(mesh, v, p);
    rv.bytes = encode_png(rv.image);
    set.views.push_back(std::move(rv));
  }
  return set;
}

RenderedViewSet load_view_set(const std::vector<std::string>& names, const std::vector<std::string>& image_bytes) {
  if (image_bytes.empty() || image_bytes.size() > 3 || names.size() != image_bytes.size())
    throw Error(Errc::invalid_argument, "a view set holds 1 to 3 named images");
  RenderedViewSet set;
  Sha256 h;
  for (std::size_t i = 0; i < image_bytes.size(); ++i) {
    RenderedView rv;
    rv.name = names[i];
    rv.bytes = image_bytes[i];
    rv.media_type = std::string(sniff_media_type(rv.bytes));
    if (rv.media_type.empty()) throw Error(Errc::unsupported_image, "unrecognized image format for " + names[i]);
    if (rv.media_type == "image/png") rv.image = decode_png(rv.bytes);
    h.add_field(rv.bytes);
    set.views.push_back(std::move(rv));
  }
  set.mesh_digest = "images:" + h.hex_digest();
  set.params_digest = "prerendered";
  return set;
}

Image compose_montage_image(const RenderedViewSet& set, MontageLayout layout) {
  if (set.views.empty()) throw Error(Errc::invalid_argument, "montage needs at least one view");
  std::vector<Image> decoded;
  decoded.reserve(set.views.size());
  std::vector<const Image*> imgs;
  for (const auto& v : set.views) {
    if (!v.image.empty()) {
      imgs.push_back(&v.image);
      continue;
    }
    if (v.media_type != "image/png") throw Error(Errc::unsupported_image, "montage needs PNG views");
    decoded.push_back(decode_png(v.bytes));
    imgs.push_back(&decoded.back());
  }
  const int n = static_cast<int>(imgs.size());
  if (layout == MontageLayout::horizontal) {
    int w = (n - 1) * kMontageGutter, h = 0;
    for (auto* im : imgs) {
      w += im->width;
      h = std::max(h, im->height);
    }
    Image out(w, h, kMontageGutterColor);
    int x = 0;
    for (auto* im : imgs) {
      out.blit(*im, x, 0);
      x += im->width + kMontageGutter;
    }
    return out;
  }
  int cw = 0, ch = 0;
  for (auto* im : imgs) {
    cw = std::max(cw, im->width);
    ch = std::max(ch, im->height);
  }
  const int cols = n == 1 ? 1 : 2;
  const int rows = (n + cols - 1) / cols;
  Image out(cols * cw + (cols - 1) * kMontageGutter, rows * ch + (rows - 1) * kMontageGutter, kMontageGutterColor);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int i = r * cols + c;
      int x = c * (cw + kMontageGutter), y = r * (ch + kMontageGutter);
      if (i < n) {
        out.blit(*imgs[i], x, y);
      } else {
        out.blit(Image(cw, ch, Rgb{255, 255, 255}), x, y);
      }
    }
  }
  return out;
}

std::string compose_montage(const RenderedViewSet& set, MontageLayout layout) {
  return encode_png(compose_montage_image(set, layout));
}

}  // namespace afr
