#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "afr/image.hpp"
#include "afr/mesh.hpp"

namespace afr {

// Orthographic camera placed along +direction, looking back at the origin.
struct ViewSpec {
  std::string name;
  Vec3 direction;
  Vec3 up_hint;
};

// Normalizes both vectors; throws Error(invalid_argument) if they are
// degenerate or parallel.
ViewSpec make_view(std::string name, Vec3 direction, Vec3 up_hint);

// iso (1,1,1)/sqrt3, iso2 (-1,-1,1)/sqrt3, top (0,0,1).
std::vector<ViewSpec> default_views();

// Known names: iso, iso2, top, bottom, front, back, left, right.
ViewSpec view_by_name(std::string_view name);

struct RenderParams {
  int width = 1024;
  int height = 1024;
  double margin_fraction = 0.9;
  Rgb background{255, 255, 255};
  Rgb base_color{176, 186, 204};
  // Light in camera coordinates (right, up, towards viewer).
  Vec3 light_direction = normalized(Vec3{-0.35, 0.45, 0.82});
  double ambient = 0.25;
  bool edge_overlay = false;
  Rgb edge_color{40, 40, 48};

  std::string digest() const;
};

struct RenderedView {
  std::string name;
  Image image;  // decoded pixels; may be empty (montage decodes bytes on demand)
  std::string bytes;
  std::string media_type = "image/png";
};

struct RenderedViewSet {
  std::vector<RenderedView> views;
  std::string mesh_digest;
  std::string params_digest;
};

Image rasterize_view(const TriangleMesh& mesh, const ViewSpec& view, const RenderParams& p);
std::string render_view(const TriangleMesh& mesh, const ViewSpec& view, const RenderParams& p);
RenderedViewSet render_view_set(const TriangleMesh& mesh, const std::vector<ViewSpec>& views,
                                const RenderParams& p);

// Wraps pre-rendered image files as a view set (1..3 images).
RenderedViewSet load_view_set(const std::vector<std::string>& names,
                              const std::vector<std::string>& image_bytes);

enum class MontageLayout { horizontal, grid };

inline constexpr int kMontageGutter = 16;
inline constexpr Rgb kMontageGutterColor{160, 160, 160};

Image compose_montage_image(const RenderedViewSet& set, MontageLayout layout);
std::string compose_montage(const RenderedViewSet& set, MontageLayout layout);

}  // namespace afr
