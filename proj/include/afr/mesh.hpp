#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace afr {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  bool operator==(const Vec3&) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string source_digest;      // sha256 of the input bytes
  std::size_t dropped_degenerate = 0;
};

enum class MeshFormat { stl, obj };

// Dispatches on extension (.stl / .obj). STL is sniffed for binary vs ASCII.
// Throws Error(unsupported_format | corrupt_mesh | degenerate_mesh | io_error).
TriangleMesh load_mesh(const std::filesystem::path& path);
TriangleMesh parse_mesh(std::string_view bytes, MeshFormat format);

// Welds exactly-equal vertices and drops zero-area triangles, counting them.
void clean_mesh(TriangleMesh& mesh);

std::string write_binary_stl(const TriangleMesh& mesh, std::string_view header = "afrbench");

}  // namespace afr
