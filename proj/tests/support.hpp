#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "afr/mesh.hpp"
#include "afr/response_parser.hpp"
#include "afr/util.hpp"

namespace afr_test {

inline std::filesystem::path source_dir() { return AFR_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }
inline std::filesystem::path samples_dir() { return source_dir() / "samples"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "afr") {
    std::random_device rd;
    auto base = std::filesystem::temp_directory_path();
    for (;;) {
      path_ = base / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Axis-aligned box [origin, origin + size], 12 outward-wound triangles.
inline afr::TriangleMesh box_mesh(afr::Vec3 size = {1, 1, 1}, afr::Vec3 origin = {0, 0, 0}) {
  afr::TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({origin.x + ((i & 1) ? size.x : 0), origin.y + ((i & 2) ? size.y : 0),
                          origin.z + ((i & 4) ? size.z : 0)});
  const std::uint32_t f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                  {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  for (auto& t : f) m.triangles.push_back({t[0], t[1], t[2]});
  return m;
}

// Prediction with the given (id -> quantity) entries, identified iff qty > 0.
inline afr::ParsedPrediction prediction(const std::map<std::string, std::int64_t>& q,
                                        const std::map<std::string, std::int64_t>& unmatched = {}) {
  afr::ParsedPrediction p;
  for (const auto& [id, n] : q)
    if (n > 0) p.features[id] = {true, n};
  for (const auto& [name, n] : unmatched) p.unmatched.push_back({name, n > 0, n});
  return p;
}

}  // namespace afr_test
