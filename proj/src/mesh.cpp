#include "afr/mesh.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <map>
#include <tuple>

#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

static_assert(std::endian::native == std::endian::little, "STL reader assumes a little-endian host");

namespace {

[[noreturn]] void corrupt(const std::string& why) { throw Error(Errc::corrupt_mesh, why); }

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

float read_f32(const char* p) {
  float f;
  std::memcpy(&f, p, 4);
  return f;
}

TriangleMesh parse_binary_stl(std::string_view b) {
  std::uint32_t n;
  std::memcpy(&n, b.data() + 80, 4);
  TriangleMesh m;
  m.vertices.reserve(static_cast<std::size_t>(n) * 3);
  m.triangles.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const char* rec = b.data() + 84 + static_cast<std::size_t>(i) * 50;
    for (int k = 0; k < 3; ++k) {
      const char* v = rec + 12 + 12 * k;
      m.vertices.push_back({read_f32(v), read_f32(v + 4), read_f32(v + 8)});
    }
    m.triangles.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  }
  return m;
}

// Splits on ASCII whitespace.
std::vector<std::string_view> tokenize(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < s.size()) {
    while (i < s.size() && ws(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !ws(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_double(std::string_view tok) {
  double v = 0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) corrupt("bad number \"" + std::string(tok) + "\"");
  return v;
}

TriangleMesh parse_ascii_stl(std::string_view b) {
  auto toks = tokenize(b);
  TriangleMesh m;
  std::size_t facets = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i] == "facet") {
      ++facets;
    } else if (toks[i] == "vertex") {
      if (i + 3 >= toks.size()) corrupt("truncated vertex");
      m.vertices.push_back({to_double(toks[i + 1]), to_double(toks[i + 2]), to_double(toks[i + 3])});
      i += 3;
    }
  }
  if (m.vertices.size() % 3 != 0 || m.vertices.size() / 3 != facets) corrupt("facet/vertex count mismatch");
  if (std::find(toks.begin(), toks.end(), std::string_view("endsolid")) == toks.end()) corrupt("missing endsolid");
  for (std::uint32_t i = 0; i < m.vertices.size() / 3; ++i) m.triangles.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  return m;
}

TriangleMesh parse_obj(std::string_view b) {
  TriangleMesh m;
  std::size_t line_start = 0;
  while (line_start < b.size()) {
    std::size_t line_end = b.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = b.size();
    auto line = b.substr(line_start, line_end - line_start);
    line_start = line_end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) corrupt("vertex needs three coordinates");
      m.vertices.push_back({to_double(toks[1]), to_double(toks[2]), to_double(toks[3])});
    } else if (toks[0] == "f") {
      if (toks.size() < 4) corrupt("face needs at least three vertices");
      std::vector<std::uint32_t> idx;
      for (std::size_t k = 1; k < toks.size(); ++k) {
        auto ref = toks[k].substr(0, toks[k].find('/'));
        long long v = 0;
        auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), v);
        if (ec != std::errc() || ptr != ref.data() + ref.size() || v == 0) corrupt("bad face index");
        long long n = static_cast<long long>(m.vertices.size());
        long long resolved = v > 0 ? v - 1 : n + v;
        if (resolved < 0 || resolved >= n) corrupt("face index out of range");
        idx.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return m;
}

}  // namespace

void clean_mesh(TriangleMesh& mesh) {
  std::map<std::tuple<double, double, double>, std::uint32_t> index;
  std::vector<Vec3> welded;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 v = mesh.vertices[i];
    // -0.0 and 0.0 are the same point
    v.x += 0.0;
    v.y += 0.0;
    v.z += 0.0;
    auto [it, inserted] = index.emplace(std::make_tuple(v.x, v.y, v.z), static_cast<std::uint32_t>(welded.size()));
    if (inserted) welded.push_back(v);
    remap[i] = it->second;
  }
  std::vector<Triangle> kept;
  kept.reserve(mesh.triangles.size());
  for (auto t : mesh.triangles) {
    for (auto& k : t) k = remap[k];
    const Vec3 &a = welded[t[0]], &b = welded[t[1]], &c = welded[t[2]];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || norm(cross(b - a, c - a)) == 0.0) {
      ++mesh.dropped_degenerate;
      continue;
    }
    kept.push_back(t);
  }
  mesh.vertices = std::move(welded);
  mesh.triangles = std::move(kept);
}

TriangleMesh parse_mesh(std::string_view bytes, MeshFormat format) {
  TriangleMesh m;
  if (format == MeshFormat::obj) {
    m = parse_obj(bytes);
  } else {
    bool size_matches_binary = false;
    if (bytes.size() >= 84) {
      std::uint32_t n;
      std::memcpy(&n, bytes.data() + 80, 4);
      size_matches_binary = bytes.size() == 84 + static_cast<std::uint64_t>(n) * 50;
    }
    auto head = trim(bytes.substr(0, std::min<std::size_t>(bytes.size(), 512)));
    bool looks_ascii = head.rfind("solid", 0) == 0;
    if (size_matches_binary) {
      m = parse_binary_stl(bytes);
    } else if (looks_ascii) {
      m = parse_ascii_stl(bytes);
    } else {
      corrupt(bytes.size() < 84 ? "file shorter than an STL header" : "binary STL size does not match triangle count");
    }
  }
  for (const auto& v : m.vertices)
    if (!finite(v)) corrupt("non-finite vertex coordinate");
  if (m.triangles.empty()) corrupt("no triangles");
  clean_mesh(m);
  if (m.triangles.empty()) throw Error(Errc::degenerate_mesh, "every triangle has zero area");
  m.source_digest = sha256_hex(bytes);
  return m;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  MeshFormat fmt;
  if (ext == ".stl") {
    fmt = MeshFormat::stl;
  } else if (ext == ".obj") {
    fmt = MeshFormat::obj;
  } else {
    throw Error(Errc::unsupported_format, path.string());
  }
  return parse_mesh(read_file(path), fmt);
}

std::string write_binary_stl(const TriangleMesh& mesh, std::string_view header) {
  std::string out(80, '\0');
  std::memcpy(out.data(), header.data(), std::min<std::size_t>(header.size(), 80));
  auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  put(&n, 4);
  for (const auto& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    Vec3 nrm = cross(b - a, c - a);
    double len = norm(nrm);
    if (len > 0) nrm = nrm / len;
    for (const Vec3& v : {nrm, a, b, c}) {
      float f[3] = {static_cast<float>(v.x), static_cast<float>(v.y), static_cast<float>(v.z)};
      put(f, 12);
    }
    std::uint16_t attr = 0;
    put(&attr, 2);
  }
  return out;
}

}  // namespace afr
