#include <doctest.h>

#include <cmath>
#include <limits>

#include "afr/error.hpp"
#include "afr/mesh.hpp"
#include "support.hpp"

using namespace afr;

namespace {

Errc load_error(const std::filesystem::path& p) {
  try {
    load_mesh(p);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an afr::Error");
  return Errc::invalid_argument;
}

const char* kCubeObj = R"(# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
f 1 4 3 2
f 5 6 7 8
f 1/1/1 2/1/1 6/1/1 5/1/1
f 2 3 7 6
f 3 4 8 7
f -8 -4 -1 -5
)";

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("binary STL cube round trip") {
    afr_test::TempDir dir;
    auto bytes = write_binary_stl(afr_test::box_mesh());
    CHECK(bytes.size() == 84 + 50 * 12);
    write_file_atomic(dir / "cube.stl", bytes);
    auto m = load_mesh(dir / "cube.stl");
    CHECK(m.vertices.size() == 8);
    CHECK(m.triangles.size() == 12);
    CHECK(m.dropped_degenerate == 0);
    CHECK(m.source_digest == sha256_hex(bytes));
  }

  TEST_CASE("ASCII STL and OBJ") {
    afr_test::TempDir dir;
    std::string ascii = "solid tri\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n"
                        "   vertex 0 1 0\n  endloop\n endfacet\nendsolid tri\n";
    write_file_atomic(dir / "tri.STL", ascii);
    auto m = load_mesh(dir / "tri.STL");
    CHECK(m.triangles.size() == 1);

    write_file_atomic(dir / "cube.obj", kCubeObj);
    auto o = load_mesh(dir / "cube.obj");
    CHECK(o.triangles.size() == 12);
    CHECK(o.vertices.size() == 8);
  }

  TEST_CASE("malformed inputs") {
    afr_test::TempDir dir;
    auto bytes = write_binary_stl(afr_test::box_mesh());
    write_file_atomic(dir / "trunc.stl", bytes.substr(0, bytes.size() - 7));
    CHECK(load_error(dir / "trunc.stl") == Errc::corrupt_mesh);
    write_file_atomic(dir / "cube.ply", "ply\n");
    CHECK(load_error(dir / "cube.ply") == Errc::unsupported_format);
    write_file_atomic(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 3\n");
    CHECK(load_error(dir / "bad.obj") == Errc::corrupt_mesh);
    write_file_atomic(dir / "none.obj", "# nothing\n");
    CHECK(load_error(dir / "none.obj") == Errc::corrupt_mesh);
    write_file_atomic(dir / "noend.stl", "solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0 0\n vertex 1 0 0\n vertex 0 1 0\n");
    CHECK(load_error(dir / "noend.stl") == Errc::corrupt_mesh);
    CHECK(load_error(dir / "missing.stl") == Errc::io_error);

    auto nan = afr_test::box_mesh();
    nan.vertices[3].x = std::numeric_limits<double>::quiet_NaN();
    write_file_atomic(dir / "nan.stl", write_binary_stl(nan));
    CHECK(load_error(dir / "nan.stl") == Errc::corrupt_mesh);
  }

  TEST_CASE("degenerate triangles are dropped and counted") {
    auto m = afr_test::box_mesh();
    m.triangles.push_back({0, 0, 1});
    m.vertices.push_back({2, 0, 0});
    m.triangles.push_back({0, 1, static_cast<std::uint32_t>(m.vertices.size() - 1)});  // collinear
    auto parsed = parse_mesh(write_binary_stl(m), MeshFormat::stl);
    CHECK(parsed.triangles.size() == 12);
    CHECK(parsed.dropped_degenerate == 2);

    TriangleMesh flat;
    flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    flat.triangles = {{0, 1, 2}};
    try {
      parse_mesh(write_binary_stl(flat), MeshFormat::stl);
      FAIL("expected DegenerateMesh");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::degenerate_mesh);
    }
  }

  TEST_CASE("sample meshes load without drops") {
    for (const char* name : {"part_001.stl", "part_002.stl", "part_003.stl"}) {
      auto m = load_mesh(afr_test::samples_dir() / "meshes" / name);
      CHECK_MESSAGE(m.dropped_degenerate == 0, name);
      CHECK(m.triangles.size() > 12);
    }
  }
}
