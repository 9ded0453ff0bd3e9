#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace afr {

std::string sha256_hex(std::string_view data);

// Incremental SHA-256. Fields are length-prefixed by add_field so that
// concatenation boundaries are unambiguous.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  void add_field(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string base64_encode(std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string trim(std::string_view s);

// %.4g rendering used in tables and chart annotations.
std::string format_sig4(double v);

// Replaces characters that are unsafe in a single path component.
std::string sanitize_path_component(std::string_view s);

std::string_view version_string();

}  // namespace afr
