#include "afr/assets.hpp"

#include <cstdlib>

#include "afr/error.hpp"

namespace afr {

std::string_view embedded_asset(std::string_view name) {
  const auto& table = detail::embedded_assets();
  auto it = table.find(name);
  if (it == table.end()) throw Error(Errc::missing_asset, std::string(name));
  return it->second;
}

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("AFR_ASSET_DIR"); env != nullptr && *env != '\0') return env;
  return AFR_DEFAULT_ASSET_DIR;
}

}  // namespace afr
