#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace afr {

// Text assets compiled into the library (taxonomy, alias table, templates,
// exemplar answer). Throws Error(missing_asset) for unknown names.
std::string_view embedded_asset(std::string_view name);

// Directory holding binary assets such as exemplar meshes. Honors the
// AFR_ASSET_DIR environment variable, else the source-tree assets/ folder.
std::filesystem::path asset_dir();

namespace detail {
const std::map<std::string_view, std::string_view>& embedded_assets();
}

}  // namespace afr
