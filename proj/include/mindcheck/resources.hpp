#pragma once

// Bundled defaults compiled into the library from data/ and templates/.

#include <string_view>
#include <utility>
#include <vector>

namespace mindcheck::resources {

std::string_view default_catalog_text();
std::string_view default_priorities_text();
/// (template name, file text) pairs, sorted by name.
const std::vector<std::pair<std::string_view, std::string_view>>& default_template_texts();

}  // namespace mindcheck::resources
