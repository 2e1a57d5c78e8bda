#pragma once

#include <map>
#include <string>
#include <string_view>

namespace rolecheck::assets {

// Template file stem -> verbatim text, compiled from templates/*.txt.
const std::map<std::string, std::string>& builtin_templates();
// Contents of data/subdisciplines.txt.
std::string_view builtin_registry();

}  // namespace rolecheck::assets
