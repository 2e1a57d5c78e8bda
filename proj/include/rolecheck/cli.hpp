#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rolecheck {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Domain errors print "<ErrorName>: message"
// to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rolecheck
