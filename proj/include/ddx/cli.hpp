#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ddx {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Exit codes: 0 success, 1 validation or diagnostic failure, 2 usage error.
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in);

}  // namespace ddx
