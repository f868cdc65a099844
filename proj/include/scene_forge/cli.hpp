#pragma once

#include <iosfwd>

namespace scene_forge::cli {

/// Exit codes: 0 success, 1 some inputs failed (listed on `err`), 2 usage or
/// configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scene_forge::cli
