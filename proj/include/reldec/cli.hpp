#pragma once

#include <iosfwd>

namespace reldec {

// Entry point of the `reldec` tool. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reldec
