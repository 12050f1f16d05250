#pragma once

#include <iosfwd>

namespace globenet {

/// Entry point of the `globenet` tool. Returns the process exit status:
/// 0 success, 1 invalid flags or data, 2 I/O or file-format failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace globenet
