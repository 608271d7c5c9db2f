#pragma once

namespace jprof {

// Command-line front end. Returns the process exit code: 0 on success,
// 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv);

}  // namespace jprof
