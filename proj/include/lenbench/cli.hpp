#pragma once

namespace lenbench {

// Full command-line entry point (argument parsing, dispatch, error-to-exit-code
// mapping). Exposed as a library function so tests can drive it in-process.
// Exit codes: 0 success, 1 configuration error, 2 backend/transport error,
// 3 data error.
int run_cli(int argc, const char * const * argv);

}  // namespace lenbench
