#pragma once

#include <iosfwd>

namespace relanet::cli {

// Parses argv and runs one subcommand (build-graph, train, eval, predict,
// export). Returns the process exit code: 0 success, 2 usage error,
// 3 data/file error, 4 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relanet::cli
