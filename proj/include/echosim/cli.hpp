#ifndef ECHOSIM_CLI_HPP
#define ECHOSIM_CLI_HPP

#include <string>
#include <vector>

namespace echosim {

inline constexpr const char* toolkit_version = "0.1.0";

// Parses and executes one command line (args excludes the program name).
// Every run writes its outputs plus a manifest.json into --out; output files
// carry the manifest hash in a header comment (CSV) or field (JSON), and
// re-running the same command reproduces them byte-identically.
// Exit codes: 0 success, 1 validation or usage error, 2 non-convergence.
int run_cli(const std::vector<std::string>& args);

} // namespace echosim

#endif
