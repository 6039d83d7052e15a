#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bwh {

// Runs `bwh <subcommand> --config <path> [--seed N] [--out DIR] [--threads K]`.
// Returns 0 on success, 2 on configuration errors and 3 on numerical failures;
// errors are reported as one JSON line on err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bwh
