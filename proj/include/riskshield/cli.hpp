#pragma once

#include <string>
#include <vector>

namespace riskshield {

/// Batch front-end with subcommands solve, train, verify and sweep.
/// Returns 0 on success, 1 when a verify check fails, 2 on parse or
/// validation errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace riskshield
