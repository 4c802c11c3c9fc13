#pragma once

#include <string>
#include <vector>

namespace sparsebench {

// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 total
// computation failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace sparsebench
