#pragma once

#include <string>
#include <vector>

namespace defproj::cli {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run(int argc, const char* const* argv);

// same entry point, convenient for in-process tests
int run(const std::vector<std::string>& args);

}  // namespace defproj::cli
