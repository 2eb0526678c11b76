#pragma once

#include <stdexcept>
#include <string>

namespace defproj {

// Error categories map onto CLI exit codes: usage=1, data=2, numeric=3.
struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace defproj
