#pragma once

#include <stdexcept>
#include <string>

namespace qute {

/// Malformed input text: edge lists, p-value tables, sensor logs, matrices.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qute
