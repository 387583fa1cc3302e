#pragma once

#include <stdexcept>
#include <string>

namespace spinfilter {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spinfilter
