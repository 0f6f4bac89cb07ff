#pragma once

#include <stdexcept>
#include <string>

namespace mbd {

// File-system and serialization failures; everything else uses the
// standard logic/runtime error hierarchy.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mbd
