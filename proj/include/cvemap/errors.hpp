#pragma once

#include <stdexcept>
#include <string>

namespace cvemap {

// Raised when a config/data file is missing, unparseable, or fails schema
// validation.
struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised on bad call arguments (unknown id, out-of-range k, empty context).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an external backend or endpoint cannot be reached; distinct
// from an empty result.
struct TransportError : std::runtime_error {
  explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cvemap
