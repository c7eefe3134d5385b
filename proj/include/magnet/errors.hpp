#pragma once

#include <stdexcept>
#include <string>

namespace magnet {

/// Raised when an operation is called in a state its contract forbids, e.g.
/// decoding a level before the levels below it are complete.
class InvalidState : public std::logic_error {
 public:
  explicit InvalidState(const std::string& what) : std::logic_error(what) {}
};

}  // namespace magnet
