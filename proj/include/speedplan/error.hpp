#pragma once

#include <stdexcept>
#include <string>

namespace speedplan {

enum class ErrorCode {
  VehicleInsideObstacle,
  InvalidWorld,
  SteppedAfterDone,
  PlacementFailed,
  ContradictoryOutcome,
  ShapeMismatch,
  BufferTooSmall,
  InvalidArgument,
  Config,
  Io,
  Interrupted,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the C
// layer can map it onto a status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace speedplan
