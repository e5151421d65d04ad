#include "speedplan/error.hpp"

namespace speedplan {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::VehicleInsideObstacle: return "VehicleInsideObstacle";
    case ErrorCode::InvalidWorld: return "InvalidWorld";
    case ErrorCode::SteppedAfterDone: return "SteppedAfterDone";
    case ErrorCode::PlacementFailed: return "PlacementFailed";
    case ErrorCode::ContradictoryOutcome: return "ContradictoryOutcome";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BufferTooSmall: return "BufferTooSmall";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Interrupted: return "Interrupted";
  }
  return "Unknown";
}

}  // namespace speedplan
