#pragma once

#include <optional>
#include <span>

namespace speedplan {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // always wrapped into (-pi, pi]

  Pose2D() = default;
  Pose2D(double x_, double y_, double heading_)
      : x(x_), y(y_), heading(wrap_angle(heading_)) {}

  Vec2 position() const { return {x, y}; }
};

struct Obstacle {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
};

/// Axis-aligned rectangle; the simulated world uses [0, width] x [0, height].
struct WorldBounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(Vec2 p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

/// Bearings subtended by an obstacle disc as seen from a point. Both edges
/// are wrapped; the interval runs counter-clockwise from lower to upper.
struct AngularInterval {
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  double half_width = 0.0;

  /// Inclusive: a bearing exactly on an edge counts as inside.
  bool contains(double bearing) const;
};

double distance(Vec2 a, Vec2 b);

/// Throws Error(VehicleInsideObstacle) when the vehicle position lies inside
/// or on the obstacle disc.
AngularInterval obstacle_angular_interval(const Pose2D& vehicle,
                                          const Obstacle& obs);

/// Angular distance from the vehicle heading to the nearer edge of the
/// obstacle's interval; 0 when the heading points into the disc. In [0, pi].
double heading_obstacle_deviation(const Pose2D& vehicle, const Obstacle& obs);

/// Minimum deviation over obstacles whose nearest point is within
/// `sensing_radius` of the vehicle. Empty when nothing is in range.
std::optional<double> min_deviation_in_range(const Pose2D& vehicle,
                                             std::span<const Obstacle> obstacles,
                                             double sensing_radius);

/// Distance along the ray to the first obstacle disc or boundary wall, clamped
/// to [0, max_range]. An origin inside a disc or outside the bounds yields 0.
double cast_ray(Vec2 origin, double bearing, std::span<const Obstacle> obstacles,
                const WorldBounds& bounds, double max_range);

/// True iff the vehicle disc touches any obstacle disc or is not entirely
/// inside the bounds.
bool check_collision(const Pose2D& vehicle, double vehicle_radius,
                     std::span<const Obstacle> obstacles,
                     const WorldBounds& bounds);

}  // namespace speedplan
