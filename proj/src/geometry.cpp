#include "speedplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "speedplan/error.hpp"

namespace speedplan {

double wrap_angle(double radians) {
  double r = std::remainder(radians, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool AngularInterval::contains(double bearing) const {
  return std::abs(wrap_angle(bearing - center)) <= half_width;
}

AngularInterval obstacle_angular_interval(const Pose2D& vehicle,
                                          const Obstacle& obs) {
  const double dx = obs.center_x - vehicle.x;
  const double dy = obs.center_y - vehicle.y;
  const double d = std::hypot(dx, dy);
  if (!(d > obs.radius)) {
    throw Error(ErrorCode::VehicleInsideObstacle,
                "vehicle at (" + std::to_string(vehicle.x) + ", " +
                    std::to_string(vehicle.y) + ") lies inside obstacle at (" +
                    std::to_string(obs.center_x) + ", " +
                    std::to_string(obs.center_y) + ")");
  }
  AngularInterval out;
  out.center = std::atan2(dy, dx);
  out.half_width = std::asin(obs.radius / d);
  out.lower = wrap_angle(out.center - out.half_width);
  out.upper = wrap_angle(out.center + out.half_width);
  return out;
}

double heading_obstacle_deviation(const Pose2D& vehicle, const Obstacle& obs) {
  const AngularInterval iv = obstacle_angular_interval(vehicle, obs);
  const double off = std::abs(wrap_angle(vehicle.heading - iv.center));
  if (off <= iv.half_width) return 0.0;
  return off - iv.half_width;
}

std::optional<double> min_deviation_in_range(const Pose2D& vehicle,
                                             std::span<const Obstacle> obstacles,
                                             double sensing_radius) {
  if (!(sensing_radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sensing_radius must be positive");
  }
  std::optional<double> best;
  for (const Obstacle& obs : obstacles) {
    const double gap =
        distance(vehicle.position(), {obs.center_x, obs.center_y}) - obs.radius;
    if (gap > sensing_radius) continue;
    const double dev = heading_obstacle_deviation(vehicle, obs);
    if (!best || dev < *best) best = dev;
  }
  return best;
}

namespace {

// Smallest t >= 0 with |origin + t*dir - c| = r, or +inf. dir is unit length.
double ray_disc(Vec2 origin, Vec2 dir, const Obstacle& obs) {
  const double fx = origin.x - obs.center_x;
  const double fy = origin.y - obs.center_y;
  const double c = fx * fx + fy * fy - obs.radius * obs.radius;
  if (c <= 0.0) return 0.0;
  const double b = fx * dir.x + fy * dir.y;
  if (b > 0.0) return std::numeric_limits<double>::infinity();  // facing away
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  return -b - std::sqrt(disc);
}

double ray_walls(Vec2 origin, Vec2 dir, const WorldBounds& bounds) {
  if (!bounds.contains(origin)) return 0.0;
  double t = std::numeric_limits<double>::infinity();
  if (dir.x > 0.0) t = std::min(t, (bounds.max_x - origin.x) / dir.x);
  if (dir.x < 0.0) t = std::min(t, (bounds.min_x - origin.x) / dir.x);
  if (dir.y > 0.0) t = std::min(t, (bounds.max_y - origin.y) / dir.y);
  if (dir.y < 0.0) t = std::min(t, (bounds.min_y - origin.y) / dir.y);
  return t;
}

}  // namespace

double cast_ray(Vec2 origin, double bearing, std::span<const Obstacle> obstacles,
                const WorldBounds& bounds, double max_range) {
  if (!(max_range > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_range must be positive");
  }
  const Vec2 dir{std::cos(bearing), std::sin(bearing)};
  double t = ray_walls(origin, dir, bounds);
  for (const Obstacle& obs : obstacles) t = std::min(t, ray_disc(origin, dir, obs));
  return std::clamp(t, 0.0, max_range);
}

bool check_collision(const Pose2D& vehicle, double vehicle_radius,
                     std::span<const Obstacle> obstacles,
                     const WorldBounds& bounds) {
  if (!(vehicle_radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "vehicle_radius must be positive");
  }
  if (vehicle.x - vehicle_radius <= bounds.min_x ||
      vehicle.x + vehicle_radius >= bounds.max_x ||
      vehicle.y - vehicle_radius <= bounds.min_y ||
      vehicle.y + vehicle_radius >= bounds.max_y) {
    return true;
  }
  for (const Obstacle& obs : obstacles) {
    const double d = distance(vehicle.position(), {obs.center_x, obs.center_y});
    if (d <= obs.radius + vehicle_radius) return true;
  }
  return false;
}

}  // namespace speedplan
