#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace aim {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Unit vector 90 degrees clockwise of `d` (the right-hand side of travel).
inline Vec2 right_normal(Vec2 d) { return {d.y, -d.x}; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Pose {
  Vec2 position;
  double heading = 0.0;
  double curvature = 0.0;
};

/// Straight line or circular arc. Arcs turn left for positive sweep.
struct Segment {
  enum class Kind { line, arc };

  Kind kind = Kind::line;
  Vec2 start;
  double start_heading = 0.0;
  double length = 0.0;
  double curvature = 0.0;  // signed, zero for lines

  static Segment line(Vec2 from, Vec2 to);
  static Segment arc(Vec2 from, double heading, double radius, double sweep);

  Pose pose_at(double u) const;
  Vec2 end() const { return pose_at(length).position; }
};

/// Piecewise line/arc curve parameterised by arc length.
class Curve {
 public:
  Curve() = default;
  explicit Curve(std::vector<Segment> segments);

  double length() const { return total_length_; }
  Pose pose_at(double s) const;
  std::span<const Segment> segments() const { return segments_; }

  /// Dense polyline sampled at most `spacing` apart (arcs) with the arc
  /// length of every vertex.
  struct Polyline {
    std::vector<Vec2> points;
    std::vector<double> arc_length;
  };
  Polyline sample(double spacing, double from = 0.0,
                  double to = -1.0) const;

  /// Arc length of the closest point on the curve to `p`.
  double project(Vec2 p) const;

 private:
  std::vector<Segment> segments_;
  std::vector<double> offsets_;
  double total_length_ = 0.0;
};

struct PolylineHit {
  Vec2 point;
  double s_a = 0.0;
  double s_b = 0.0;
};

/// All proper intersections between two polylines. Hits closer than
/// `merge_distance` along both curves are collapsed into one.
std::vector<PolylineHit> intersect_polylines(const Curve::Polyline& a,
                                             const Curve::Polyline& b,
                                             double merge_distance = 1.0);

/// Oriented rectangle footprint of a vehicle.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;
};

/// Separating-axis overlap test. Touching boxes do not overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

}  // namespace aim
