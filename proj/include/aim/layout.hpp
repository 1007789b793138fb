#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "aim/geometry.hpp"

namespace aim {

enum class Approach : int { north = 0, east = 1, south = 2, west = 3 };
enum class Turn : int { left = 0, straight = 1, right = 2 };
enum class RoadClass { major, minor };

inline constexpr std::array<Approach, 4> kApproaches{
    Approach::north, Approach::east, Approach::south, Approach::west};
inline constexpr std::array<Turn, 3> kTurns{Turn::left, Turn::straight,
                                            Turn::right};

std::string_view to_string(Approach a);
std::string_view to_string(Turn t);

using PathId = int;

/// Relation between two distinct paths. Exactly one applies to every pair.
enum class PathRelation { disjoint, crossing, same_lane };

struct ConflictPoint {
  Vec2 position;
  double s_a = 0.0;  // arc length on the first path of the queried pair
  double s_b = 0.0;
  bool merge = false;  // paths join into a shared exit lane here
};

struct ApproachInfo {
  Approach id = Approach::north;
  RoadClass road = RoadClass::major;
  Vec2 direction;  // travel direction into the intersection
  double speed_limit = 0.0;
};

struct PathInfo {
  PathId id = 0;
  Approach origin = Approach::north;
  Turn turn = Turn::straight;
  Approach exit_road = Approach::south;  // road the vehicle leaves on
  Curve curve;
  double stop_s = 0.0;          // stop position (vehicle centre)
  double region_begin = 0.0;    // arc length where the path enters the box
  double region_end = 0.0;
  double approach_limit = 0.0;  // m/s before and after the box
  double region_limit = 0.0;    // m/s inside the box

  double length() const { return curve.length(); }
  double region_length() const { return region_end - region_begin; }
  double speed_limit_at(double s) const {
    return (s >= region_begin && s < region_end) ? region_limit : approach_limit;
  }
};

struct LayoutParams {
  double approach_length = 150.0;
  double exit_length = 50.0;
  double lane_width = 3.5;
  double box_half_size = 7.0;
  double stop_setback = 2.5;     // stop position of the vehicle centre behind the box edge
  double approach_limit = 13.89;
  double turn_limit = 8.33;
  double sample_spacing = 0.25;
  double pass_clearance = 3.0;  // non-crossing paths closer than this conflict
};

class IntersectionLayout {
 public:
  IntersectionLayout(LayoutParams params, std::array<RoadClass, 4> road_classes);

  const LayoutParams& params() const { return params_; }
  const ApproachInfo& approach(Approach a) const {
    return approaches_[static_cast<std::size_t>(a)];
  }
  const std::vector<PathInfo>& paths() const { return paths_; }
  const PathInfo& path(PathId id) const { return paths_.at(static_cast<std::size_t>(id)); }
  std::size_t path_count() const { return paths_.size(); }
  PathId path_id(Approach origin, Turn turn) const {
    return static_cast<int>(origin) * 3 + static_cast<int>(turn);
  }

  PathRelation relation(PathId a, PathId b) const;
  /// Conflict points of the pair, with s_a on `a` and s_b on `b`.
  /// Crossing pairs have at least one, merging pairs exactly one (merge
  /// flag set), everything else none.
  const std::vector<ConflictPoint>& conflicts(PathId a, PathId b) const;
  bool shares_entry(PathId a, PathId b) const {
    return path(a).origin == path(b).origin;
  }
  bool shares_exit(PathId a, PathId b) const {
    return path(a).exit_road == path(b).exit_road;
  }

  /// Square box [-h, h]^2 bounding the conflict area.
  std::array<Vec2, 4> region_polygon() const;
  bool in_region(Vec2 p) const;

 private:
  LayoutParams params_;
  std::array<ApproachInfo, 4> approaches_;
  std::vector<PathInfo> paths_;
  std::vector<PathRelation> relation_;  // n*n
  std::vector<std::vector<ConflictPoint>> conflicts_;  // n*n
};

/// Right-of-way rank of a path: major straight/right 3, major left 2,
/// minor straight/right 1, minor left 0.
int priority_rank(const IntersectionLayout& layout, PathId path);

/// Four-way layout with a major east-west road and a minor north-south road.
IntersectionLayout build_default_layout(const LayoutParams& params = {});

}  // namespace aim
