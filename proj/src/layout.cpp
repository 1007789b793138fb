#include "aim/layout.hpp"

#include <cmath>
#include <stdexcept>

namespace aim {

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::north: return "north";
    case Approach::east: return "east";
    case Approach::south: return "south";
    case Approach::west: return "west";
  }
  return "?";
}

std::string_view to_string(Turn t) {
  switch (t) {
    case Turn::left: return "left";
    case Turn::straight: return "straight";
    case Turn::right: return "right";
  }
  return "?";
}

namespace {

Vec2 travel_direction(Approach a) {
  switch (a) {
    case Approach::north: return {0.0, -1.0};
    case Approach::east: return {-1.0, 0.0};
    case Approach::south: return {0.0, 1.0};
    case Approach::west: return {1.0, 0.0};
  }
  return {};
}

Approach road_towards(Vec2 d_out) {
  for (Approach a : kApproaches) {
    Vec2 d = travel_direction(a);
    if (std::abs(d.x + d_out.x) < 1e-9 && std::abs(d.y + d_out.y) < 1e-9) return a;
  }
  throw std::logic_error("no road in direction");
}

PathInfo make_path(const LayoutParams& p, const ApproachInfo& app, Turn turn,
                   PathId id) {
  const double h = p.box_half_size;
  const double w = p.lane_width / 2.0;
  const Vec2 d = app.direction;
  const Vec2 r = right_normal(d);
  const Vec2 entry = d * (-h) + r * w;
  const Vec2 start = entry - d * p.approach_length;
  const double heading = std::atan2(d.y, d.x);

  std::vector<Segment> segs;
  segs.push_back(Segment::line(start, entry));
  Vec2 d_out = d;
  switch (turn) {
    case Turn::straight:
      segs.push_back(Segment::line(entry, entry + d * (2.0 * h)));
      break;
    case Turn::right:
      segs.push_back(Segment::arc(entry, heading, h - w, -kPi / 2.0));
      d_out = r;
      break;
    case Turn::left:
      segs.push_back(Segment::arc(entry, heading, h + w, kPi / 2.0));
      d_out = r * -1.0;
      break;
  }
  const Vec2 exit_pt = segs.back().end();
  segs.push_back(Segment::line(exit_pt, exit_pt + d_out * p.exit_length));

  PathInfo info;
  info.id = id;
  info.origin = app.id;
  info.turn = turn;
  info.exit_road = road_towards(d_out);
  info.curve = Curve(std::move(segs));
  info.region_begin = p.approach_length;
  info.region_end = p.approach_length + info.curve.segments()[1].length;
  info.stop_s = info.region_begin - p.stop_setback;
  info.approach_limit = app.speed_limit;
  info.region_limit = turn == Turn::straight ? app.speed_limit : p.turn_limit;
  return info;
}

}  // namespace

IntersectionLayout::IntersectionLayout(LayoutParams params,
                                       std::array<RoadClass, 4> road_classes)
    : params_(params) {
  if (params_.approach_limit <= 0.0 || params_.turn_limit <= 0.0) {
    throw std::invalid_argument("speed limits must be positive");
  }
  for (Approach a : kApproaches) {
    auto& info = approaches_[static_cast<std::size_t>(a)];
    info.id = a;
    info.road = road_classes[static_cast<std::size_t>(a)];
    info.direction = travel_direction(a);
    info.speed_limit = params_.approach_limit;
  }
  for (Approach a : kApproaches) {
    for (Turn t : kTurns) {
      paths_.push_back(make_path(params_, approach(a), t, path_id(a, t)));
    }
  }

  const std::size_t n = paths_.size();
  relation_.assign(n * n, PathRelation::disjoint);
  conflicts_.assign(n * n, {});
  std::vector<Curve::Polyline> inner;
  inner.reserve(n);
  for (const auto& p : paths_) {
    inner.push_back(p.curve.sample(params_.sample_spacing, p.region_begin, p.region_end));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const PathInfo& a = paths_[i];
      const PathInfo& b = paths_[j];
      auto& rel = relation_[i * n + j];
      auto& cps = conflicts_[i * n + j];
      if (a.origin == b.origin) {
        rel = PathRelation::same_lane;
      } else if (a.exit_road == b.exit_road) {
        rel = PathRelation::same_lane;
        ConflictPoint cp;
        cp.position = a.curve.pose_at(a.region_end).position;
        cp.s_a = a.region_end;
        cp.s_b = b.region_end;
        cp.merge = true;
        cps.push_back(cp);
      } else {
        for (const auto& hit : intersect_polylines(inner[i], inner[j])) {
          cps.push_back({hit.point, hit.s_a, hit.s_b, false});
        }
        if (cps.empty() && j < i) {
          for (const auto& m : conflicts_[j * n + i]) cps.push_back({m.position, m.s_b, m.s_a, false});
        } else if (cps.empty()) {
          // centerlines that pass closer than a vehicle body allows
          const auto& pa = inner[i];
          const auto& pb = inner[j];
          double best = params_.pass_clearance;
          for (std::size_t u = 0; u < pa.points.size(); ++u) {
            for (std::size_t w = 0; w < pb.points.size(); ++w) {
              const double d = (pa.points[u] - pb.points[w]).norm();
              if (d >= best) continue;
              best = d;
              ConflictPoint cp;
              cp.position = (pa.points[u] + pb.points[w]) * 0.5;
              cp.s_a = pa.arc_length[u];
              cp.s_b = pb.arc_length[w];
              cps.assign(1, cp);
            }
          }
        }
        rel = cps.empty() ? PathRelation::disjoint : PathRelation::crossing;
      }
    }
  }
}

PathRelation IntersectionLayout::relation(PathId a, PathId b) const {
  if (a == b) return PathRelation::same_lane;
  return relation_.at(static_cast<std::size_t>(a) * paths_.size() +
                      static_cast<std::size_t>(b));
}

const std::vector<ConflictPoint>& IntersectionLayout::conflicts(PathId a,
                                                              PathId b) const {
  static const std::vector<ConflictPoint> none;
  if (a == b) return none;
  return conflicts_.at(static_cast<std::size_t>(a) * paths_.size() +
                       static_cast<std::size_t>(b));
}

std::array<Vec2, 4> IntersectionLayout::region_polygon() const {
  const double h = params_.box_half_size;
  return {Vec2{-h, -h}, Vec2{h, -h}, Vec2{h, h}, Vec2{-h, h}};
}

bool IntersectionLayout::in_region(Vec2 p) const {
  const double h = params_.box_half_size;
  return std::abs(p.x) <= h && std::abs(p.y) <= h;
}

int priority_rank(const IntersectionLayout& layout, PathId id) {
  const PathInfo& path = layout.path(id);
  const bool major = layout.approach(path.origin).road == RoadClass::major;
  const bool left = path.turn == Turn::left;
  if (major) return left ? 2 : 3;
  return left ? 0 : 1;
}

IntersectionLayout build_default_layout(const LayoutParams& params) {
  return IntersectionLayout(params, {RoadClass::minor, RoadClass::major,
                                     RoadClass::minor, RoadClass::major});
}

}  // namespace aim
