#include "aim/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>

namespace aim {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Segment Segment::line(Vec2 from, Vec2 to) {
  Segment seg;
  seg.kind = Kind::line;
  seg.start = from;
  Vec2 d = to - from;
  seg.length = d.norm();
  seg.start_heading = std::atan2(d.y, d.x);
  return seg;
}

Segment Segment::arc(Vec2 from, double heading, double radius, double sweep) {
  if (radius <= 0.0) throw std::invalid_argument("arc radius must be positive");
  Segment seg;
  seg.kind = Kind::arc;
  seg.start = from;
  seg.start_heading = heading;
  seg.length = radius * std::abs(sweep);
  seg.curvature = (sweep >= 0.0 ? 1.0 : -1.0) / radius;
  return seg;
}

Pose Segment::pose_at(double u) const {
  u = std::clamp(u, 0.0, length);
  Pose p;
  p.curvature = curvature;
  if (kind == Kind::line) {
    p.position = start + Vec2{std::cos(start_heading), std::sin(start_heading)} * u;
    p.heading = start_heading;
    return p;
  }
  const double r = 1.0 / curvature;  // signed
  const double th = start_heading + curvature * u;
  // centre lies on the left normal for positive curvature
  Vec2 centre = start + Vec2{-std::sin(start_heading), std::cos(start_heading)} * r;
  p.position = centre + Vec2{std::sin(th), -std::cos(th)} * r;
  p.heading = wrap_angle(th);
  return p;
}

Curve::Curve(std::vector<Segment> segments) : segments_(std::move(segments)) {
  offsets_.reserve(segments_.size());
  for (const auto& seg : segments_) {
    offsets_.push_back(total_length_);
    total_length_ += seg.length;
  }
}

Pose Curve::pose_at(double s) const {
  if (segments_.empty()) return {};
  s = std::clamp(s, 0.0, total_length_);
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), s);
  std::size_t idx = static_cast<std::size_t>(std::distance(offsets_.begin(), it));
  idx = idx == 0 ? 0 : idx - 1;
  return segments_[idx].pose_at(s - offsets_[idx]);
}

Curve::Polyline Curve::sample(double spacing, double from, double to) const {
  if (to < 0.0) to = total_length_;
  Polyline out;
  std::vector<double> knots{from};
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const double a = offsets_[i];
    const double b = a + segments_[i].length;
    if (b <= from || a >= to) continue;
    const double lo = std::max(a, from);
    const double hi = std::min(b, to);
    if (segments_[i].kind == Segment::Kind::arc) {
      const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / spacing)));
      for (int k = 1; k <= n; ++k) knots.push_back(lo + (hi - lo) * k / n);
    } else {
      knots.push_back(hi);
    }
  }
  for (double s : knots) {
    if (!out.arc_length.empty() && s - out.arc_length.back() < 1e-12) continue;
    out.arc_length.push_back(s);
    out.points.push_back(pose_at(s).position);
  }
  return out;
}

double Curve::project(Vec2 p) const {
  double best_s = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& seg = segments_[i];
    double u = 0.0;
    if (seg.kind == Segment::Kind::line) {
      Vec2 dir{std::cos(seg.start_heading), std::sin(seg.start_heading)};
      u = std::clamp((p - seg.start).dot(dir), 0.0, seg.length);
    } else {
      const double r = 1.0 / seg.curvature;
      Vec2 centre = seg.start + Vec2{-std::sin(seg.start_heading),
                                     std::cos(seg.start_heading)} * r;
      Vec2 rel = p - centre;
      // angle of the radius vector, converted to the heading convention
      double th = std::atan2(rel.y, rel.x) + (seg.curvature > 0 ? kPi / 2 : -kPi / 2);
      double du = wrap_angle(th - seg.start_heading) / seg.curvature;
      const double sweep = seg.length;
      if (du < 0.0 || du > sweep) {
        // outside the arc span: pick the nearer end
        double d0 = (seg.pose_at(0.0).position - p).norm();
        double d1 = (seg.pose_at(sweep).position - p).norm();
        du = d0 <= d1 ? 0.0 : sweep;
      }
      u = du;
    }
    const double d = (seg.pose_at(u).position - p).norm();
    if (d < best_d) {
      best_d = d;
      best_s = offsets_[i] + u;
    }
  }
  return best_s;
}

std::vector<PolylineHit> intersect_polylines(const Curve::Polyline& a,
                                             const Curve::Polyline& b,
                                             double merge_distance) {
  std::vector<PolylineHit> hits;
  for (std::size_t i = 0; i + 1 < a.points.size(); ++i) {
    const Vec2 p = a.points[i];
    const Vec2 r = a.points[i + 1] - p;
    for (std::size_t j = 0; j + 1 < b.points.size(); ++j) {
      const Vec2 q = b.points[j];
      const Vec2 s = b.points[j + 1] - q;
      const double denom = r.cross(s);
      if (std::abs(denom) < 1e-12) continue;  // parallel or collinear
      const double t = (q - p).cross(s) / denom;
      const double u = (q - p).cross(r) / denom;
      if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) continue;
      PolylineHit hit;
      hit.point = p + r * t;
      hit.s_a = a.arc_length[i] + t * (a.arc_length[i + 1] - a.arc_length[i]);
      hit.s_b = b.arc_length[j] + u * (b.arc_length[j + 1] - b.arc_length[j]);
      bool merged = false;
      for (const auto& h : hits) {
        if (std::abs(h.s_a - hit.s_a) < merge_distance &&
            std::abs(h.s_b - hit.s_b) < merge_distance) {
          merged = true;
          break;
        }
      }
      if (!merged) hits.push_back(hit);
    }
  }
  std::sort(hits.begin(), hits.end(),
            [](const PolylineHit& x, const PolylineHit& y) { return x.s_a < y.s_a; });
  return hits;
}

namespace {

std::array<Vec2, 4> corners(const OrientedBox& b) {
  const Vec2 f{std::cos(b.heading), std::sin(b.heading)};
  const Vec2 l{-f.y, f.x};
  const Vec2 df = f * b.half_length;
  const Vec2 dl = l * b.half_width;
  return {b.center + df + dl, b.center + df - dl, b.center - df - dl,
          b.center - df + dl};
}

bool separated_along(Vec2 axis, const std::array<Vec2, 4>& ca,
                     const std::array<Vec2, 4>& cb) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& c : ca) {
    const double p = c.dot(axis);
    amin = std::min(amin, p);
    amax = std::max(amax, p);
  }
  for (const auto& c : cb) {
    const double p = c.dot(axis);
    bmin = std::min(bmin, p);
    bmax = std::max(bmax, p);
  }
  return amax <= bmin || bmax <= amin;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  const std::array<Vec2, 4> axes{
      Vec2{std::cos(a.heading), std::sin(a.heading)},
      Vec2{-std::sin(a.heading), std::cos(a.heading)},
      Vec2{std::cos(b.heading), std::sin(b.heading)},
      Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const auto& axis : axes) {
    if (separated_along(axis, ca, cb)) return false;
  }
  return true;
}

}  // namespace aim
