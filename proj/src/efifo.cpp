#include "aim/efifo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aim {

void EfifoParams::validate() const {
  idm.validate();
  if (!(margin >= 0.0 && clearance >= 0.0 && go_accel > 0.0)) {
    throw std::invalid_argument("eFIFO parameters out of range");
  }
}

EfifoParams load_efifo_params(const Config& cfg) {
  EfifoParams p;
  p.margin = cfg.get("efifo.margin", p.margin);
  p.clearance = cfg.get("efifo.clearance", p.clearance);
  p.go_accel = cfg.get("efifo.go_accel", p.go_accel);
  p.validate();
  return p;
}

void store_efifo_params(const EfifoParams& p, Config& cfg) {
  cfg.set("efifo.margin", format_double(p.margin));
  cfg.set("efifo.clearance", format_double(p.clearance));
  cfg.set("efifo.go_accel", format_double(p.go_accel));
}

namespace {

constexpr double kWaitingSpeed = 0.5;     // m/s
constexpr double kWaitingDistance = 1.0;  // m before the stop position

struct Occupancy {
  double enter = 0.0;
  double leave = 0.0;
};

// Early entry under a start-up at go_accel and late exit at half of it.
Occupancy occupancy(const VehicleState& veh, double cp_s, double zone,
                    const IntersectionLayout& layout, const EfifoParams& p) {
  const PathInfo& path = layout.path(veh.path_id);
  Occupancy o;
  o.enter = time_to_cover(cp_s - zone - veh.s, veh.v, p.go_accel, path.approach_limit);
  o.leave = time_to_cover(cp_s + zone - veh.s, veh.v, 0.5 * p.go_accel,
                          std::min(path.approach_limit, path.region_limit));
  return o;
}

double zone_for(const ConflictPoint& cp, const VehicleState& a, const VehicleState& b,
                const EfifoParams& p) {
  if (cp.merge) return (a.length + b.length) / 2.0 + p.idm.s0;
  return (std::max(a.length, b.length) + std::max(a.width, b.width)) / 2.0 + p.clearance;
}

bool overlaps(const Occupancy& a, const Occupancy& b, double margin) {
  return a.enter - margin < b.leave && b.enter < a.leave + margin;
}

// True if `ego` on its path and `other` on `other_path` are predicted to
// share a conflict point within the margin. Points already cleared by either
// vehicle are ignored.
bool conflicting(const VehicleState& ego, const VehicleState& other, PathId other_path,
                 const IntersectionLayout& layout, const EfifoParams& p,
                 std::vector<Reservation>* reserve) {
  VehicleState o = other;
  o.path_id = other_path;
  bool hit = false;
  for (const auto& cp : layout.conflicts(ego.path_id, other_path)) {
    const double zone = zone_for(cp, ego, o, p);
    if (ego.s > cp.s_a + zone || o.s > cp.s_b + zone) continue;
    const Occupancy oe = occupancy(ego, cp.s_a, zone, layout, p);
    const Occupancy oo = occupancy(o, cp.s_b, zone, layout, p);
    if (overlaps(oe, oo, p.margin)) hit = true;
    if (reserve) reserve->push_back({ego.id, ego.path_id, cp.position, oe.enter, oe.leave});
  }
  return hit;
}

// Maneuvers a hidden-intention MV may perform. An MV standing at its stop
// position is yielding to someone, so maneuvers under which it would have
// right of way over everything in sight are dropped unless none remain.
std::vector<PathId> candidate_paths(const VehicleState& mv, std::span<const VehicleState> observation,
                                    const IntersectionLayout& layout, const EfifoParams& p) {
  if (mv.intention_observable) return {mv.path_id};
  const PathInfo& path = layout.path(mv.path_id);
  std::vector<PathId> all;
  for (Turn t : kTurns) all.push_back(layout.path_id(path.origin, t));
  const bool waiting = mv.v < kWaitingSpeed && path.stop_s - mv.s < kWaitingDistance;
  if (!waiting) return all;

  DriverParams d;
  d.eidm.idm = p.idm;
  d.go_accel = p.go_accel;
  d.clearance = p.clearance;
  const double generous = d.gap_margin + 2.0 * d.eidm.gap_margin_std;
  std::vector<PathId> consistent;
  for (PathId c : all) {
    VehicleState m = mv;
    m.path_id = c;
    if (yield_check(m, observation, layout, d, generous).must_yield) consistent.push_back(c);
  }
  return consistent.empty() ? all : consistent;
}

}  // namespace

EfifoPlan plan(std::span<const VehicleState> observation, const IntersectionLayout& layout,
               const EfifoParams& params) {
  EfifoPlan out;
  std::vector<const VehicleState*> avs;
  for (const auto& v : observation) {
    if (v.is_av()) avs.push_back(&v);
  }
  auto key = [&](const VehicleState* v) {
    return std::tuple(!is_committed(*v, layout, params.idm), layout.path(v->path_id).stop_s - v->s,
                      v->id);
  };
  std::sort(avs.begin(), avs.end(), [&](auto* a, auto* b) { return key(a) < key(b); });

  DriverParams follow;
  follow.mode = DriverMode::idm;
  follow.eidm.idm = params.idm;

  std::vector<const VehicleState*> granted;
  std::vector<Approach> held_lanes;
  for (const VehicleState* av : avs) {
    out.state.queue.push_back(av->id);
    const Approach lane = layout.path(av->path_id).origin;
    bool ok = is_committed(*av, layout, params.idm);
    if (!ok) {
      // no grant past a held AV or a standing queue in the own lane
      ok = std::find(held_lanes.begin(), held_lanes.end(), lane) == held_lanes.end() &&
           !queued_behind_stopped(*av, observation, layout, params.idm);
    }
    if (ok && !is_committed(*av, layout, params.idm)) {
      for (const VehicleState* g : granted) {
        if (conflicting(*av, *g, g->path_id, layout, params, nullptr)) {
          ok = false;
          break;
        }
      }
    }
    if (ok && !is_committed(*av, layout, params.idm)) {
      for (const auto& mv : observation) {
        if (mv.is_av()) continue;
        const std::vector<PathId> candidates = candidate_paths(mv, observation, layout, params);
        for (PathId cand : candidates) {
          VehicleState m = mv;
          m.path_id = cand;
          if (!has_precedence(m, *av, layout, params.idm)) continue;
          if (queued_behind_stopped(m, observation, layout, params.idm)) continue;
          if (conflicting(*av, m, cand, layout, params, nullptr)) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    }
    out.state.granted[av->id] = ok;
    double accel = car_following_acceleration(*av, observation, layout, follow, nullptr);
    if (ok) {
      granted.push_back(av);
      for (const VehicleState* g : granted) {
        if (g != av) conflicting(*av, *g, g->path_id, layout, params, &out.state.reservations);
      }
    } else {
      held_lanes.push_back(lane);
      accel = std::min(accel, stop_at_line_acceleration(*av, layout, params.idm));
    }
    out.commands[av->id] = accel;
  }
  return out;
}

}  // namespace aim
