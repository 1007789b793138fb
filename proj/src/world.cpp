#include "aim/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aim {

void place_on_path(VehicleState& veh, const IntersectionLayout& layout, double s) {
  const PathInfo& path = layout.path(veh.path_id);
  const Pose pose = path.curve.pose_at(s);
  veh.s = s;
  veh.x = pose.position.x;
  veh.y = pose.position.y;
  veh.heading = pose.heading;
}

const VehicleState* WorldState::find(VehicleId id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

RoadClass origin_road(const VehicleState& veh, const IntersectionLayout& layout) {
  return layout.approach(layout.path(veh.path_id).origin).road;
}

std::optional<double> route_position(const VehicleState& other, PathId ego_path,
                                     const IntersectionLayout& layout) {
  const PathInfo& ego = layout.path(ego_path);
  const PathInfo& path = layout.path(other.path_id);
  if (other.path_id == ego_path) return other.s;
  if (other.s < path.region_end) {
    // entry lane, or the first part of a diverging path from the same lane
    if (path.origin == ego.origin) return other.s;
    return std::nullopt;
  }
  if (path.exit_road == ego.exit_road) return ego.region_end + (other.s - path.region_end);
  return std::nullopt;
}

std::optional<Leader> find_leader(const VehicleState& ego,
                                  std::span<const VehicleState> vehicles,
                                  const IntersectionLayout& layout) {
  std::optional<Leader> best;
  double best_pos = 0.0;
  for (const auto& other : vehicles) {
    if (other.id == ego.id) continue;
    auto pos = route_position(other, ego.path_id, layout);
    if (!pos || *pos <= ego.s) continue;
    if (!best || *pos < best_pos) {
      best_pos = *pos;
      best = Leader{&other, *pos - ego.s - (ego.length + other.length) / 2.0};
    }
  }
  return best;
}

std::vector<std::pair<VehicleId, VehicleId>> overlapping_pairs(
    std::span<const VehicleState> vehicles) {
  std::vector<std::pair<VehicleId, VehicleId>> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& a = vehicles[i];
    for (std::size_t j = i + 1; j < vehicles.size(); ++j) {
      const auto& b = vehicles[j];
      // cheap reject before the separating-axis test
      const double reach = (a.length + b.length) / 2.0 + (a.width + b.width) / 2.0;
      if (std::abs(a.x - b.x) > reach || std::abs(a.y - b.y) > reach) continue;
      if (boxes_overlap(a.footprint(), b.footprint())) out.emplace_back(a.id, b.id);
    }
  }
  return out;
}

namespace {

double pure_pursuit_steering(const VehicleState& veh, const PathInfo& path,
                             const VehicleLimits& limits) {
  const Pose target = path.curve.pose_at(veh.s + limits.lookahead);
  const Vec2 rel = target.position - veh.position();
  const double ld = rel.norm();
  if (ld < 1e-9) return 0.0;
  const double alpha = wrap_angle(std::atan2(rel.y, rel.x) - veh.heading);
  return std::atan2(2.0 * limits.wheelbase * std::sin(alpha), ld);
}

}  // namespace

WorldState step(const WorldState& world, const IntersectionLayout& layout,
                const AccelerationMap& commands, double dt,
                const ManualDriver& manual, const StepOptions& options) {
  if (!(dt > 0.0)) throw InputError("step: dt must be positive");
  for (const auto& [id, accel] : commands) {
    const VehicleState* veh = world.find(id);
    if (!veh) throw InputError("step: unknown vehicle id " + std::to_string(id));
    if (!veh->is_av()) {
      throw InputError("step: vehicle " + std::to_string(id) +
                       " is manually driven and cannot be commanded");
    }
    if (!std::isfinite(accel)) throw InputError("step: non-finite acceleration command");
  }

  const VehicleLimits& lim = options.limits;
  std::vector<double> accel(world.vehicles.size(), 0.0);
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& veh = world.vehicles[i];
    if (veh.is_av()) {
      auto it = commands.find(veh.id);
      if (it == commands.end()) {
        throw InputError("step: missing command for AV " + std::to_string(veh.id));
      }
      accel[i] = it->second;
    } else {
      accel[i] = manual ? manual(veh) : 0.0;
    }
    accel[i] = std::clamp(accel[i], lim.min_accel, lim.max_accel);
  }

  WorldState next = world;
  next.time = world.time + dt;
  next.collision_flag = false;
  next.collided.clear();
  next.vehicles.clear();
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    VehicleState veh = world.vehicles[i];
    const PathInfo& path = layout.path(veh.path_id);
    const double a = accel[i];
    double v_next = veh.v + a * dt;
    double ds = 0.0;
    if (v_next < 0.0) {
      // stops within the step
      ds = a < 0.0 ? veh.v * veh.v / (-2.0 * a) : 0.0;
      v_next = 0.0;
    } else {
      ds = 0.5 * (veh.v + v_next) * dt;
    }
    veh.a_meas = (v_next - veh.v) / dt;
    veh.v = v_next;
    place_on_path(veh, layout, veh.s + ds);
    veh.steering = pure_pursuit_steering(veh, path, lim);
    veh.stopped_time = veh.v < lim.stopped_speed ? veh.stopped_time + dt : 0.0;
    if (veh.s >= path.length()) {
      ++next.completed;
      next.completions.push_back({veh.id, next.time, veh.spawn_time, veh.kind, veh.path_id});
      continue;
    }
    next.vehicles.push_back(veh);
  }

  const auto pairs = overlapping_pairs(next.vehicles);
  if (!pairs.empty()) {
    next.collision_flag = true;
    next.collision_events += pairs.size();
    for (const auto& [a, b] : pairs) {
      for (VehicleId id : {a, b}) {
        if (std::find(next.collided.begin(), next.collided.end(), id) == next.collided.end()) {
          next.collided.push_back(id);
        }
      }
    }
    if (options.remove_collided) {
      std::erase_if(next.vehicles, [&](const VehicleState& v) {
        return std::find(next.collided.begin(), next.collided.end(), v.id) !=
               next.collided.end();
      });
      next.removed_by_collision += next.collided.size();
    }
  }
  return update_intention_observability(next, layout);
}

bool intention_threshold_passed(const VehicleState& veh, const IntersectionLayout& layout) {
  const PathInfo& path = layout.path(veh.path_id);
  const double traversed = veh.s - path.region_begin;
  return traversed > 0.25 * path.region_length();
}

WorldState update_intention_observability(const WorldState& world,
                                          const IntersectionLayout& layout) {
  WorldState next = world;
  for (auto& veh : next.vehicles) {
    if (!veh.intention_observable && intention_threshold_passed(veh, layout)) {
      veh.intention_observable = true;
    }
  }
  return next;
}

WorldState spawn(const WorldState& world, const IntersectionLayout& layout,
                 const ScenarioConfig& config, Rng& rng) {
  WorldState next = world;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (Approach app : kApproaches) {
    const auto ai = static_cast<std::size_t>(app);
    const double u_arrival = uni(rng);
    const double u_kind = uni(rng);
    const double u_turn = uni(rng);
    const double rate = config.demand[ai];
    if (rate <= 0.0) continue;
    if (u_arrival >= 1.0 - std::exp(-rate * config.step_dt)) continue;

    const auto& probs = config.turn_distribution[ai];
    Turn turn = Turn::right;
    double acc = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      acc += probs[t];
      if (u_turn < acc) {
        turn = kTurns[t];
        break;
      }
    }

    VehicleState veh;
    veh.path_id = layout.path_id(app, turn);
    veh.turn = turn;
    veh.kind = u_kind < config.automation_level ? VehicleKind::av : VehicleKind::mv;
    veh.intention_observable = veh.kind == VehicleKind::av;
    veh.spawn_time = next.time;
    place_on_path(veh, layout, 0.0);

    // nearest vehicle already on this entry lane
    // probe just behind the entry so that a vehicle standing at s = 0 counts
    VehicleState probe = veh;
    probe.s = -1e-6;
    std::optional<Leader> leader = find_leader(probe, next.vehicles, layout);
    const PathInfo& path = layout.path(veh.path_id);
    double speed = path.approach_limit;
    if (leader) {
      if (leader->gap < config.min_spawn_gap) {
        ++next.suppressed_spawns;
        continue;
      }
      // enter no faster than allows stopping behind a braking leader
      const double b = 3.0;
      const double room = std::max(0.0, leader->gap - 2.0);
      speed = std::min(speed, std::sqrt(leader->vehicle->v * leader->vehicle->v + 2.0 * b * room));
    }
    veh.v = speed;
    veh.id = next.next_id++;
    ++next.spawned;
    next.vehicles.push_back(veh);
  }
  return next;
}

}  // namespace aim
