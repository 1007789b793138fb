#include "aim/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aim {

void RewardWeights::validate() const {
  for (double x : {velocity, action, idle, proximity, collision, reluctance}) {
    if (!(x >= 0.0)) throw std::invalid_argument("reward weights must be non-negative");
  }
  if (!(v_stop >= 0.0 && idle_window >= 0.0 && g_safe > 0.0)) {
    throw std::invalid_argument("reward thresholds out of range");
  }
}

RewardWeights load_reward_weights(const Config& cfg) {
  RewardWeights w;
  w.velocity = cfg.get("reward.w_velocity", w.velocity);
  w.action = cfg.get("reward.w_action", w.action);
  w.idle = cfg.get("reward.w_idle", w.idle);
  w.proximity = cfg.get("reward.w_proximity", w.proximity);
  w.collision = cfg.get("reward.w_collision", w.collision);
  w.reluctance = cfg.get("reward.w_reluctance", w.reluctance);
  w.v_stop = cfg.get("reward.v_stop", w.v_stop);
  w.idle_window = cfg.get("reward.idle_window", w.idle_window);
  w.g_safe = cfg.get("reward.g_safe", w.g_safe);
  w.validate();
  return w;
}

void store_reward_weights(const RewardWeights& w, Config& cfg) {
  cfg.set("reward.w_velocity", format_double(w.velocity));
  cfg.set("reward.w_action", format_double(w.action));
  cfg.set("reward.w_idle", format_double(w.idle));
  cfg.set("reward.w_proximity", format_double(w.proximity));
  cfg.set("reward.w_collision", format_double(w.collision));
  cfg.set("reward.w_reluctance", format_double(w.reluctance));
  cfg.set("reward.v_stop", format_double(w.v_stop));
  cfg.set("reward.idle_window", format_double(w.idle_window));
  cfg.set("reward.g_safe", format_double(w.g_safe));
}

double velocity_reward(const WorldState& world, const IntersectionLayout& layout) {
  if (world.vehicles.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : world.vehicles) {
    const double lim = layout.path(v.path_id).speed_limit_at(v.s);
    acc += std::clamp(v.v / lim, 0.0, 1.0);
  }
  return acc / static_cast<double>(world.vehicles.size());
}

double action_penalty(std::span<const double> joint_action) {
  if (joint_action.empty()) return 0.0;
  double l1 = 0.0;
  for (double a : joint_action) l1 += std::abs(a);
  return -l1 / static_cast<double>(joint_action.size());
}

double reluctance_penalty(const WorldState& world, const IntersectionLayout& layout,
                          double v_stop) {
  double worst = 0.0;
  for (const auto& ego : world.vehicles) {
    if (!ego.is_av() || !(ego.v < v_stop)) continue;
    const PathInfo& path = layout.path(ego.path_id);
    const double delta = path.stop_s - ego.s;
    if (delta <= 0.0) continue;
    bool leads = true;
    for (const auto& o : world.vehicles) {
      if (o.id == ego.id) continue;
      const PathInfo& op = layout.path(o.path_id);
      if (op.origin == path.origin && o.s > ego.s && o.s < op.region_begin) {
        leads = false;
        break;
      }
    }
    if (leads) worst = std::max(worst, delta);
  }
  return worst > 0.0 ? -worst : 0.0;
}

IdleProximityCollision idle_proximity_collision(const WorldState& world,
                                                const IntersectionLayout& layout,
                                                const RewardWeights& w) {
  IdleProximityCollision out;
  std::size_t avs = 0;
  std::size_t idle = 0;
  std::size_t followers = 0;
  for (const auto& v : world.vehicles) {
    if (!v.is_av()) continue;
    ++avs;
    if (v.stopped_time > w.idle_window) ++idle;
    if (auto leader = find_leader(v, world.vehicles, layout); leader && leader->vehicle->is_av()) {
      out.proximity -= std::max(0.0, 1.0 - leader->gap / w.g_safe);
      ++followers;
    }
  }
  if (avs > 0) out.idle = -static_cast<double>(idle) / static_cast<double>(avs);
  if (followers > 0) out.proximity /= static_cast<double>(followers);
  out.collision = world.collision_flag ? -1.0 : 0.0;
  return out;
}

RewardBreakdown total_reward(const WorldState& world, const IntersectionLayout& layout,
                             std::span<const double> joint_action, const RewardWeights& w) {
  RewardBreakdown r;
  r.velocity = velocity_reward(world, layout);
  r.action = action_penalty(joint_action);
  const auto ipc = idle_proximity_collision(world, layout, w);
  r.idle = ipc.idle;
  r.proximity = ipc.proximity;
  r.collision = ipc.collision;
  r.reluctance = reluctance_penalty(world, layout, w.v_stop);
  r.total = w.velocity * r.velocity + w.action * r.action + w.idle * r.idle +
            w.proximity * r.proximity + w.collision * r.collision + w.reluctance * r.reluctance;
  return r;
}

}  // namespace aim
