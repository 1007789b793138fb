#pragma once

#include <span>

#include "aim/config.hpp"
#include "aim/world.hpp"

namespace aim {

struct RewardWeights {
  double velocity = 1.0;
  double action = 0.1;
  double idle = 0.5;
  double proximity = 0.5;
  double collision = 10.0;
  double reluctance = 0.01;
  double v_stop = 1.0;       // m/s, reluctance threshold
  double idle_window = 5.0;  // s of continuous standstill before idling counts
  double g_safe = 6.0;       // m, proximity ramp length

  void validate() const;
};

RewardWeights load_reward_weights(const Config& cfg);
void store_reward_weights(const RewardWeights& w, Config& cfg);

struct RewardBreakdown {
  double velocity = 0.0;
  double action = 0.0;
  double idle = 0.0;
  double proximity = 0.0;
  double collision = 0.0;
  double reluctance = 0.0;
  double total = 0.0;
};

/// Mean of v / v_lim(s) over all vehicles, each clamped to [0, 1].
double velocity_reward(const WorldState& world, const IntersectionLayout& layout);

/// -||a||_1 / (number of AVs) on the normalized joint action.
double action_penalty(std::span<const double> joint_action);

/// -max over leading AVs before their stop position that drive slower than
/// v_stop of the distance to the stop position.
double reluctance_penalty(const WorldState& world, const IntersectionLayout& layout,
                          double v_stop);

struct IdleProximityCollision {
  double idle = 0.0;
  double proximity = 0.0;
  double collision = 0.0;
};

/// idle: -(AVs standing longer than the idle window) / AV count;
/// proximity: -mean over AVs following an AV of max(0, 1 - gap/g_safe);
/// collision: -1 if the transition produced an overlap.
IdleProximityCollision idle_proximity_collision(const WorldState& world,
                                                const IntersectionLayout& layout,
                                                const RewardWeights& w);

/// Reward of the transition that produced `world` under `joint_action`.
RewardBreakdown total_reward(const WorldState& world, const IntersectionLayout& layout,
                             std::span<const double> joint_action, const RewardWeights& w);

}  // namespace aim
