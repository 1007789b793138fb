#include <gtest/gtest.h>

#include <vector>

#include "aim/reward.hpp"

namespace aim {
namespace {

const IntersectionLayout& layout() {
  static const IntersectionLayout l = build_default_layout();
  return l;
}

VehicleState make_vehicle(VehicleId id, PathId path, double s, double v,
                          VehicleKind kind = VehicleKind::av) {
  VehicleState veh;
  veh.id = id;
  veh.path_id = path;
  veh.kind = kind;
  veh.v = v;
  place_on_path(veh, layout(), s);
  return veh;
}

const PathId kEastStraight = 4;
const PathId kNorthStraight = 1;

TEST(Reward, VelocityAllAtLimit) {
  WorldState w;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, 50.0, 13.89));
  w.vehicles.push_back(make_vehicle(2, kNorthStraight, 80.0, 20.0, VehicleKind::mv));
  EXPECT_DOUBLE_EQ(velocity_reward(w, layout()), 1.0);
}

TEST(Reward, VelocityAllStopped) {
  WorldState w;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, 50.0, 0.0));
  EXPECT_EQ(velocity_reward(w, layout()), 0.0);
  EXPECT_EQ(velocity_reward(WorldState{}, layout()), 0.0);
}

TEST(Reward, VelocityEqualWeighting) {
  WorldState w;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, 50.0, 13.89));
  w.vehicles.push_back(make_vehicle(2, kNorthStraight, 50.0, 0.0, VehicleKind::mv));
  EXPECT_DOUBLE_EQ(velocity_reward(w, layout()), 0.5);
}

TEST(Reward, ActionPenalty) {
  EXPECT_EQ(action_penalty(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_EQ(action_penalty(std::vector<double>{1.0, -1.0}), -1.0);
  EXPECT_EQ(action_penalty(std::vector<double>{}), 0.0);
}

TEST(Reward, ReluctanceLeadStopped) {
  WorldState w;
  const double stop = layout().path(kEastStraight).stop_s;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, stop - 30.0, 0.0));
  EXPECT_DOUBLE_EQ(reluctance_penalty(w, layout(), 1.0), -30.0);
}

TEST(Reward, ReluctanceAboveThreshold) {
  WorldState w;
  const double stop = layout().path(kEastStraight).stop_s;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, stop - 30.0, 1.5));
  EXPECT_EQ(reluctance_penalty(w, layout(), 1.0), 0.0);
}

TEST(Reward, ReluctanceWithLeader) {
  WorldState w;
  const double stop = layout().path(kEastStraight).stop_s;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, stop - 30.0, 0.0));
  w.vehicles.push_back(make_vehicle(2, kEastStraight - 1, stop - 20.0, 0.0, VehicleKind::mv));
  // the follower has a leader; the leader itself is an MV
  EXPECT_EQ(reluctance_penalty(w, layout(), 1.0), 0.0);
}

TEST(Reward, ReluctanceTakesWorstLeader) {
  WorldState w;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, layout().path(kEastStraight).stop_s - 12.0, 0.2));
  w.vehicles.push_back(make_vehicle(2, kNorthStraight, layout().path(kNorthStraight).stop_s - 40.0, 0.0));
  EXPECT_DOUBLE_EQ(reluctance_penalty(w, layout(), 1.0), -40.0);
}

TEST(Reward, FreeFlowHasNoPenalties) {
  WorldState w;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, 40.0, 13.0));
  w.vehicles.push_back(make_vehicle(2, kNorthStraight, 60.0, 12.0));
  const auto ipc = idle_proximity_collision(w, layout(), RewardWeights{});
  EXPECT_EQ(ipc.idle, 0.0);
  EXPECT_EQ(ipc.proximity, 0.0);
  EXPECT_EQ(ipc.collision, 0.0);
  EXPECT_EQ(reluctance_penalty(w, layout(), 1.0), 0.0);
}

TEST(Reward, CollisionStep) {
  WorldState w;
  w.collision_flag = true;
  EXPECT_EQ(idle_proximity_collision(w, layout(), RewardWeights{}).collision, -1.0);
}

TEST(Reward, ProximityHalfSafeGap) {
  RewardWeights weights;
  WorldState w;
  const double gap = weights.g_safe / 2.0;
  const double len = 4.5;
  w.vehicles.push_back(make_vehicle(1, kEastStraight, 60.0, 5.0));
  w.vehicles.push_back(make_vehicle(2, kEastStraight, 60.0 - len - gap, 5.0));
  EXPECT_NEAR(idle_proximity_collision(w, layout(), weights).proximity, -0.5, 1e-12);
}

TEST(Reward, IdleAfterWindow) {
  WorldState w;
  auto a = make_vehicle(1, kEastStraight, 60.0, 0.0);
  a.stopped_time = 6.0;
  auto b = make_vehicle(2, kNorthStraight, 60.0, 0.0);
  b.stopped_time = 4.0;
  w.vehicles = {a, b};
  EXPECT_DOUBLE_EQ(idle_proximity_collision(w, layout(), RewardWeights{}).idle, -0.5);
}

WorldState busy_world() {
  WorldState w;
  auto a = make_vehicle(1, kEastStraight, layout().path(kEastStraight).stop_s - 25.0, 0.0);
  a.stopped_time = 7.0;
  w.vehicles.push_back(a);
  w.vehicles.push_back(make_vehicle(2, kEastStraight, a.s - 7.0, 0.5));
  w.vehicles.push_back(make_vehicle(3, kNorthStraight, 70.0, 9.0, VehicleKind::mv));
  w.collision_flag = true;
  return w;
}

TEST(Reward, TotalIsWeightedSum) {
  const auto w = busy_world();
  const std::vector<double> act{0.4, -0.8};
  RewardWeights weights;
  const auto r = total_reward(w, layout(), act, weights);
  EXPECT_EQ(r.total, weights.velocity * r.velocity + weights.action * r.action +
                         weights.idle * r.idle + weights.proximity * r.proximity +
                         weights.collision * r.collision + weights.reluctance * r.reluctance);
  EXPECT_NE(r.proximity, 0.0);
  EXPECT_NE(r.reluctance, 0.0);
}

TEST(Reward, ZeroAndSingleComponent) {
  RewardWeights zero{0, 0, 0, 0, 0, 0};
  const auto w = busy_world();
  EXPECT_EQ(total_reward(w, layout(), std::vector<double>{0.5}, zero).total, 0.0);
  RewardWeights only_col = zero;
  only_col.collision = 10.0;
  EXPECT_EQ(total_reward(w, layout(), std::vector<double>{0.5}, only_col).total, -10.0);
}

TEST(Reward, LinearInWeights) {
  const auto w = busy_world();
  const std::vector<double> act{0.3, 0.9};
  RewardWeights base;
  RewardWeights doubled = base;
  doubled.reluctance *= 2.0;
  const auto r1 = total_reward(w, layout(), act, base);
  const auto r2 = total_reward(w, layout(), act, doubled);
  EXPECT_DOUBLE_EQ(r2.total - r1.total, base.reluctance * r1.reluctance);
}

TEST(Reward, BoundedPerStep) {
  const RewardWeights weights;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double delta_max = layout().path(0).stop_s;
  for (int k = 0; k < 500; ++k) {
    WorldState w;
    const int n = 1 + k % 8;
    std::vector<double> act;
    for (int i = 0; i < n; ++i) {
      const auto kind = u(rng) < 0.6 ? VehicleKind::av : VehicleKind::mv;
      auto v = make_vehicle(static_cast<VehicleId>(i + 1), static_cast<PathId>(i % 12),
                            u(rng) * 150.0, u(rng) * 15.0, kind);
      v.stopped_time = u(rng) * 10.0;
      w.vehicles.push_back(v);
      if (kind == VehicleKind::av) act.push_back(2.0 * u(rng) - 1.0);
    }
    w.collision_flag = u(rng) < 0.3;
    const auto r = total_reward(w, layout(), act, weights);
    EXPECT_LE(r.total, weights.velocity);
    EXPECT_GE(r.total, -(weights.collision + weights.action + weights.idle + weights.proximity +
                         weights.reluctance * delta_max));
  }
}

TEST(Reward, WeightValidation) {
  RewardWeights w;
  w.idle = -1.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  Config cfg;
  store_reward_weights(RewardWeights{}, cfg);
  const auto back = load_reward_weights(cfg);
  EXPECT_EQ(back.reluctance, 0.01);
  EXPECT_EQ(back.v_stop, 1.0);
}

}  // namespace
}  // namespace aim
