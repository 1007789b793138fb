#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aim/driver.hpp"
#include "aim/efifo.hpp"
#include "aim/noise.hpp"
#include "aim/reward.hpp"
#include "aim/scene_graph.hpp"
#include "aim/world.hpp"

namespace aim {

namespace nn {
class Actor;
}

enum class PlannerKind { none, efifo, rl };
std::string_view to_string(PlannerKind p);
PlannerKind parse_planner(std::string_view s);

/// Everything that shapes an episode apart from the planner and the seed.
struct EnvConfig {
  ScenarioConfig scenario;
  DriverParams drivers;
  bool observation_noise = false;
  NoiseParamSet noise = default_params();
  RewardWeights reward;
  GraphParams graph;
  EfifoParams efifo;
  bool terminate_on_collision = false;  // training; evaluation removes colliders instead
};

/// Reads the `scenario`, `demand`, `turns`, `driver`, `observation`,
/// `noise`, `reward`, `graph` and `efifo` sections.
EnvConfig load_env_config(const Config& cfg, const IntersectionLayout& layout);
void store_env_config(const EnvConfig& env, Config& cfg);

/// [-1, 1] -> [-4, 3] m/s^2.
inline double denormalize_action(double u) { return -0.5 + 3.5 * u; }

/// Independent random stream `stream` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

struct VehicleRecord {
  VehicleId id = 0;
  VehicleKind kind = VehicleKind::mv;
  PathId path = 0;
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

struct StepRecord {
  double time = 0.0;
  std::vector<VehicleRecord> vehicles;  // state after the step
  RewardBreakdown reward;
  bool collision = false;
  std::size_t collision_events = 0;
  std::vector<VehicleId> completed;  // left the network during the step
  std::vector<VehicleId> collided;
};

struct EpisodeRecord {
  double dt = 0.1;
  std::vector<StepRecord> steps;
};

/// NDJSON, one object per step with keys in the order
/// t, vehicles[id, kind, path, s, v, a, x, y, psi], reward{...}, collision,
/// collision_events, completed, collided.
void write_record(std::ostream& out, const EpisodeRecord& rec);
EpisodeRecord read_record(std::istream& in, double dt);

/// One episode of the closed loop: observe, plan, drive, spawn.
class Episode {
 public:
  Episode(const IntersectionLayout& layout, EnvConfig cfg, std::uint64_t seed);

  const WorldState& world() const { return world_; }
  const std::vector<VehicleState>& observation() const { return observation_; }
  SceneGraph graph() const;
  const EnvConfig& config() const { return cfg_; }
  int steps_taken() const { return steps_; }
  bool done() const { return steps_ >= cfg_.scenario.episode_length || terminated_; }

  struct Outcome {
    RewardBreakdown reward;
    bool collision = false;
    bool terminal = false;
  };

  /// Normalized joint action in observation AV order.
  Outcome step_actions(std::span<const double> joint_action);
  /// Accelerations (m/s^2) for every AV.
  Outcome step_commands(const AccelerationMap& commands, std::span<const double> joint_action = {});

  /// Commands of a rule-based planner for the current observation.
  AccelerationMap rule_commands(PlannerKind planner);

  void enable_recording() { recording_ = true; }
  const EpisodeRecord& record() const { return record_; }
  EpisodeRecord take_record() { return std::move(record_); }

 private:
  void refresh_observation();

  const IntersectionLayout& layout_;
  EnvConfig cfg_;
  WorldState world_;
  std::vector<VehicleState> observation_;
  ObservationNoise noise_;
  Rng spawn_rng_;
  Rng driver_rng_;
  Rng noise_rng_;
  Rng av_driver_rng_;
  int steps_ = 0;
  bool terminated_ = false;
  bool recording_ = false;
  EpisodeRecord record_;
};

/// Runs a full episode with the given planner. `actor` is required for rl.
EpisodeRecord run_episode(const IntersectionLayout& layout, const EnvConfig& cfg,
                          PlannerKind planner, nn::Actor* actor, std::uint64_t seed);

}  // namespace aim
