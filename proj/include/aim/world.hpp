#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aim/layout.hpp"
#include "aim/scenario.hpp"
#include "aim/vehicle.hpp"

namespace aim {

/// Rejected caller input (unknown ids, out-of-range arguments).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Rng = std::mt19937_64;
using AccelerationMap = std::map<VehicleId, double>;

struct VehicleLimits {
  double min_accel = -4.0;
  double max_accel = 3.0;
  double wheelbase = 2.7;
  double lookahead = 5.0;
  double stopped_speed = 0.1;  // below this a vehicle counts as standing
};

struct CompletionEvent {
  VehicleId id = 0;
  double time = 0.0;
  double spawn_time = 0.0;
  VehicleKind kind = VehicleKind::mv;
  PathId path = 0;
};

struct WorldState {
  double time = 0.0;
  std::vector<VehicleState> vehicles;
  VehicleId next_id = 1;
  std::size_t spawned = 0;
  std::size_t suppressed_spawns = 0;
  std::size_t completed = 0;
  std::size_t removed_by_collision = 0;
  std::size_t collision_events = 0;
  std::vector<CompletionEvent> completions;
  bool collision_flag = false;          // last step produced an overlap
  std::vector<VehicleId> collided;      // vehicles overlapping in the last step

  const VehicleState* find(VehicleId id) const;
  std::size_t active() const { return vehicles.size(); }
};

struct StepOptions {
  /// Evaluation runs remove colliding vehicles and continue; training
  /// terminates the episode instead.
  bool remove_collided = false;
  VehicleLimits limits{};
};

/// Acceleration source for vehicles without a planner command.
using ManualDriver = std::function<double(const VehicleState&)>;

/// Advances the world by `dt`. Every AV must have a command, no MV may have
/// one; MV accelerations come from `manual`. Commands are clamped to the
/// vehicle limits, velocity never drops below zero.
WorldState step(const WorldState& world, const IntersectionLayout& layout,
                const AccelerationMap& commands, double dt,
                const ManualDriver& manual, const StepOptions& options = {});

/// Poisson arrivals per approach. Consumes three uniforms per approach and
/// step (arrival, kind, turn) regardless of the outcome.
WorldState spawn(const WorldState& world, const IntersectionLayout& layout,
                 const ScenarioConfig& config, Rng& rng);

/// MVs become predictable once they have covered strictly more than 25% of
/// their in-box arc length.
WorldState update_intention_observability(const WorldState& world,
                                          const IntersectionLayout& layout);
bool intention_threshold_passed(const VehicleState& veh, const IntersectionLayout& layout);

/// Ids of overlapping vehicle pairs (i < j in vehicle order).
std::vector<std::pair<VehicleId, VehicleId>> overlapping_pairs(
    std::span<const VehicleState> vehicles);

/// Position of `other` expressed in arc length along `ego_path`, if `other`
/// currently occupies a lane section of that route.
std::optional<double> route_position(const VehicleState& other, PathId ego_path,
                                     const IntersectionLayout& layout);

struct Leader {
  const VehicleState* vehicle = nullptr;
  double gap = 0.0;  // bumper to bumper (m)
};

/// Nearest vehicle ahead of `ego` along its route.
std::optional<Leader> find_leader(const VehicleState& ego,
                                  std::span<const VehicleState> vehicles,
                                  const IntersectionLayout& layout);

/// Signed arc length from the stop position (negative before it).
inline double distance_past_stop(const VehicleState& veh, const IntersectionLayout& layout) {
  return veh.s - layout.path(veh.path_id).stop_s;
}

RoadClass origin_road(const VehicleState& veh, const IntersectionLayout& layout);

}  // namespace aim
