#pragma once

#include <array>
#include <cstdint>

#include "aim/config.hpp"
#include "aim/layout.hpp"

namespace aim {

/// Left/straight/right split used by the demand presets.
inline constexpr std::array<double, 3> kDefaultTurns{0.2, 0.6, 0.2};

struct ScenarioConfig {
  std::array<double, 4> demand{};  // veh/s per approach (north, east, south, west)
  double automation_level = 0.0;
  /// Turn probabilities per approach, ordered left/straight/right.
  std::array<std::array<double, 3>, 4> turn_distribution{
      kDefaultTurns, kDefaultTurns, kDefaultTurns, kDefaultTurns};
  int episode_length = 600;  // steps
  double step_dt = 0.1;
  std::uint64_t rng_seed = 1;
  double min_spawn_gap = 8.0;  // bumper gap required at the lane entry (m)

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

inline constexpr int kScenarioCount = 5;

/// Demand presets: major approaches get {0.05, 0.08, 0.11, 0.14, 0.17}
/// veh/s, minor approaches half of that. `index` is 1-based.
ScenarioConfig demand_scenario(int index, double automation_level,
                               const IntersectionLayout& layout);

ScenarioConfig load_scenario(const Config& cfg, const IntersectionLayout& layout);
void store_scenario(const ScenarioConfig& sc, Config& cfg);

}  // namespace aim
