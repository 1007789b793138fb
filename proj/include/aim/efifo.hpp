#pragma once

#include <map>
#include <span>
#include <vector>

#include "aim/config.hpp"
#include "aim/driver.hpp"
#include "aim/world.hpp"

namespace aim {

struct EfifoParams {
  double margin = 3.0;     // s around predicted conflict point occupancy
  double clearance = 1.0;  // m added to the geometric conflict zone
  double go_accel = 2.0;   // acceleration assumed for early arrival
  IdmParams idm{};

  void validate() const;
};

EfifoParams load_efifo_params(const Config& cfg);
void store_efifo_params(const EfifoParams& p, Config& cfg);

/// Predicted occupancy of one conflict point by a granted AV.
struct Reservation {
  VehicleId holder = 0;
  PathId path = 0;
  Vec2 position;
  double enter = 0.0;  // s from now
  double leave = 0.0;
};

struct ClearanceState {
  std::vector<VehicleId> queue;  // AVs in service order
  std::map<VehicleId, bool> granted;
  std::vector<Reservation> reservations;
};

struct EfifoPlan {
  AccelerationMap commands;
  ClearanceState state;
};

/// One planning step. AVs are served by distance to their stop position
/// (committed AVs first). An AV is granted when its predicted conflict point
/// occupancy clears every granted AV and every MV with right of way (all
/// candidate maneuvers while the MV's intention is hidden) by the margin.
/// Granted AVs follow IDM; the others brake toward their stop position.
EfifoPlan plan(std::span<const VehicleState> observation, const IntersectionLayout& layout,
               const EfifoParams& params = {});

}  // namespace aim
