#pragma once

#include <cstdint>
#include <string_view>

#include "aim/geometry.hpp"
#include "aim/layout.hpp"

namespace aim {

using VehicleId = std::uint64_t;

enum class VehicleKind { av, mv };

inline std::string_view to_string(VehicleKind k) { return k == VehicleKind::av ? "AV" : "MV"; }

struct VehicleState {
  VehicleId id = 0;
  PathId path_id = 0;
  double s = 0.0;       // arc length along the path (m)
  double v = 0.0;       // m/s, never negative
  double a_meas = 0.0;  // last applied longitudinal acceleration
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double steering = 0.0;  // front wheel angle from the path tracker
  VehicleKind kind = VehicleKind::mv;
  Turn turn = Turn::straight;
  bool intention_observable = false;
  double length = 4.5;
  double width = 1.8;

  // bookkeeping
  double spawn_time = 0.0;
  double stopped_time = 0.0;  // continuous time spent below the idle threshold

  bool is_av() const { return kind == VehicleKind::av; }
  Vec2 position() const { return {x, y}; }
  OrientedBox footprint() const { return {{x, y}, heading, length / 2.0, width / 2.0}; }
};

/// Places the vehicle on its path at arc length `s`.
void place_on_path(VehicleState& veh, const IntersectionLayout& layout, double s);

}  // namespace aim
