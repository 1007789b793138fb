#pragma once

#include <optional>
#include <span>

#include "aim/config.hpp"
#include "aim/world.hpp"

namespace aim {

struct IdmParams {
  double v0 = 13.89;  // desired speed; replaced by the local limit in traffic
  double T = 1.5;
  double a_max = 3.0;
  double b = 3.0;
  double s0 = 2.0;
  double delta = 4.0;
  double min_accel = -4.0;  // command range
  double max_accel = 3.0;

  void validate() const;
};

struct EidmParams {
  IdmParams idm{};
  double noise_std = 0.3;             // additive acceleration noise (m/s^2)
  double estimation_error_std = 1.0;  // leader gap misperception (m)
  double gap_margin_std = 0.5;        // spread of the accepted time margin (s)
  double min_gap_margin = 2.0;

  void validate() const;
};

enum class DriverMode { idm, eidm };

struct DriverParams {
  DriverMode mode = DriverMode::idm;
  EidmParams eidm{};          // eidm.idm is used in both modes
  double gap_margin = 3.0;    // time margin around conflict point occupancy (s)
  double go_accel = 2.0;      // acceleration assumed when predicting a start-up
  double clearance = 1.0;     // extra distance around a conflict point (m)

  const IdmParams& idm() const { return eidm.idm; }
};

DriverParams load_driver_params(const Config& cfg);
void store_driver_params(const DriverParams& p, Config& cfg);

/// Leader as seen by the car-following law.
struct LeaderView {
  double gap = 0.0;  // bumper gap (m)
  double v = 0.0;
};

/// Closed-form IDM acceleration, clamped to the command range. A
/// non-positive gap yields maximal braking.
double idm_acceleration(double v, std::optional<LeaderView> leader, const IdmParams& p);

/// `leader` must drive ahead of `ego` on the same path.
double idm_acceleration(const VehicleState& ego, const VehicleState* leader,
                        const IdmParams& p);

/// Desired speed at the current position, anticipating a lower limit ahead
/// so that the vehicle arrives at it with comfortable braking.
double desired_speed(const VehicleState& ego, const IntersectionLayout& layout,
                     const IdmParams& p);

/// IDM toward free road / leader along the route. EIDM mode perturbs the
/// perceived gap and adds acceleration noise (two normal draws).
double car_following_acceleration(const VehicleState& ego,
                                  std::span<const VehicleState> vehicles,
                                  const IntersectionLayout& layout,
                                  const DriverParams& params, Rng* rng);

/// Braking law that brings the vehicle centre to rest at its stop position.
double stop_at_line_acceleration(const VehicleState& ego, const IntersectionLayout& layout,
                                 const IdmParams& p);

/// Time window [enter, leave] during which a vehicle covers the distance
/// interval [d_enter, d_leave] ahead of it.
struct Window {
  double enter = 0.0;
  double leave = 0.0;
};

/// Times for constant acceleration `a` starting at speed `v`, speed capped at
/// `v_cap` and floored at `v_min` (pass 0 to allow stopping). Returns
/// +inf when the distance is never reached.
double time_to_cover(double distance, double v, double a, double v_cap, double v_min = 0.0);

/// True if a vehicle can no longer stop before its stop position.
bool is_committed(const VehicleState& veh, const IntersectionLayout& layout,
                  const IdmParams& p);

/// Right of way between two vehicles approaching shared conflict points:
/// committed vehicles first, then the higher rank, then the earlier arrival.
bool has_precedence(const VehicleState& other, const VehicleState& ego,
                    const IntersectionLayout& layout, const IdmParams& p);

/// True when `veh` waits behind a standing vehicle of its own approach lane
/// that has not reached its stop position yet; such a vehicle cannot reach a
/// conflict point before its leader does.
bool queued_behind_stopped(const VehicleState& veh, std::span<const VehicleState> vehicles,
                           const IntersectionLayout& layout, const IdmParams& p);

struct YieldCheck {
  bool must_yield = false;
  VehicleId yield_to = 0;
};

/// Whether precedence rules oblige `ego` to wait at its stop position.
YieldCheck yield_check(const VehicleState& ego, std::span<const VehicleState> vehicles,
                       const IntersectionLayout& layout, const DriverParams& params,
                       double gap_margin);

/// Car following combined with priority-rule yielding. In EIDM mode the
/// accepted margin is drawn per call (one extra normal draw), so a call
/// consumes exactly three normals in EIDM mode and none in IDM mode.
double yielding_filter(const VehicleState& ego, std::span<const VehicleState> vehicles,
                       const IntersectionLayout& layout, const DriverParams& params,
                       Rng* rng);

/// ManualDriver bound to a pre-step snapshot of the world.
ManualDriver make_manual_driver(const WorldState& world, const IntersectionLayout& layout,
                                const DriverParams& params, Rng* rng);

}  // namespace aim
