#include "aim/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQueueSpeed = 1.0;  // m/s, a leader slower than this blocks its lane
}

void IdmParams::validate() const {
  if (!(v0 > 0 && T > 0 && a_max > 0 && b > 0 && s0 > 0)) {
    throw std::invalid_argument("IDM parameters must be positive");
  }
  if (!(delta >= 1.0)) throw std::invalid_argument("IDM exponent must be >= 1");
}

void EidmParams::validate() const {
  idm.validate();
  if (noise_std < 0 || estimation_error_std < 0 || gap_margin_std < 0) {
    throw std::invalid_argument("EIDM standard deviations must be non-negative");
  }
}

DriverParams load_driver_params(const Config& cfg) {
  DriverParams p;
  const auto mode = cfg.get<std::string>("driver.mode", "idm");
  if (mode == "idm") {
    p.mode = DriverMode::idm;
  } else if (mode == "eidm") {
    p.mode = DriverMode::eidm;
  } else {
    throw ConfigError("driver.mode must be 'idm' or 'eidm', got '" + mode + "'");
  }
  auto& idm = p.eidm.idm;
  idm.T = cfg.get("driver.time_headway", idm.T);
  idm.a_max = cfg.get("driver.max_accel", idm.a_max);
  idm.b = cfg.get("driver.comfortable_decel", idm.b);
  idm.s0 = cfg.get("driver.min_gap", idm.s0);
  idm.delta = cfg.get("driver.exponent", idm.delta);
  p.eidm.noise_std = cfg.get("driver.noise_std", p.eidm.noise_std);
  p.eidm.estimation_error_std = cfg.get("driver.estimation_error_std", p.eidm.estimation_error_std);
  p.eidm.gap_margin_std = cfg.get("driver.gap_margin_std", p.eidm.gap_margin_std);
  p.eidm.min_gap_margin = cfg.get("driver.min_gap_margin", p.eidm.min_gap_margin);
  p.gap_margin = cfg.get("driver.gap_margin", p.gap_margin);
  p.go_accel = cfg.get("driver.go_accel", p.go_accel);
  p.clearance = cfg.get("driver.clearance", p.clearance);
  p.eidm.validate();
  if (!(p.gap_margin >= 0.0 && p.go_accel > 0.0 && p.clearance >= 0.0)) {
    throw ConfigError("driver.gap_margin, driver.go_accel or driver.clearance out of range");
  }
  return p;
}

void store_driver_params(const DriverParams& p, Config& cfg) {
  const auto& idm = p.idm();
  cfg.set("driver.mode", std::string(p.mode == DriverMode::idm ? "idm" : "eidm"));
  cfg.set("driver.time_headway", format_double(idm.T));
  cfg.set("driver.max_accel", format_double(idm.a_max));
  cfg.set("driver.comfortable_decel", format_double(idm.b));
  cfg.set("driver.min_gap", format_double(idm.s0));
  cfg.set("driver.exponent", format_double(idm.delta));
  cfg.set("driver.noise_std", format_double(p.eidm.noise_std));
  cfg.set("driver.estimation_error_std", format_double(p.eidm.estimation_error_std));
  cfg.set("driver.gap_margin_std", format_double(p.eidm.gap_margin_std));
  cfg.set("driver.min_gap_margin", format_double(p.eidm.min_gap_margin));
  cfg.set("driver.gap_margin", format_double(p.gap_margin));
  cfg.set("driver.go_accel", format_double(p.go_accel));
  cfg.set("driver.clearance", format_double(p.clearance));
}

double idm_acceleration(double v, std::optional<LeaderView> leader, const IdmParams& p) {
  double a = p.a_max * (1.0 - std::pow(v / p.v0, p.delta));
  if (leader) {
    if (leader->gap <= 0.0) return p.min_accel;
    const double dv = v - leader->v;
    const double s_star =
        p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b)));
    a -= p.a_max * (s_star / leader->gap) * (s_star / leader->gap);
  }
  return std::clamp(a, p.min_accel, p.max_accel);
}

double idm_acceleration(const VehicleState& ego, const VehicleState* leader,
                        const IdmParams& p) {
  if (!leader) return idm_acceleration(ego.v, std::nullopt, p);
  const double gap = leader->s - ego.s - (ego.length + leader->length) / 2.0;
  return idm_acceleration(ego.v, LeaderView{gap, leader->v}, p);
}

double desired_speed(const VehicleState& ego, const IntersectionLayout& layout,
                     const IdmParams& p) {
  const PathInfo& path = layout.path(ego.path_id);
  double v = path.speed_limit_at(ego.s);
  if (ego.s < path.region_begin && path.region_limit < v) {
    const double dist = std::max(0.0, path.region_begin - ego.s - ego.length / 2.0);
    v = std::min(v, std::sqrt(path.region_limit * path.region_limit + p.b * dist));
  }
  return v;
}

double car_following_acceleration(const VehicleState& ego,
                                  std::span<const VehicleState> vehicles,
                                  const IntersectionLayout& layout,
                                  const DriverParams& params, Rng* rng) {
  IdmParams p = params.idm();
  p.v0 = desired_speed(ego, layout, p);
  double gap_error = 0.0;
  double noise = 0.0;
  if (params.mode == DriverMode::eidm) {
    if (!rng) throw std::invalid_argument("EIDM mode needs a random stream");
    std::normal_distribution<double> normal(0.0, 1.0);
    gap_error = params.eidm.estimation_error_std * normal(*rng);
    noise = params.eidm.noise_std * normal(*rng);
  }
  std::optional<LeaderView> view;
  if (auto leader = find_leader(ego, vehicles, layout)) {
    double gap = leader->gap;
    // misperception never hides a touching leader
    if (gap > 0.0) gap = std::max(0.1, gap + gap_error);
    view = LeaderView{gap, leader->vehicle->v};
  }
  return std::clamp(idm_acceleration(ego.v, view, p) + noise, p.min_accel, p.max_accel);
}

double stop_at_line_acceleration(const VehicleState& ego, const IntersectionLayout& layout,
                                 const IdmParams& p) {
  IdmParams q = p;
  q.v0 = desired_speed(ego, layout, p);
  const double gap = layout.path(ego.path_id).stop_s - ego.s + p.s0;
  return idm_acceleration(ego.v, LeaderView{gap, 0.0}, q);
}

double time_to_cover(double distance, double v, double a, double v_cap, double v_min) {
  if (distance <= 0.0) return 0.0;
  v = std::max(v, 0.0);
  if (a > 0.0 && v < v_cap) {
    const double t1 = (v_cap - v) / a;
    const double d1 = 0.5 * (v + v_cap) * t1;
    if (distance <= d1) return (-v + std::sqrt(v * v + 2.0 * a * distance)) / a;
    return t1 + (distance - d1) / v_cap;
  }
  if (a < 0.0 && v > v_min) {
    const double t1 = (v - v_min) / -a;
    const double d1 = 0.5 * (v + v_min) * t1;
    if (distance <= d1) {
      const double disc = v * v + 2.0 * a * distance;
      return (v - std::sqrt(std::max(0.0, disc))) / -a;
    }
    return v_min > 0.0 ? t1 + (distance - d1) / v_min : kInf;
  }
  return v > 0.0 ? distance / v : kInf;
}

bool is_committed(const VehicleState& veh, const IntersectionLayout& layout,
                  const IdmParams& p) {
  // vehicles held at the line creep up to the stop position itself
  constexpr double kTolerance = 0.5;
  const double to_stop = layout.path(veh.path_id).stop_s - veh.s + kTolerance;
  if (to_stop <= 0.0) return true;
  return veh.v * veh.v / (2.0 * -p.min_accel) > to_stop;
}

bool has_precedence(const VehicleState& other, const VehicleState& ego,
                    const IntersectionLayout& layout, const IdmParams& p) {
  const bool oc = is_committed(other, layout, p);
  const bool ec = is_committed(ego, layout, p);
  if (oc != ec) return oc;
  const int ro = priority_rank(layout, other.path_id);
  const int re = priority_rank(layout, ego.path_id);
  if (ro != re) return ro > re;
  const double d_o = layout.path(other.path_id).stop_s - other.s;
  const double d_e = layout.path(ego.path_id).stop_s - ego.s;
  if (d_o != d_e) return d_o < d_e;
  return other.id < ego.id;
}

bool queued_behind_stopped(const VehicleState& veh, std::span<const VehicleState> vehicles,
                           const IntersectionLayout& layout, const IdmParams& p) {
  if (is_committed(veh, layout, p)) return false;
  const Approach origin = layout.path(veh.path_id).origin;
  for (const auto& u : vehicles) {
    if (u.id == veh.id || u.s <= veh.s) continue;
    if (layout.path(u.path_id).origin != origin) continue;
    if (u.v < kQueueSpeed && !is_committed(u, layout, p)) return true;
  }
  return false;
}

YieldCheck yield_check(const VehicleState& ego, std::span<const VehicleState> vehicles,
                       const IntersectionLayout& layout, const DriverParams& params,
                       double gap_margin) {
  const IdmParams& idm = params.idm();
  if (is_committed(ego, layout, idm)) return {};
  const PathInfo& ego_path = layout.path(ego.path_id);
  for (const auto& other : vehicles) {
    if (other.id == ego.id) continue;
    const auto& cps = layout.conflicts(ego.path_id, other.path_id);
    if (cps.empty()) continue;
    if (!has_precedence(other, ego, layout, idm)) continue;
    if (queued_behind_stopped(other, vehicles, layout, idm)) continue;
    const PathInfo& other_path = layout.path(other.path_id);
    for (const auto& cp : cps) {
      const double zone = cp.merge ? (ego.length + other.length) / 2.0 + idm.s0
                                   : (other.length + ego.width) / 2.0 + params.clearance;
      const double d_o_leave = cp.s_b + zone - other.s;
      if (d_o_leave <= 0.0) continue;
      const double d_o_enter = cp.s_b - zone - other.s;
      const double t_o_in =
          time_to_cover(d_o_enter, other.v, params.go_accel, other_path.approach_limit);
      const double t_o_out =
          time_to_cover(d_o_leave, other.v, 0.5 * params.go_accel, other_path.approach_limit);
      const double d_e_enter = cp.s_a - zone - ego.s;
      const double d_e_leave = cp.s_a + zone - ego.s;
      const double t_e_in =
          time_to_cover(d_e_enter, ego.v, params.go_accel, ego_path.approach_limit);
      const double t_e_out =
          time_to_cover(d_e_leave, ego.v, params.go_accel, ego_path.approach_limit);
      if (t_e_in - gap_margin < t_o_out && t_o_in < t_e_out + gap_margin) {
        return {true, other.id};
      }
    }
  }
  return {};
}

double yielding_filter(const VehicleState& ego, std::span<const VehicleState> vehicles,
                       const IntersectionLayout& layout, const DriverParams& params,
                       Rng* rng) {
  const double follow = car_following_acceleration(ego, vehicles, layout, params, rng);
  double margin = params.gap_margin;
  if (params.mode == DriverMode::eidm) {
    std::normal_distribution<double> normal(0.0, 1.0);
    margin = std::max(params.eidm.min_gap_margin,
                      params.gap_margin + params.eidm.gap_margin_std * normal(*rng));
  }
  const YieldCheck check = yield_check(ego, vehicles, layout, params, margin);
  if (!check.must_yield) return follow;
  return std::min(follow, stop_at_line_acceleration(ego, layout, params.idm()));
}

ManualDriver make_manual_driver(const WorldState& world, const IntersectionLayout& layout,
                                const DriverParams& params, Rng* rng) {
  return [&world, &layout, params, rng](const VehicleState& veh) {
    return yielding_filter(veh, world.vehicles, layout, params, rng);
  };
}

}  // namespace aim
