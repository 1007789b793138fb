#pragma once

#include <random>
#include <vector>

#include "aim/layout.hpp"
#include "aim/vehicle.hpp"

namespace aim::testkit {

/// `n` vehicles on random paths, spread over approach, box and exit. Vehicles
/// of one path keep a 10 m spacing so scenes stay physically plausible.
inline std::vector<VehicleState> random_scene(const IntersectionLayout& layout, int n,
                                              std::mt19937_64& rng, double av_share = 0.5) {
  std::uniform_int_distribution<int> path_dist(0, static_cast<int>(layout.path_count()) - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<VehicleState> out;
  for (int k = 0; k < n; ++k) {
    VehicleState v;
    v.id = static_cast<VehicleId>(k + 1);
    v.path_id = path_dist(rng);
    const PathInfo& path = layout.path(v.path_id);
    v.turn = path.turn;
    v.kind = u(rng) < av_share ? VehicleKind::av : VehicleKind::mv;
    double s = 0.0;
    for (int tries = 0; tries < 20; ++tries) {
      s = u(rng) * (path.region_end + 20.0);
      bool clash = false;
      for (const auto& o : out) {
        if (o.path_id == v.path_id && std::abs(o.s - s) < 10.0) clash = true;
      }
      if (!clash) break;
    }
    place_on_path(v, layout, s);
    v.v = u(rng) * 13.0;
    v.a_meas = -4.0 + 7.0 * u(rng);
    v.intention_observable = v.is_av() || (s > path.region_begin + 0.25 * path.region_length());
    out.push_back(v);
  }
  return out;
}

}  // namespace aim::testkit
