#include "aim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace aim {

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::x: return "x";
    case Quantity::y: return "y";
    case Quantity::v: return "v";
    case Quantity::psi: return "psi";
  }
  return "?";
}

void NoiseProcessParams::validate() const {
  if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("AR(1) coefficient must satisfy |phi| < 1");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("AR(1) innovation variance must be >= 0");
}

NoiseParamSet default_params() {
  return {
      {Quantity::x, {Quantity::x, 0.968, 0.014}},
      {Quantity::y, {Quantity::y, 0.968, 0.014}},
      {Quantity::v, {Quantity::v, 0.957, 0.045}},
      {Quantity::psi, {Quantity::psi, 0.936, 0.0005}},
  };
}

NoiseParamSet load_noise_params(const Config& cfg) {
  NoiseParamSet out = default_params();
  for (Quantity q : kQuantities) {
    const std::string name(to_string(q));
    auto& p = out[q];
    p.phi = cfg.get("noise." + name + "_phi", p.phi);
    p.sigma2 = cfg.get("noise." + name + "_sigma2", p.sigma2);
    p.validate();
  }
  return out;
}

void store_noise_params(const NoiseParamSet& params, Config& cfg) {
  for (const auto& [q, p] : params) {
    const std::string name(to_string(q));
    cfg.set("noise." + name + "_phi", format_double(p.phi));
    cfg.set("noise." + name + "_sigma2", format_double(p.sigma2));
  }
}

std::pair<NoiseState, double> advance(NoiseState state, const NoiseProcessParams& params) {
  const double e = advance_in_place(state, params);
  return {std::move(state), e};
}

double advance_in_place(NoiseState& state, const NoiseProcessParams& params) {
  std::normal_distribution<double> eps(0.0, std::sqrt(params.sigma2));
  // a zero-variance distribution still consumes a draw, which keeps streams
  // aligned across parameter sets
  const double innovation = params.sigma2 > 0.0 ? eps(state.rng) : (state.rng(), 0.0);
  state.e = params.phi * state.e + innovation;
  return state.e;
}

std::vector<double> generate_ar1(const NoiseProcessParams& params, std::size_t n,
                                 std::uint64_t seed, double e0) {
  params.validate();
  NoiseState st{e0, Rng(seed)};
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(advance_in_place(st, params));
  return out;
}

Ar1Estimate fit_ar1(std::span<const double> errors, Quantity q) {
  Ar1Estimate est;
  est.params.quantity = q;
  if (errors.size() < 2) {
    est.degenerate = true;
    return est;
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 1; k < errors.size(); ++k) {
    num += errors[k - 1] * errors[k];
    den += errors[k - 1] * errors[k - 1];
  }
  est.terms = errors.size() - 1;
  if (den == 0.0) {
    est.degenerate = true;
    return est;
  }
  const double phi = num / den;
  double ss = 0.0;
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double r = errors[k] - phi * errors[k - 1];
    ss += r * r;
  }
  est.params.phi = phi;
  est.params.sigma2 = ss / static_cast<double>(est.terms);
  return est;
}

void TrackPair::validate() const {
  if (timestamps.size() != truth.size() || truth.size() != perceived.size()) {
    throw InputError("track pair series must have equal lengths");
  }
  for (std::size_t k = 1; k < timestamps.size(); ++k) {
    if (!(timestamps[k] > timestamps[k - 1])) {
      throw InputError("track pair timestamps must be strictly increasing");
    }
  }
}

Ar1Estimate estimate(const TrackPair& track) {
  track.validate();
  if (track.truth.size() < kMinTrackLength) {
    throw InputError("track too short for estimation: " + std::to_string(track.truth.size()) +
                     " samples, need " + std::to_string(kMinTrackLength));
  }
  std::vector<double> errors(track.truth.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    double d = track.truth[k] - track.perceived[k];
    if (track.quantity == Quantity::psi) d = wrap_angle(d);
    errors[k] = std::abs(d);
  }
  return fit_ar1(errors, track.quantity);
}

namespace {

constexpr std::array<const char*, 10> kLogColumns{"t_gt",   "x_gt",   "y_gt",   "v_gt",
                                                  "psi_gt", "t_perc", "x_perc", "y_perc",
                                                  "v_perc", "psi_perc"};

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_cell(const std::string& raw, double& out) {
  const auto first = raw.find_first_not_of(" \t\r");
  if (first == std::string::npos) return false;
  const auto last = raw.find_last_not_of(" \t\r");
  const std::string s = raw.substr(first, last - first + 1);
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("drive log: malformed number '" + s + "'");
  }
  if (used != s.size()) throw InputError("drive log: malformed number '" + s + "'");
  return true;
}

}  // namespace

DriveLog read_drive_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("drive log: empty input");
  const auto header = split_row(line);
  std::array<int, 10> col{};
  col.fill(-1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    h.erase(std::remove_if(h.begin(), h.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
            h.end());
    for (std::size_t c = 0; c < kLogColumns.size(); ++c) {
      if (h == kLogColumns[c]) col[c] = static_cast<int>(i);
    }
  }
  for (std::size_t c = 0; c < kLogColumns.size(); ++c) {
    if (col[c] < 0) throw InputError(std::string("drive log: missing column '") + kLogColumns[c] + "'");
  }

  DriveLog log;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_row(line);
    auto read_half = [&](std::size_t base, std::vector<DriveLog::Sample>& into) {
      DriveLog::Sample smp;
      int present = 0;
      double val = 0.0;
      std::array<bool, 5> have{};
      for (std::size_t k = 0; k < 5; ++k) {
        const auto idx = static_cast<std::size_t>(col[base + k]);
        if (idx < cells.size() && parse_cell(cells[idx], val)) {
          have[k] = true;
          ++present;
          if (k == 0) smp.t = val;
          else smp.values[k - 1] = val;
        }
      }
      if (present == 0) return;
      if (present != 5) {
        throw InputError("drive log: incomplete sample in row " + std::to_string(row));
      }
      into.push_back(smp);
    };
    read_half(0, log.ground_truth);
    read_half(5, log.perception);
  }
  return log;
}

void write_drive_log(std::ostream& out, const DriveLog& log) {
  for (std::size_t c = 0; c < kLogColumns.size(); ++c) {
    out << (c ? "," : "") << kLogColumns[c];
  }
  out << '\n';
  const std::size_t n = std::max(log.ground_truth.size(), log.perception.size());
  auto write_half = [&](const std::vector<DriveLog::Sample>& v, std::size_t i) {
    if (i >= v.size()) {
      out << ",,,,";
      return;
    }
    out << format_double(v[i].t);
    for (double x : v[i].values) out << ',' << format_double(x);
  };
  for (std::size_t i = 0; i < n; ++i) {
    write_half(log.ground_truth, i);
    out << ',';
    write_half(log.perception, i);
    out << '\n';
  }
}

std::array<TrackPair, 4> align_tracks(const DriveLog& log, double tolerance) {
  std::vector<DriveLog::Sample> perc = log.perception;
  std::stable_sort(perc.begin(), perc.end(),
                   [](const auto& a, const auto& b) { return a.t < b.t; });
  std::array<TrackPair, 4> tracks;
  for (std::size_t q = 0; q < 4; ++q) tracks[q].quantity = kQuantities[q];
  for (const auto& gt : log.ground_truth) {
    auto it = std::lower_bound(perc.begin(), perc.end(), gt.t,
                               [](const DriveLog::Sample& s, double t) { return s.t < t; });
    const DriveLog::Sample* best = nullptr;
    double best_dt = std::numeric_limits<double>::infinity();
    for (auto cand : {it, it == perc.begin() ? perc.end() : std::prev(it)}) {
      if (cand == perc.end()) continue;
      const double dt = std::abs(cand->t - gt.t);
      if (dt < best_dt) {
        best_dt = dt;
        best = &*cand;
      }
    }
    if (!best || best_dt > tolerance + 1e-12) continue;
    if (!tracks[0].timestamps.empty() && !(gt.t > tracks[0].timestamps.back())) continue;
    for (std::size_t q = 0; q < 4; ++q) {
      tracks[q].timestamps.push_back(gt.t);
      tracks[q].truth.push_back(gt.values[q]);
      tracks[q].perceived.push_back(best->values[q]);
    }
  }
  return tracks;
}

namespace {

// Limit of the through-origin least-squares coefficient of |X| for a
// stationary Gaussian AR(1) X with lag-one correlation rho.
double magnitude_coefficient(double rho) {
  return 2.0 / kPi * (std::sqrt(1.0 - rho * rho) + rho * std::asin(rho));
}

}  // namespace

NoiseProcessParams magnitude_matched_generator(const NoiseProcessParams& target) {
  target.validate();
  if (target.phi <= magnitude_coefficient(0.0)) {
    throw std::invalid_argument("target coefficient below the reach of a magnitude process");
  }
  double lo = 0.0;
  double hi = target.phi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (magnitude_coefficient(mid) < target.phi ? lo : hi) = mid;
  }
  const double rho = 0.5 * (lo + hi);
  NoiseProcessParams gen = target;
  gen.phi = rho;
  // stationary variance chosen so that var * (1 - phi_target^2) = sigma2_target
  gen.sigma2 = target.sigma2 / (1.0 - target.phi * target.phi) * (1.0 - rho * rho);
  return gen;
}

DriveLog synthesize_drive_log(const NoiseParamSet& targets, std::size_t samples,
                              std::uint64_t seed) {
  DriveLog log;
  std::array<std::vector<double>, 4> errors;
  for (std::size_t q = 0; q < 4; ++q) {
    const auto gen = magnitude_matched_generator(targets.at(kQuantities[q]));
    Rng init(seed * 31 + q);
    std::normal_distribution<double> stat(0.0, std::sqrt(gen.stationary_variance()));
    errors[q] = generate_ar1(gen, samples, seed * 1000003 + q, stat(init));
  }
  // loop around a 120 m circle with a slowly varying speed
  double heading = 0.0;
  Vec2 pos{0.0, 0.0};
  const double dt = 0.1;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double v = 10.0 + 3.0 * std::sin(0.05 * t);
    DriveLog::Sample gt{t, {pos.x, pos.y, v, wrap_angle(heading)}};
    DriveLog::Sample pc = gt;
    pc.t = t + 0.01;  // perception lags by 10 ms
    for (std::size_t q = 0; q < 4; ++q) pc.values[q] += errors[q][k];
    pc.values[3] = wrap_angle(pc.values[3]);
    log.ground_truth.push_back(gt);
    log.perception.push_back(pc);
    heading += v / 120.0 * dt;
    pos = pos + Vec2{std::cos(heading), std::sin(heading)} * (v * dt);
  }
  return log;
}

ObservationNoise::ObservationNoise(NoiseParamSet params, bool enabled)
    : params_(std::move(params)), enabled_(enabled) {
  for (const auto& [q, p] : params_) p.validate();
}

std::vector<VehicleState> ObservationNoise::observe(const WorldState& world,
                                                    const IntersectionLayout& layout,
                                                    Rng& rng) {
  if (!enabled_) return world.vehicles;
  // forget vehicles that left the scene
  for (auto it = channels_.begin(); it != channels_.end();) {
    if (!world.find(it->first)) it = channels_.erase(it);
    else ++it;
  }
  std::vector<VehicleState> out = world.vehicles;
  for (auto& veh : out) {
    auto found = channels_.find(veh.id);
    if (found == channels_.end()) {
      std::array<Channel, 4> fresh;
      for (std::size_t q = 0; q < 4; ++q) {
        const auto& p = params_.at(kQuantities[q]);
        std::normal_distribution<double> stat(0.0, std::sqrt(p.stationary_variance()));
        std::uniform_int_distribution<int> coin(0, 1);
        fresh[q].state.rng.seed(rng());
        fresh[q].state.e = stat(rng);
        fresh[q].sign = coin(rng) ? 1.0 : -1.0;
      }
      found = channels_.emplace(veh.id, std::move(fresh)).first;
    }
    std::array<double, 4> err{};
    for (std::size_t q = 0; q < 4; ++q) {
      auto& ch = found->second[q];
      err[q] = ch.sign * advance_in_place(ch.state, params_.at(kQuantities[q]));
    }
    veh.x += err[0];
    veh.y += err[1];
    veh.v = std::max(0.0, veh.v + err[2]);
    veh.heading = wrap_angle(veh.heading + err[3]);
    veh.s = layout.path(veh.path_id).curve.project(veh.position());
  }
  return out;
}

std::vector<VehicleState> apply_observation_noise(const WorldState& world,
                                                  const IntersectionLayout& layout,
                                                  ObservationNoise& noise, Rng& rng) {
  return noise.observe(world, layout, rng);
}

}  // namespace aim
