#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "aim/config.hpp"
#include "aim/world.hpp"

namespace aim {

/// Measured quantities carrying additive noise.
enum class Quantity : int { x = 0, y = 1, v = 2, psi = 3 };
inline constexpr std::array<Quantity, 4> kQuantities{Quantity::x, Quantity::y, Quantity::v,
                                                     Quantity::psi};
std::string_view to_string(Quantity q);

/// AR(1) process e_k = phi * e_{k-1} + eps_k, eps_k ~ N(0, sigma2).
struct NoiseProcessParams {
  Quantity quantity = Quantity::x;
  double phi = 0.0;
  double sigma2 = 0.0;

  void validate() const;  // |phi| < 1, sigma2 >= 0
  double stationary_variance() const { return sigma2 / (1.0 - phi * phi); }
};

using NoiseParamSet = std::map<Quantity, NoiseProcessParams>;

/// Parameters fitted from the reference driving logs:
/// x, y: (0.968, 0.014 m^2), v: (0.957, 0.045 m^2/s^2), psi: (0.936, 0.0005 rad^2).
NoiseParamSet default_params();

NoiseParamSet load_noise_params(const Config& cfg);
void store_noise_params(const NoiseParamSet& params, Config& cfg);

/// One noise channel: current error and its own random stream. Copies
/// advance identically.
struct NoiseState {
  double e = 0.0;
  Rng rng{};
};

/// One AR(1) step. Returns the advanced state and its error value.
std::pair<NoiseState, double> advance(NoiseState state, const NoiseProcessParams& params);

/// In-place variant used on hot paths.
double advance_in_place(NoiseState& state, const NoiseProcessParams& params);

/// Signed error series of length `n` starting from `e0`.
std::vector<double> generate_ar1(const NoiseProcessParams& params, std::size_t n,
                                 std::uint64_t seed, double e0 = 0.0);

struct Ar1Estimate {
  NoiseProcessParams params;
  std::size_t terms = 0;  // number of lagged pairs used
  bool degenerate = false;
};

/// Ordinary least squares through the origin on an error series:
/// phi = sum e_{k-1} e_k / sum e_{k-1}^2, sigma2 = mean (e_k - phi e_{k-1})^2.
Ar1Estimate fit_ar1(std::span<const double> errors, Quantity q = Quantity::x);

/// Temporally aligned ground truth and perception series of one quantity.
struct TrackPair {
  Quantity quantity = Quantity::x;
  std::vector<double> timestamps;
  std::vector<double> truth;
  std::vector<double> perceived;

  void validate() const;  // equal lengths, strictly increasing time
};

inline constexpr std::size_t kMinTrackLength = 100;

/// Error magnitudes |truth - perceived| (heading differences wrapped), then
/// `fit_ar1`. Throws InputError for tracks shorter than kMinTrackLength.
Ar1Estimate estimate(const TrackPair& track);

/// Drive log: delimited text with header columns
/// t_gt,x_gt,y_gt,v_gt,psi_gt,t_perc,x_perc,y_perc,v_perc,psi_perc.
/// Either half of a row may be empty. Perception samples are matched to the
/// nearest ground-truth timestamp within `tolerance`; unmatched ground-truth
/// samples are dropped.
struct DriveLog {
  struct Sample {
    double t = 0.0;
    std::array<double, 4> values{};  // x, y, v, psi
  };
  std::vector<Sample> ground_truth;
  std::vector<Sample> perception;
};

DriveLog read_drive_log(std::istream& in);
void write_drive_log(std::ostream& out, const DriveLog& log);
std::array<TrackPair, 4> align_tracks(const DriveLog& log, double tolerance = 0.05);

/// Synthetic 10 Hz log whose error magnitudes reproduce `targets` under
/// `estimate`. Each channel is a signed Gaussian AR(1) whose coefficients are
/// chosen so that the least-squares fit of its absolute value converges to
/// the target (phi, sigma2).
DriveLog synthesize_drive_log(const NoiseParamSet& targets, std::size_t samples,
                              std::uint64_t seed);

/// Generator coefficients whose absolute value fits to `target`.
NoiseProcessParams magnitude_matched_generator(const NoiseProcessParams& target);

/// Per-vehicle observation noise for the four measured quantities. Channels
/// are created lazily with a stationary initial error and a random sign.
class ObservationNoise {
 public:
  ObservationNoise() = default;
  ObservationNoise(NoiseParamSet params, bool enabled);

  bool enabled() const { return enabled_; }
  const NoiseParamSet& params() const { return params_; }

  /// Advances every channel of the vehicles present in `world` once and
  /// returns the perturbed observations. `rng` seeds new channels.
  std::vector<VehicleState> observe(const WorldState& world, const IntersectionLayout& layout,
                                    Rng& rng);

  std::size_t channel_count() const { return channels_.size() * 4; }

 private:
  struct Channel {
    NoiseState state;
    double sign = 1.0;
  };
  NoiseParamSet params_;
  bool enabled_ = false;
  std::map<VehicleId, std::array<Channel, 4>> channels_;
};

/// Free-function form used by the episode loop.
std::vector<VehicleState> apply_observation_noise(const WorldState& world,
                                                  const IntersectionLayout& layout,
                                                  ObservationNoise& noise, Rng& rng);

}  // namespace aim
