#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aim/episode.hpp"

namespace aim {

struct TracePoint {
  double v = 0.0;
  double s = 0.0;
};

/// Accumulated speed deficit sum_k (1 - v_k / v_lim(s_k)) in steps.
double delay(std::span<const TracePoint> trace, const PathInfo& path);

/// Crossings per hour.
double flow_rate(std::size_t crossings, double duration_s);

struct RunningStat {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double x) {
    sum += x;
    ++count;
  }
  void merge(const RunningStat& o) {
    sum += o.sum;
    count += o.count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

struct EpisodeMetrics {
  double duration = 0.0;           // evaluated time after the warm-up (s)
  std::size_t crossings = 0;       // completions after the warm-up
  double flow = 0.0;               // veh/h
  RunningStat delay_av;            // per completed vehicle, steps
  RunningStat delay_mv;
  RunningStat velocity_major;      // per vehicle-step sample, m/s
  RunningStat velocity_minor;
  std::size_t collision_events = 0;  // overlapping pairs after the warm-up
  std::size_t collision_events_total = 0;
};

/// Pure function of the record. Vehicles count toward delay if they appear
/// after the warm-up and leave the network before the end.
EpisodeMetrics compute_metrics(const EpisodeRecord& rec, const IntersectionLayout& layout,
                               double warmup_s);

/// Vehicle pairs per step whose bodies both cover a conflict point shared by
/// their paths, summed over the record.
std::size_t occupancy_overlaps(const EpisodeRecord& rec, const IntersectionLayout& layout,
                               double vehicle_length = VehicleState{}.length);

struct CampaignSpec {
  std::vector<int> scenarios{1, 2, 3, 4, 5};
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<PlannerKind> planners{PlannerKind::efifo};
  int runs = 10;
  std::vector<bool> noise{false};
  std::uint64_t seed = 1;
  double episode_seconds = 300.0;
  double warmup_seconds = 30.0;
  DriverMode driver = DriverMode::eidm;

  void validate() const;
};

CampaignSpec load_campaign(const Config& cfg);
void store_campaign(const CampaignSpec& spec, Config& cfg);

struct ConfigResult {
  int scenario = 1;
  double level = 0.0;
  PlannerKind planner = PlannerKind::none;
  bool noise = false;
  bool skipped = false;
  std::string note;
  int runs = 0;
  double flow_mean = 0.0;
  double flow_std = 0.0;
  double delay_av = 0.0;
  double delay_mv = 0.0;
  double delay_all = 0.0;
  double velocity_major = 0.0;
  double velocity_minor = 0.0;
  std::size_t samples_major = 0;
  std::size_t samples_minor = 0;
  std::size_t crossings = 0;
  std::size_t collision_events = 0;
  int episodes_with_collision = 0;
  double collision_rate_crossing = 0.0;  // % of crossings
  double collision_rate_episode = 0.0;   // % of episodes
};

struct MetricsReport {
  std::vector<ConfigResult> rows;
};

/// Seed of run `run` of `scenario`; shared by all levels and planners so
/// configurations are compared on common random numbers.
std::uint64_t episode_seed(std::uint64_t campaign_seed, int scenario, int run);

/// EnvConfig of one campaign configuration.
EnvConfig campaign_env(const EnvConfig& base, const CampaignSpec& spec, int scenario,
                       double level, bool noise, const IntersectionLayout& layout);

/// Runs every configuration. `actor` may be null; rl configurations are then
/// reported as skipped. `jobs` worker threads share the episode list; the
/// report does not depend on it. If `record_dir` is set, each episode's
/// record is written there.
MetricsReport run_campaign(const CampaignSpec& spec, const IntersectionLayout& layout,
                           const EnvConfig& base, nn::Actor* actor, int jobs = 1,
                           const std::optional<std::filesystem::path>& record_dir = std::nullopt);

/// Delimited report, one row per configuration, header first.
void write_report_csv(std::ostream& out, const MetricsReport& report);
MetricsReport read_report_csv(std::istream& in);

/// Structured summary (JSON) with per-configuration rows and the collision
/// table.
void write_summary_json(std::ostream& out, const MetricsReport& report);

/// Collision rates with and without measurement noise per planner, both
/// denominations, as a text table.
void write_collision_table(std::ostream& out, const MetricsReport& report);

/// Plot-ready series: automation level vs metric, one column per scenario.
void write_series_csv(std::ostream& out, const MetricsReport& report, const std::string& metric,
                      PlannerKind planner, bool noise);

}  // namespace aim
