#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aim/evaluation.hpp"
#include "aim/nn/network.hpp"

namespace aim {
namespace {

const IntersectionLayout& layout() {
  static const IntersectionLayout l = build_default_layout();
  return l;
}

std::vector<TracePoint> constant_trace(double fraction, int steps, const PathInfo& path) {
  std::vector<TracePoint> t;
  for (int k = 0; k < steps; ++k) {
    const double s = 0.5 * k;
    t.push_back({fraction * path.speed_limit_at(s), s});
  }
  return t;
}

TEST(Metrics, DelayClosedForms) {
  const auto& path = layout().path(4);
  EXPECT_EQ(delay(constant_trace(1.0, 100, path), path), 0.0);
  EXPECT_EQ(delay(constant_trace(0.0, 100, path), path), 100.0);
  EXPECT_EQ(delay(constant_trace(0.5, 100, path), path), 50.0);
  EXPECT_EQ(delay(constant_trace(0.0, 37, path), path), 37.0);
}

TEST(Metrics, DelayUsesLocalLimit) {
  const auto& path = layout().path(layout().path_id(Approach::east, Turn::left));
  const double in_box = 0.5 * (path.region_begin + path.region_end);
  std::vector<TracePoint> t{{path.region_limit, in_box}, {path.region_limit, 10.0}};
  EXPECT_DOUBLE_EQ(delay(t, path), 1.0 - path.region_limit / path.approach_limit);
}

TEST(Metrics, FlowRate) {
  EXPECT_EQ(flow_rate(10, 600.0), 60.0);
  EXPECT_EQ(flow_rate(0, 600.0), 0.0);
  EXPECT_THROW(flow_rate(1, 0.0), InputError);
}

EpisodeRecord synthetic_record(int steps, int every) {
  EpisodeRecord rec;
  rec.dt = 0.1;
  VehicleId next = 1;
  for (int k = 0; k < steps; ++k) {
    StepRecord st;
    st.time = (k + 1) * 0.1;
    if (k % every == every - 1) st.completed.push_back(next++);
    rec.steps.push_back(st);
  }
  return rec;
}

TEST(Metrics, ConcatenationKeepsRate) {
  const auto one = synthetic_record(6000, 600);
  auto two = one;
  two.steps.insert(two.steps.end(), one.steps.begin(), one.steps.end());
  const auto m1 = compute_metrics(one, layout(), 0.0);
  const auto m2 = compute_metrics(two, layout(), 0.0);
  EXPECT_EQ(m1.crossings, 10u);
  EXPECT_NEAR(m1.flow, 60.0, 1e-9);
  EXPECT_NEAR(m2.flow, m1.flow, 1e-9);
}

TEST(Metrics, WarmupExcluded) {
  const auto rec = synthetic_record(3000, 100);
  const auto m = compute_metrics(rec, layout(), 30.0);
  EXPECT_DOUBLE_EQ(m.duration, 270.0);
  EXPECT_EQ(m.crossings, 27u);
}

EnvConfig small_env() {
  EnvConfig env;
  env.drivers.mode = DriverMode::eidm;
  return env;
}

CampaignSpec small_campaign() {
  CampaignSpec spec;
  spec.scenarios = {2};
  spec.levels = {0.0, 0.5};
  spec.planners = {PlannerKind::efifo};
  spec.runs = 2;
  spec.noise = {false, true};
  spec.episode_seconds = 60.0;
  spec.warmup_seconds = 10.0;
  return spec;
}

std::string csv_of(const MetricsReport& r) {
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

TEST(Campaign, PlannersIdenticalWithoutAvs) {
  auto spec = small_campaign();
  spec.levels = {0.0};
  spec.noise = {false};
  spec.planners = {PlannerKind::none, PlannerKind::efifo, PlannerKind::rl};
  nn::Actor actor;
  const auto report = run_campaign(spec, layout(), small_env(), &actor);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& r : report.rows) {
    EXPECT_FALSE(r.skipped);
    EXPECT_EQ(r.flow_mean, report.rows[0].flow_mean);
    EXPECT_EQ(r.delay_mv, report.rows[0].delay_mv);
    EXPECT_EQ(r.velocity_major, report.rows[0].velocity_major);
    EXPECT_EQ(r.crossings, report.rows[0].crossings);
  }
}

TEST(Campaign, MissingCheckpointSkipsRl) {
  auto spec = small_campaign();
  spec.levels = {0.5};
  spec.noise = {false};
  spec.planners = {PlannerKind::rl};
  const auto report = run_campaign(spec, layout(), small_env(), nullptr);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_TRUE(report.rows[0].skipped);
  EXPECT_FALSE(report.rows[0].note.empty());
}

TEST(Campaign, DeterministicAcrossInvocationsAndJobs) {
  const auto spec = small_campaign();
  const auto a = csv_of(run_campaign(spec, layout(), small_env(), nullptr, 1));
  const auto b = csv_of(run_campaign(spec, layout(), small_env(), nullptr, 1));
  const auto c = csv_of(run_campaign(spec, layout(), small_env(), nullptr, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Campaign, MetricsRecomputedFromSavedRecords) {
  auto spec = small_campaign();
  spec.levels = {0.5};
  spec.noise = {true};
  spec.runs = 1;
  const auto dir = std::filesystem::temp_directory_path() / "aim_eval_records";
  std::filesystem::remove_all(dir);
  const auto env = small_env();
  const auto report = run_campaign(spec, layout(), env, nullptr, 1, dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  ASSERT_EQ(files.size(), 1u);
  std::ifstream in(files[0]);
  const auto rec = read_record(in, env.scenario.step_dt);
  const auto m = compute_metrics(rec, layout(), spec.warmup_seconds);
  const auto& row = report.rows.at(0);
  EXPECT_EQ(m.flow, row.flow_mean);
  EXPECT_EQ(m.crossings, row.crossings);
  EXPECT_EQ(m.velocity_major.count, row.samples_major);
  EXPECT_DOUBLE_EQ(m.delay_mv.mean(), row.delay_mv);

  // same episode run live
  const auto live_env = campaign_env(env, spec, 2, 0.5, true, layout());
  const auto live = run_episode(layout(), live_env, PlannerKind::efifo, nullptr,
                                episode_seed(spec.seed, 2, 0));
  const auto lm = compute_metrics(live, layout(), spec.warmup_seconds);
  EXPECT_EQ(lm.flow, m.flow);
  EXPECT_EQ(lm.delay_av.sum, m.delay_av.sum);
  std::filesystem::remove_all(dir);
}

TEST(Campaign, RoadPartitionIsExact) {
  EnvConfig env = campaign_env(small_env(), small_campaign(), 3, 0.5, false, layout());
  const auto rec = run_episode(layout(), env, PlannerKind::efifo, nullptr, 5);
  const auto m = compute_metrics(rec, layout(), 10.0);
  std::size_t total = 0;
  for (std::size_t k = 100; k < rec.steps.size(); ++k) total += rec.steps[k].vehicles.size();
  EXPECT_EQ(m.velocity_major.count + m.velocity_minor.count, total);
  EXPECT_GT(m.velocity_minor.count, 0u);
}

TEST(Campaign, ReportCsvRoundTrip) {
  auto spec = small_campaign();
  spec.planners = {PlannerKind::efifo, PlannerKind::rl};
  const auto report = run_campaign(spec, layout(), small_env(), nullptr);
  const auto text = csv_of(report);
  std::istringstream in(text);
  const auto back = read_report_csv(in);
  EXPECT_EQ(csv_of(back), text);
  ASSERT_EQ(back.rows.size(), report.rows.size());
  for (const auto& r : back.rows) {
    EXPECT_GE(r.flow_std, 0.0);
    EXPECT_GE(r.collision_rate_episode, 0.0);
    EXPECT_LE(r.collision_rate_episode, 100.0);
  }
}

TEST(Campaign, SummaryAndTables) {
  const auto report = run_campaign(small_campaign(), layout(), small_env(), nullptr);
  std::ostringstream table;
  write_collision_table(table, report);
  EXPECT_NE(table.str().find("Collision rates with and without measurement noise"),
            std::string::npos);
  EXPECT_NE(table.str().find("efifo"), std::string::npos);
  std::ostringstream json;
  write_summary_json(json, report);
  EXPECT_NE(json.str().find("\"collision_rates\""), std::string::npos);
  std::ostringstream series;
  write_series_csv(series, report, "flow", PlannerKind::efifo, false);
  EXPECT_EQ(series.str().substr(0, series.str().find('\n')), "level,scenario_2");
  EXPECT_THROW(write_series_csv(series, report, "bogus", PlannerKind::efifo, false), InputError);
}

TEST(Campaign, SpecValidationAndConfig) {
  CampaignSpec spec;
  spec.runs = 0;
  EXPECT_THROW(spec.validate(), InputError);
  spec = CampaignSpec{};
  spec.levels = {1.2};
  EXPECT_THROW(spec.validate(), InputError);
  spec = small_campaign();
  Config cfg;
  store_campaign(spec, cfg);
  const auto back = load_campaign(cfg);
  EXPECT_EQ(back.scenarios, spec.scenarios);
  EXPECT_EQ(back.levels, spec.levels);
  EXPECT_EQ(back.noise, spec.noise);
  EXPECT_EQ(back.runs, spec.runs);
}

TEST(Campaign, OccupancyMonitorDetectsOverlap) {
  const PathId n = layout().path_id(Approach::north, Turn::straight);
  const PathId e = layout().path_id(Approach::east, Turn::straight);
  const auto& cp = layout().conflicts(n, e).front();
  EpisodeRecord rec;
  StepRecord st;
  st.vehicles.push_back({1, VehicleKind::av, n, cp.s_a + 1.0});
  st.vehicles.push_back({2, VehicleKind::mv, e, cp.s_b - 1.0});
  rec.steps.push_back(st);
  EXPECT_EQ(occupancy_overlaps(rec, layout()), 1u);
  rec.steps[0].vehicles[1].s = cp.s_b - 3.0;
  EXPECT_EQ(occupancy_overlaps(rec, layout()), 0u);
}

}  // namespace
}  // namespace aim
