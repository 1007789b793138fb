#include "aim/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "aim/nn/network.hpp"
#include "json.hpp"

namespace aim {

double delay(std::span<const TracePoint> trace, const PathInfo& path) {
  double d = 0.0;
  for (const auto& p : trace) {
    const double lim = path.speed_limit_at(p.s);
    if (lim <= 0.0) throw InputError("delay: speed limit must be positive along the trace");
    d += 1.0 - p.v / lim;
  }
  return d;
}

double flow_rate(std::size_t crossings, double duration_s) {
  if (!(duration_s > 0.0)) throw InputError("flow_rate: duration must be positive");
  return static_cast<double>(crossings) * 3600.0 / duration_s;
}

EpisodeMetrics compute_metrics(const EpisodeRecord& rec, const IntersectionLayout& layout,
                               double warmup_s) {
  EpisodeMetrics m;
  if (!(rec.dt > 0.0)) throw InputError("episode record needs a positive step length");
  const auto n = rec.steps.size();
  // step k covers (k dt, (k + 1) dt]
  const auto warmup = std::min(n, static_cast<std::size_t>(std::max(0L, std::lround(warmup_s / rec.dt))));
  m.duration = static_cast<double>(n - warmup) * rec.dt;

  struct Track {
    VehicleKind kind = VehicleKind::mv;
    PathId path = 0;
    std::size_t first_step = 0;
    std::vector<TracePoint> trace;
  };
  std::unordered_map<VehicleId, Track> tracks;
  std::vector<VehicleId> finished;

  for (std::size_t k = 0; k < n; ++k) {
    const auto& st = rec.steps[k];
    const bool evaluated = k >= warmup;
    for (const auto& v : st.vehicles) {
      auto [it, fresh] = tracks.try_emplace(v.id);
      if (fresh) {
        it->second.kind = v.kind;
        it->second.path = v.path;
        it->second.first_step = k;
      }
      it->second.trace.push_back({v.v, v.s});
      if (evaluated) {
        const RoadClass road = layout.approach(layout.path(v.path).origin).road;
        (road == RoadClass::major ? m.velocity_major : m.velocity_minor).add(v.v);
      }
    }
    m.collision_events_total += st.collision_events;
    if (!evaluated) continue;
    m.collision_events += st.collision_events;
    m.crossings += st.completed.size();
    finished.insert(finished.end(), st.completed.begin(), st.completed.end());
  }
  for (VehicleId id : finished) {
    auto it = tracks.find(id);
    if (it == tracks.end()) continue;
    const Track& t = it->second;
    if (t.first_step < warmup) continue;
    const double d = delay(t.trace, layout.path(t.path));
    (t.kind == VehicleKind::av ? m.delay_av : m.delay_mv).add(d);
  }
  m.flow = m.duration > 0.0 ? flow_rate(m.crossings, m.duration) : 0.0;
  return m;
}

std::size_t occupancy_overlaps(const EpisodeRecord& rec, const IntersectionLayout& layout,
                               double vehicle_length) {
  const double half = vehicle_length / 2.0;
  std::size_t count = 0;
  for (const auto& st : rec.steps) {
    const auto& vs = st.vehicles;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      for (std::size_t j = i + 1; j < vs.size(); ++j) {
        if (vs[i].path == vs[j].path) continue;
        for (const auto& cp : layout.conflicts(vs[i].path, vs[j].path)) {
          if (std::abs(vs[i].s - cp.s_a) < half && std::abs(vs[j].s - cp.s_b) < half) {
            ++count;
            break;
          }
        }
      }
    }
  }
  return count;
}

// ---------------------------------------------------------------------------
// campaign spec

void CampaignSpec::validate() const {
  if (scenarios.empty()) throw InputError("campaign: no scenarios");
  for (int s : scenarios) {
    if (s < 1 || s > kScenarioCount) {
      throw InputError("campaign: scenario " + std::to_string(s) + " out of range 1.." +
                       std::to_string(kScenarioCount));
    }
  }
  if (levels.empty()) throw InputError("campaign: no automation levels");
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw InputError("campaign: automation level outside [0, 1]");
  }
  if (planners.empty()) throw InputError("campaign: no planners");
  if (noise.empty()) throw InputError("campaign: no noise setting");
  if (runs < 1) throw InputError("campaign: runs must be at least 1");
  if (!(warmup_seconds >= 0.0) || !(episode_seconds > warmup_seconds)) {
    throw InputError("campaign: need 0 <= warmup_seconds < episode_seconds");
  }
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(item.substr(a, item.find_last_not_of(" \t") - a + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& i : items) {
    if (!s.empty()) s += ',';
    s += i;
  }
  return s;
}

bool parse_switch(const std::string& s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError("noise setting must be on or off, got '" + s + "'");
}

}  // namespace

CampaignSpec load_campaign(const Config& cfg) {
  CampaignSpec spec;
  if (cfg.has("campaign.scenarios")) {
    spec.scenarios.clear();
    for (double v : cfg.get_list("campaign.scenarios")) {
      if (v != std::floor(v)) throw ConfigError("campaign.scenarios must be integers");
      spec.scenarios.push_back(static_cast<int>(v));
    }
  }
  spec.levels = cfg.get_list("campaign.levels", spec.levels);
  if (cfg.has("campaign.planners")) {
    spec.planners.clear();
    for (const auto& w : split_words(cfg.get<std::string>("campaign.planners", ""))) {
      spec.planners.push_back(parse_planner(w));
    }
  }
  if (cfg.has("campaign.noise")) {
    spec.noise.clear();
    for (const auto& w : split_words(cfg.get<std::string>("campaign.noise", ""))) {
      spec.noise.push_back(parse_switch(w));
    }
  }
  spec.runs = cfg.get("campaign.runs", spec.runs);
  spec.seed = cfg.get("campaign.seed", spec.seed);
  spec.episode_seconds = cfg.get("campaign.episode_seconds", spec.episode_seconds);
  spec.warmup_seconds = cfg.get("campaign.warmup_seconds", spec.warmup_seconds);
  const auto driver = cfg.get<std::string>("campaign.driver", "eidm");
  if (driver == "idm") {
    spec.driver = DriverMode::idm;
  } else if (driver == "eidm") {
    spec.driver = DriverMode::eidm;
  } else {
    throw ConfigError("campaign.driver must be 'idm' or 'eidm', got '" + driver + "'");
  }
  spec.validate();
  return spec;
}

void store_campaign(const CampaignSpec& spec, Config& cfg) {
  std::vector<double> sc(spec.scenarios.begin(), spec.scenarios.end());
  cfg.set_list("campaign.scenarios", sc);
  cfg.set_list("campaign.levels", spec.levels);
  std::vector<std::string> planners;
  for (auto p : spec.planners) planners.emplace_back(to_string(p));
  cfg.set("campaign.planners", join(planners));
  std::vector<std::string> noise;
  for (bool n : spec.noise) noise.emplace_back(n ? "on" : "off");
  cfg.set("campaign.noise", join(noise));
  cfg.set("campaign.runs", spec.runs);
  cfg.set("campaign.seed", spec.seed);
  cfg.set("campaign.episode_seconds", format_double(spec.episode_seconds));
  cfg.set("campaign.warmup_seconds", format_double(spec.warmup_seconds));
  cfg.set("campaign.driver", std::string(spec.driver == DriverMode::idm ? "idm" : "eidm"));
}

// ---------------------------------------------------------------------------
// campaign execution

std::uint64_t episode_seed(std::uint64_t campaign_seed, int scenario, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(campaign_seed),
                    static_cast<std::uint32_t>(campaign_seed >> 32),
                    static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(run)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

EnvConfig campaign_env(const EnvConfig& base, const CampaignSpec& spec, int scenario,
                       double level, bool noise, const IntersectionLayout& layout) {
  EnvConfig env = base;
  const ScenarioConfig preset = demand_scenario(scenario, level, layout);
  env.scenario.demand = preset.demand;
  env.scenario.automation_level = level;
  env.scenario.episode_length =
      static_cast<int>(std::lround(spec.episode_seconds / env.scenario.step_dt));
  env.drivers.mode = spec.driver;
  env.observation_noise = noise;
  env.terminate_on_collision = false;
  env.scenario.validate();
  return env;
}

namespace {

struct ConfigKey {
  int scenario;
  double level;
  PlannerKind planner;
  bool noise;
};

std::string record_name(const ConfigKey& k, int run) {
  std::ostringstream ss;
  ss << "s" << k.scenario << "_l" << format_double(k.level) << '_' << to_string(k.planner)
     << (k.noise ? "_noise" : "_clean") << "_r" << run << ".ndjson";
  return ss.str();
}

ConfigResult aggregate(const ConfigKey& key, const std::vector<EpisodeMetrics>& eps) {
  ConfigResult r;
  r.scenario = key.scenario;
  r.level = key.level;
  r.planner = key.planner;
  r.noise = key.noise;
  r.runs = static_cast<int>(eps.size());
  RunningStat dav;
  RunningStat dmv;
  RunningStat vmaj;
  RunningStat vmin;
  double flow_sum = 0.0;
  for (const auto& e : eps) {
    flow_sum += e.flow;
    dav.merge(e.delay_av);
    dmv.merge(e.delay_mv);
    vmaj.merge(e.velocity_major);
    vmin.merge(e.velocity_minor);
    r.crossings += e.crossings;
    r.collision_events += e.collision_events;
    if (e.collision_events > 0) ++r.episodes_with_collision;
  }
  const double n = static_cast<double>(eps.size());
  r.flow_mean = flow_sum / n;
  if (eps.size() > 1) {
    double ss = 0.0;
    for (const auto& e : eps) ss += (e.flow - r.flow_mean) * (e.flow - r.flow_mean);
    r.flow_std = std::sqrt(ss / (n - 1.0));
  }
  r.delay_av = dav.mean();
  r.delay_mv = dmv.mean();
  RunningStat all = dav;
  all.merge(dmv);
  r.delay_all = all.mean();
  r.velocity_major = vmaj.mean();
  r.velocity_minor = vmin.mean();
  r.samples_major = vmaj.count;
  r.samples_minor = vmin.count;
  r.collision_rate_crossing =
      r.crossings ? 100.0 * static_cast<double>(r.collision_events) /
                        static_cast<double>(r.crossings)
                  : 0.0;
  r.collision_rate_episode = 100.0 * r.episodes_with_collision / n;
  return r;
}

}  // namespace

MetricsReport run_campaign(const CampaignSpec& spec, const IntersectionLayout& layout,
                           const EnvConfig& base, nn::Actor* actor, int jobs,
                           const std::optional<std::filesystem::path>& record_dir) {
  spec.validate();
  if (jobs < 1) throw InputError("jobs must be at least 1");
  if (record_dir) std::filesystem::create_directories(*record_dir);

  std::vector<ConfigKey> keys;
  for (int s : spec.scenarios) {
    for (double l : spec.levels) {
      for (PlannerKind p : spec.planners) {
        for (bool nz : spec.noise) keys.push_back({s, l, p, nz});
      }
    }
  }
  struct Task {
    std::size_t config;
    int run;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    if (keys[c].planner == PlannerKind::rl && !actor) continue;
    for (int r = 0; r < spec.runs; ++r) tasks.push_back({c, r});
  }

  std::vector<EpisodeMetrics> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const ConfigKey& k = keys[tasks[i].config];
        const EnvConfig env = campaign_env(base, spec, k.scenario, k.level, k.noise, layout);
        const auto rec = run_episode(layout, env, k.planner, actor,
                                     episode_seed(spec.seed, k.scenario, tasks[i].run));
        slots[i] = compute_metrics(rec, layout, spec.warmup_seconds);
        if (record_dir) {
          std::ofstream out(*record_dir / record_name(k, tasks[i].run));
          if (!out) throw std::runtime_error("cannot write episode record in " + record_dir->string());
          write_record(out, rec);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  MetricsReport report;
  std::size_t t = 0;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    if (keys[c].planner == PlannerKind::rl && !actor) {
      ConfigResult r;
      r.scenario = keys[c].scenario;
      r.level = keys[c].level;
      r.planner = keys[c].planner;
      r.noise = keys[c].noise;
      r.skipped = true;
      r.note = "no checkpoint for rl planner";
      report.rows.push_back(r);
      continue;
    }
    std::vector<EpisodeMetrics> eps(slots.begin() + static_cast<std::ptrdiff_t>(t),
                                    slots.begin() + static_cast<std::ptrdiff_t>(t + spec.runs));
    t += static_cast<std::size_t>(spec.runs);
    report.rows.push_back(aggregate(keys[c], eps));
  }
  return report;
}

// ---------------------------------------------------------------------------
// output

namespace {

constexpr const char* kReportHeader =
    "scenario,level,planner,noise,skipped,note,runs,flow_mean,flow_std,delay_av,delay_mv,"
    "delay_all,velocity_major,velocity_minor,samples_major,samples_minor,crossings,"
    "collision_events,episodes_with_collision,collision_rate_crossing,collision_rate_episode";

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

template <typename T>
T parse_field(const std::string& s, const char* name) {
  std::istringstream ss(s);
  T v{};
  if (!(ss >> v) || !ss.eof()) {
    throw InputError(std::string("report: malformed ") + name + " '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const char* name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("report: malformed ") + name + " '" + s + "'");
  }
}

nlohmann::ordered_json row_json(const ConfigResult& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["level"] = r.level;
  j["planner"] = std::string(to_string(r.planner));
  j["noise"] = r.noise;
  j["skipped"] = r.skipped;
  if (!r.note.empty()) j["note"] = r.note;
  j["runs"] = r.runs;
  j["flow_mean"] = r.flow_mean;
  j["flow_std"] = r.flow_std;
  j["delay_av"] = r.delay_av;
  j["delay_mv"] = r.delay_mv;
  j["delay_all"] = r.delay_all;
  j["velocity_major"] = r.velocity_major;
  j["velocity_minor"] = r.velocity_minor;
  j["samples_major"] = r.samples_major;
  j["samples_minor"] = r.samples_minor;
  j["crossings"] = r.crossings;
  j["collision_events"] = r.collision_events;
  j["episodes_with_collision"] = r.episodes_with_collision;
  j["collision_rate_crossing"] = r.collision_rate_crossing;
  j["collision_rate_episode"] = r.collision_rate_episode;
  return j;
}

struct CollisionTotals {
  std::size_t events = 0;
  std::size_t crossings = 0;
  int episodes = 0;
  int episodes_with_collision = 0;
  bool present = false;

  double per_crossing() const {
    return crossings ? 100.0 * static_cast<double>(events) / static_cast<double>(crossings) : 0.0;
  }
  double per_episode() const {
    return episodes ? 100.0 * episodes_with_collision / episodes : 0.0;
  }
};

// planner -> [noise-free, noisy]
std::map<PlannerKind, std::array<CollisionTotals, 2>> collision_totals(const MetricsReport& rep) {
  std::map<PlannerKind, std::array<CollisionTotals, 2>> out;
  for (const auto& r : rep.rows) {
    if (r.skipped) continue;
    auto& c = out[r.planner][r.noise ? 1 : 0];
    c.present = true;
    c.events += r.collision_events;
    c.crossings += r.crossings;
    c.episodes += r.runs;
    c.episodes_with_collision += r.episodes_with_collision;
  }
  return out;
}

std::string percent(const CollisionTotals& c, bool per_crossing) {
  if (!c.present) return "n/a";
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << (per_crossing ? c.per_crossing() : c.per_episode()) << '%';
  return ss.str();
}

double metric_value(const ConfigResult& r, const std::string& metric) {
  if (metric == "flow") return r.flow_mean;
  if (metric == "flow_std") return r.flow_std;
  if (metric == "delay_av") return r.delay_av;
  if (metric == "delay_mv") return r.delay_mv;
  if (metric == "delay_all") return r.delay_all;
  if (metric == "velocity_major") return r.velocity_major;
  if (metric == "velocity_minor") return r.velocity_minor;
  if (metric == "collision_rate_crossing") return r.collision_rate_crossing;
  if (metric == "collision_rate_episode") return r.collision_rate_episode;
  throw InputError("unknown metric '" + metric +
                   "' (flow, flow_std, delay_av, delay_mv, delay_all, velocity_major, "
                   "velocity_minor, collision_rate_crossing, collision_rate_episode)");
}

}  // namespace

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.scenario << ',' << format_double(r.level) << ',' << to_string(r.planner) << ','
        << (r.noise ? "on" : "off") << ',' << (r.skipped ? 1 : 0) << ',' << sanitize(r.note)
        << ',' << r.runs << ',' << format_double(r.flow_mean) << ',' << format_double(r.flow_std)
        << ',' << format_double(r.delay_av) << ',' << format_double(r.delay_mv) << ','
        << format_double(r.delay_all) << ',' << format_double(r.velocity_major) << ','
        << format_double(r.velocity_minor) << ',' << r.samples_major << ',' << r.samples_minor
        << ',' << r.crossings << ',' << r.collision_events << ',' << r.episodes_with_collision
        << ',' << format_double(r.collision_rate_crossing) << ','
        << format_double(r.collision_rate_episode) << '\n';
  }
}

MetricsReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw InputError("report: missing or unexpected header");
  }
  MetricsReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 21) throw InputError("report: expected 21 fields, got " + std::to_string(f.size()));
    ConfigResult r;
    r.scenario = parse_field<int>(f[0], "scenario");
    r.level = parse_real(f[1], "level");
    r.planner = parse_planner(f[2]);
    r.noise = parse_switch(f[3]);
    r.skipped = parse_field<int>(f[4], "skipped") != 0;
    r.note = f[5];
    r.runs = parse_field<int>(f[6], "runs");
    r.flow_mean = parse_real(f[7], "flow_mean");
    r.flow_std = parse_real(f[8], "flow_std");
    r.delay_av = parse_real(f[9], "delay_av");
    r.delay_mv = parse_real(f[10], "delay_mv");
    r.delay_all = parse_real(f[11], "delay_all");
    r.velocity_major = parse_real(f[12], "velocity_major");
    r.velocity_minor = parse_real(f[13], "velocity_minor");
    r.samples_major = parse_field<std::size_t>(f[14], "samples_major");
    r.samples_minor = parse_field<std::size_t>(f[15], "samples_minor");
    r.crossings = parse_field<std::size_t>(f[16], "crossings");
    r.collision_events = parse_field<std::size_t>(f[17], "collision_events");
    r.episodes_with_collision = parse_field<int>(f[18], "episodes_with_collision");
    r.collision_rate_crossing = parse_real(f[19], "collision_rate_crossing");
    r.collision_rate_episode = parse_real(f[20], "collision_rate_episode");
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

void write_summary_json(std::ostream& out, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["configurations"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) j["configurations"].push_back(row_json(r));
  auto table = nlohmann::ordered_json::array();
  for (const auto& [planner, pair] : collision_totals(report)) {
    nlohmann::ordered_json t;
    t["planner"] = std::string(to_string(planner));
    for (int k = 0; k < 2; ++k) {
      const auto& c = pair[static_cast<std::size_t>(k)];
      const std::string tag = k ? "noisy" : "noise_free";
      if (!c.present) {
        t[tag] = nullptr;
        continue;
      }
      t[tag] = {{"collision_events", c.events},
                {"crossings", c.crossings},
                {"episodes", c.episodes},
                {"episodes_with_collision", c.episodes_with_collision},
                {"rate_per_crossing_percent", c.per_crossing()},
                {"rate_per_episode_percent", c.per_episode()}};
    }
    table.push_back(std::move(t));
  }
  j["collision_rates"] = std::move(table);
  out << j.dump(2) << '\n';
}

void write_collision_table(std::ostream& out, const MetricsReport& report) {
  out << "Collision rates with and without measurement noise\n";
  out << "planner  basis         noise-free  with noise\n";
  for (const auto& [planner, pair] : collision_totals(report)) {
    for (bool per_crossing : {true, false}) {
      std::string name(to_string(planner));
      name.resize(9, ' ');
      std::string basis = per_crossing ? "per crossing" : "per episode";
      basis.resize(14, ' ');
      std::string clean = percent(pair[0], per_crossing);
      clean.resize(12, ' ');
      out << name << basis << clean << percent(pair[1], per_crossing) << '\n';
    }
  }
}

void write_series_csv(std::ostream& out, const MetricsReport& report, const std::string& metric,
                      PlannerKind planner, bool noise) {
  std::set<int> scenarios;
  std::set<double> levels;
  std::map<std::pair<double, int>, double> cell;
  metric_value(ConfigResult{}, metric);
  for (const auto& r : report.rows) {
    if (r.skipped || r.planner != planner || r.noise != noise) continue;
    scenarios.insert(r.scenario);
    levels.insert(r.level);
    cell[{r.level, r.scenario}] = metric_value(r, metric);
  }
  out << "level";
  for (int s : scenarios) out << ",scenario_" << s;
  out << '\n';
  for (double l : levels) {
    out << format_double(l);
    for (int s : scenarios) {
      out << ',';
      auto it = cell.find({l, s});
      if (it != cell.end()) out << format_double(it->second);
    }
    out << '\n';
  }
}

}  // namespace aim
