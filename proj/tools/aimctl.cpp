// aimctl: train, evaluate, estimate-noise, report, simulate.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aim/evaluation.hpp"
#include "aim/nn/checkpoint.hpp"
#include "aim/td3.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace aim;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Manifest {
  std::string subcommand;
  Config config;
  std::uint64_t seed = 0;
  fs::path output;
  std::vector<fs::path> checkpoints;
};

void write_manifest(const fs::path& file, const Manifest& m) {
  nlohmann::ordered_json j;
  j["subcommand"] = m.subcommand;
  j["version"] = AIM_VERSION;
  j["precision_bits"] = sizeof(nn::Scalar) * 8;
  j["seed"] = m.seed;
  j["output"] = m.output.generic_string();
  j["checkpoints"] = nlohmann::ordered_json::array();
  for (const auto& c : m.checkpoints) j["checkpoints"].push_back(c.generic_string());
  j["config"] = m.config.to_string();
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write manifest " + file.string());
  out << j.dump(2) << '\n';
}

fs::path sibling_manifest(const fs::path& target) {
  return fs::path(target.string() + ".manifest.json");
}

Config load_config_file(const fs::path& file, const char* flag) {
  if (!fs::is_regular_file(file)) {
    throw UsageError(std::string(flag) + ": file not found: " + file.string());
  }
  return Config::load(file);
}

bool parse_on_off(const std::string& s, const char* flag) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw UsageError(std::string(flag) + " expects on or off, got '" + s + "'");
}

/// Actor whose width matches the checkpoint.
std::unique_ptr<nn::Actor> load_actor(const fs::path& file) {
  if (!fs::is_regular_file(file)) {
    throw UsageError("--checkpoint: file not found: " + file.string());
  }
  return nn::load_actor(file);
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  int jobs = 1;
};

int run_train(const TrainArgs& a) {
  const IntersectionLayout layout = build_default_layout();
  Config cfg = load_config_file(a.config, "--config");
  Td3Config tc = load_td3_config(cfg);
  if (a.seed) tc.seed = *a.seed;
  if (a.steps) tc.total_steps = *a.steps;
  tc.validate();
  const EnvConfig env = load_env_config(cfg, layout);
  const fs::path out(a.out);
  const TrainSummary s = train(tc, env, layout, out, &std::cerr);

  Manifest m;
  m.subcommand = "train";
  store_env_config(env, m.config);
  store_td3_config(tc, m.config);
  m.seed = tc.seed;
  m.output = out;
  m.checkpoints.push_back(s.checkpoint);
  write_manifest(out / "manifest.json", m);
  std::cout << "trained " << s.steps << " steps in " << s.episodes << " episodes; policy "
            << s.checkpoint.generic_string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string campaign;
  std::string checkpoint;
  std::string noise;
  std::vector<std::string> planners;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool records = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const IntersectionLayout layout = build_default_layout();
  Config cfg = load_config_file(a.campaign, "--campaign");
  CampaignSpec spec = load_campaign(cfg);
  if (!a.planners.empty()) {
    spec.planners.clear();
    for (const auto& p : a.planners) {
      try {
        spec.planners.push_back(parse_planner(p));
      } catch (const InputError& e) {
        throw UsageError(std::string("--planner: ") + e.what());
      }
    }
  }
  const bool rl_requested =
      std::find(spec.planners.begin(), spec.planners.end(), PlannerKind::rl) != spec.planners.end();
  if (!a.planners.empty() && rl_requested && a.checkpoint.empty()) {
    throw UsageError("--planner rl requires --checkpoint <file>");
  }
  if (!a.noise.empty()) {
    if (a.noise == "both") {
      spec.noise = {false, true};
    } else {
      spec.noise = {parse_on_off(a.noise, "--noise")};
    }
  }
  if (a.seed) spec.seed = *a.seed;
  spec.validate();

  std::unique_ptr<nn::Actor> actor;
  if (!a.checkpoint.empty()) actor = load_actor(a.checkpoint);

  const EnvConfig base = load_env_config(cfg, layout);
  const fs::path out(a.out);
  fs::create_directories(out);
  std::optional<fs::path> record_dir;
  if (a.records) record_dir = out / "records";
  const MetricsReport report = run_campaign(spec, layout, base, actor.get(), a.jobs, record_dir);

  {
    std::ofstream f(out / "report.csv");
    write_report_csv(f, report);
  }
  {
    std::ofstream f(out / "summary.json");
    write_summary_json(f, report);
  }
  {
    std::ofstream f(out / "collision_table.txt");
    write_collision_table(f, report);
  }
  Manifest m;
  m.subcommand = "evaluate";
  store_env_config(base, m.config);
  store_campaign(spec, m.config);
  m.seed = spec.seed;
  m.output = out;
  if (!a.checkpoint.empty()) m.checkpoints.emplace_back(a.checkpoint);
  write_manifest(out / "manifest.json", m);

  for (const auto& r : report.rows) {
    if (r.skipped) {
      std::cout << "skipped scenario " << r.scenario << " level " << format_double(r.level) << ' '
                << to_string(r.planner) << ": " << r.note << '\n';
    }
  }
  write_collision_table(std::cout, report);
  return kOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string log;
  std::string out;
};

int run_estimate(const EstimateArgs& a) {
  if (!fs::is_regular_file(a.log)) throw UsageError("--log: file not found: " + a.log);
  std::ifstream in(a.log);
  const DriveLog log = read_drive_log(in);
  const auto tracks = align_tracks(log);
  NoiseParamSet fitted;
  std::cout << "Noise process parameters\n";
  std::cout << "quantity  phi       sigma2       pairs\n";
  for (const auto& t : tracks) {
    const Ar1Estimate e = estimate(t);
    fitted[t.quantity] = e.params;
    std::ostringstream line;
    line << std::left << std::setw(10) << to_string(t.quantity) << std::fixed
         << std::setprecision(4) << std::setw(10) << e.params.phi << std::setprecision(6)
         << std::setw(13) << e.params.sigma2 << e.terms;
    if (e.degenerate) line << "  (degenerate)";
    std::cout << line.str() << '\n';
  }
  Config params;
  store_noise_params(fitted, params);
  const fs::path out(a.out);
  ensure_parent(out);
  params.save(out);

  Manifest m;
  m.subcommand = "estimate-noise";
  m.config = params;
  m.output = out;
  write_manifest(sibling_manifest(out), m);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in;
  std::string format = "summary";
  std::string metric = "flow";
  std::string planner;
  std::string noise = "off";
  std::string out;
};

int run_report(const ReportArgs& a) {
  const fs::path file = fs::path(a.in) / "report.csv";
  if (!fs::is_regular_file(file)) throw UsageError("--in: no report.csv in " + a.in);
  std::ifstream in(file);
  const MetricsReport report = read_report_csv(in);

  std::ofstream file_out;
  if (!a.out.empty()) {
    ensure_parent(a.out);
    file_out.open(a.out);
    if (!file_out) throw std::runtime_error("cannot write " + a.out);
  }
  std::ostream& out = a.out.empty() ? std::cout : file_out;
  if (a.format == "summary") {
    write_summary_json(out, report);
  } else if (a.format == "table") {
    write_collision_table(out, report);
  } else {
    PlannerKind planner = PlannerKind::efifo;
    if (!a.planner.empty()) {
      try {
        planner = parse_planner(a.planner);
      } catch (const InputError& e) {
        throw UsageError(std::string("--planner: ") + e.what());
      }
    } else if (!report.rows.empty()) {
      planner = report.rows.front().planner;
    }
    try {
      write_series_csv(out, report, a.metric, planner, parse_on_off(a.noise, "--noise"));
    } catch (const InputError& e) {
      throw UsageError(std::string("--metric: ") + e.what());
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string planner = "none";
  std::string checkpoint;
  std::string record;
  std::string noise;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  const IntersectionLayout layout = build_default_layout();
  Config cfg = load_config_file(a.scenario, "--scenario");
  PlannerKind planner;
  try {
    planner = parse_planner(a.planner);
  } catch (const InputError& e) {
    throw UsageError(std::string("--planner: ") + e.what());
  }
  if (planner == PlannerKind::rl && a.checkpoint.empty()) {
    throw UsageError("--planner rl requires --checkpoint <file>");
  }
  EnvConfig env = load_env_config(cfg, layout);
  if (!a.noise.empty()) env.observation_noise = parse_on_off(a.noise, "--noise");
  if (a.seed) env.scenario.rng_seed = *a.seed;
  std::unique_ptr<nn::Actor> actor;
  if (!a.checkpoint.empty()) actor = load_actor(a.checkpoint);

  const EpisodeRecord rec = run_episode(layout, env, planner, actor.get(), env.scenario.rng_seed);
  const fs::path out(a.record);
  ensure_parent(out);
  {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out.string());
    write_record(f, rec);
  }
  const EpisodeMetrics m = compute_metrics(rec, layout, 0.0);
  std::cout << "steps " << rec.steps.size() << ", crossings " << m.crossings << ", flow "
            << format_double(m.flow) << " veh/h, collisions " << m.collision_events_total << '\n';

  Manifest man;
  man.subcommand = "simulate";
  store_env_config(env, man.config);
  man.config.set("simulate.planner", std::string(to_string(planner)));
  man.seed = env.scenario.rng_seed;
  man.output = out;
  if (!a.checkpoint.empty()) man.checkpoints.emplace_back(a.checkpoint);
  write_manifest(sibling_manifest(out), man);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-traffic intersection management toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the graph policy with TD3");
  train->add_option("--config", train_args.config, "Training config file")->required();
  train->add_option("--out", train_args.out, "Output directory")->required();
  train->add_option("--seed", train_args.seed, "Overrides td3.seed");
  train->add_option("--steps", train_args.steps, "Overrides td3.total_steps");
  train->add_option("--jobs", train_args.jobs, "Worker threads (training runs single-threaded)")
      ->check(CLI::PositiveNumber);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Run an evaluation campaign");
  evaluate->add_option("--campaign", eval_args.campaign, "Campaign config file")->required();
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Policy checkpoint for rl");
  evaluate->add_option("--noise", eval_args.noise, "on, off or both (default: campaign file)");
  evaluate->add_option("--planner", eval_args.planners, "rl, efifo or none; repeatable")
      ->delimiter(',');
  evaluate->add_option("--out", eval_args.out, "Output directory")->required();
  evaluate->add_option("--seed", eval_args.seed, "Overrides campaign.seed");
  evaluate->add_option("--jobs", eval_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
  evaluate->add_flag("--records", eval_args.records, "Write every episode record to <out>/records");

  EstimateArgs est_args;
  auto* estimate_cmd = app.add_subcommand("estimate-noise", "Fit AR(1) noise from a drive log");
  estimate_cmd->add_option("--log", est_args.log, "Drive log (delimited text)")->required();
  estimate_cmd->add_option("--out", est_args.out, "Parameter file to write")->required();

  ReportArgs rep_args;
  auto* report = app.add_subcommand("report", "Render an evaluation report");
  report->add_option("--in", rep_args.in, "Evaluation output directory")->required();
  report->add_option("--format", rep_args.format, "csv, summary or table")
      ->check(CLI::IsMember({"csv", "summary", "table"}));
  report->add_option("--metric", rep_args.metric, "Series metric for --format csv");
  report->add_option("--planner", rep_args.planner, "Series planner for --format csv");
  report->add_option("--noise", rep_args.noise, "Series noise setting for --format csv");
  report->add_option("--out", rep_args.out, "Write to a file instead of stdout");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run one episode and export its record");
  simulate->add_option("--scenario", sim_args.scenario, "Scenario config file")->required();
  simulate->add_option("--planner", sim_args.planner, "none, efifo or rl");
  simulate->add_option("--checkpoint", sim_args.checkpoint, "Policy checkpoint for rl");
  simulate->add_option("--record", sim_args.record, "Episode record to write")->required();
  simulate->add_option("--noise", sim_args.noise, "on or off (default: scenario file)");
  simulate->add_option("--seed", sim_args.seed, "Overrides scenario.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(train_args);
    if (*evaluate) return run_evaluate(eval_args);
    if (*estimate_cmd) return run_estimate(est_args);
    if (*report) return run_report(rep_args);
    if (*simulate) return run_simulate(sim_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
