#include "aim/episode.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "aim/nn/network.hpp"
#include "json.hpp"

namespace aim {

using ojson = nlohmann::ordered_json;

std::string_view to_string(PlannerKind p) {
  switch (p) {
    case PlannerKind::none: return "none";
    case PlannerKind::efifo: return "efifo";
    case PlannerKind::rl: return "rl";
  }
  return "?";
}

PlannerKind parse_planner(std::string_view s) {
  if (s == "none") return PlannerKind::none;
  if (s == "efifo") return PlannerKind::efifo;
  if (s == "rl") return PlannerKind::rl;
  throw InputError("unknown planner '" + std::string(s) + "' (expected none, efifo or rl)");
}

EnvConfig load_env_config(const Config& cfg, const IntersectionLayout& layout) {
  EnvConfig env;
  env.scenario = load_scenario(cfg, layout);
  env.drivers = load_driver_params(cfg);
  env.observation_noise = cfg.get("observation.noise", env.observation_noise);
  env.noise = load_noise_params(cfg);
  env.reward = load_reward_weights(cfg);
  env.graph.min_distance = cfg.get("graph.min_distance", env.graph.min_distance);
  env.graph.clearance = cfg.get("graph.clearance", env.graph.clearance);
  if (!(env.graph.min_distance > 0.0 && env.graph.clearance >= 0.0)) {
    throw ConfigError("graph.min_distance must be positive and graph.clearance non-negative");
  }
  env.efifo = load_efifo_params(cfg);
  return env;
}

void store_env_config(const EnvConfig& env, Config& cfg) {
  store_scenario(env.scenario, cfg);
  store_driver_params(env.drivers, cfg);
  cfg.set("observation.noise", env.observation_noise);
  store_noise_params(env.noise, cfg);
  store_reward_weights(env.reward, cfg);
  cfg.set("graph.min_distance", format_double(env.graph.min_distance));
  cfg.set("graph.clearance", format_double(env.graph.clearance));
  store_efifo_params(env.efifo, cfg);
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x41494dU};
  return Rng(seq);
}

Episode::Episode(const IntersectionLayout& layout, EnvConfig cfg, std::uint64_t seed)
    : layout_(layout),
      cfg_(std::move(cfg)),
      noise_(cfg_.noise, cfg_.observation_noise),
      spawn_rng_(make_stream(seed, 1)),
      driver_rng_(make_stream(seed, 2)),
      noise_rng_(make_stream(seed, 3)),
      av_driver_rng_(make_stream(seed, 4)) {
  cfg_.scenario.validate();
  record_.dt = cfg_.scenario.step_dt;
  world_ = spawn(world_, layout_, cfg_.scenario, spawn_rng_);
  refresh_observation();
}

void Episode::refresh_observation() {
  observation_ = apply_observation_noise(world_, layout_, noise_, noise_rng_);
}

SceneGraph Episode::graph() const { return build_graph(observation_, layout_, cfg_.graph); }

AccelerationMap Episode::rule_commands(PlannerKind planner) {
  AccelerationMap cmds;
  switch (planner) {
    case PlannerKind::efifo:
      return plan(observation_, layout_, cfg_.efifo).commands;
    case PlannerKind::none:
      // no central planner: AVs drive like everyone else
      for (const auto& v : world_.vehicles) {
        if (v.is_av()) {
          cmds[v.id] = yielding_filter(v, world_.vehicles, layout_, cfg_.drivers, &av_driver_rng_);
        }
      }
      return cmds;
    case PlannerKind::rl:
      break;
  }
  throw std::logic_error("rule_commands: rl is not a rule-based planner");
}

Episode::Outcome Episode::step_actions(std::span<const double> joint_action) {
  AccelerationMap cmds;
  std::size_t k = 0;
  for (const auto& v : observation_) {
    if (!v.is_av()) continue;
    if (k >= joint_action.size()) throw InputError("joint action shorter than the AV count");
    cmds[v.id] = denormalize_action(joint_action[k++]);
  }
  if (k != joint_action.size()) throw InputError("joint action longer than the AV count");
  return step_commands(cmds, joint_action);
}

Episode::Outcome Episode::step_commands(const AccelerationMap& commands,
                                        std::span<const double> joint_action) {
  if (done()) throw std::logic_error("episode already finished");
  StepOptions opts;
  opts.remove_collided = !cfg_.terminate_on_collision;
  const std::size_t before = world_.completions.size();
  WorldState next = step(world_, layout_, commands, cfg_.scenario.step_dt,
                         make_manual_driver(world_, layout_, cfg_.drivers, &driver_rng_), opts);
  Outcome out;
  out.collision = next.collision_flag;
  out.reward = total_reward(next, layout_, joint_action, cfg_.reward);
  const std::size_t events = next.collision_events - world_.collision_events;
  next = spawn(next, layout_, cfg_.scenario, spawn_rng_);
  world_ = std::move(next);
  ++steps_;
  terminated_ = out.collision && cfg_.terminate_on_collision;
  out.terminal = terminated_;
  if (recording_) {
    StepRecord sr;
    sr.time = steps_ * cfg_.scenario.step_dt;
    for (const auto& v : world_.vehicles) {
      sr.vehicles.push_back({v.id, v.kind, v.path_id, v.s, v.v, v.a_meas, v.x, v.y, v.heading});
    }
    sr.reward = out.reward;
    sr.collision = out.collision;
    sr.collision_events = events;
    for (std::size_t i = before; i < world_.completions.size(); ++i) {
      sr.completed.push_back(world_.completions[i].id);
    }
    sr.collided = world_.collided;
    record_.steps.push_back(std::move(sr));
  }
  refresh_observation();
  return out;
}

EpisodeRecord run_episode(const IntersectionLayout& layout, const EnvConfig& cfg,
                          PlannerKind planner, nn::Actor* actor, std::uint64_t seed) {
  if (planner == PlannerKind::rl && !actor) throw InputError("rl planner needs a policy");
  Episode ep(layout, cfg, seed);
  ep.enable_recording();
  while (!ep.done()) {
    if (planner == PlannerKind::rl) {
      const SceneGraph g = ep.graph();
      const auto a = nn::act(*actor, g);
      ep.step_actions(a);
    } else {
      ep.step_commands(ep.rule_commands(planner));
    }
  }
  return ep.take_record();
}

void write_record(std::ostream& out, const EpisodeRecord& rec) {
  for (const auto& st : rec.steps) {
    ojson j;
    j["t"] = st.time;
    ojson vs = ojson::array();
    for (const auto& v : st.vehicles) {
      ojson o;
      o["id"] = v.id;
      o["kind"] = std::string(to_string(v.kind));
      o["path"] = v.path;
      o["s"] = v.s;
      o["v"] = v.v;
      o["a"] = v.a;
      o["x"] = v.x;
      o["y"] = v.y;
      o["psi"] = v.psi;
      vs.push_back(std::move(o));
    }
    j["vehicles"] = std::move(vs);
    ojson r;
    r["velocity"] = st.reward.velocity;
    r["action"] = st.reward.action;
    r["idle"] = st.reward.idle;
    r["proximity"] = st.reward.proximity;
    r["collision"] = st.reward.collision;
    r["reluctance"] = st.reward.reluctance;
    r["total"] = st.reward.total;
    j["reward"] = std::move(r);
    j["collision"] = st.collision;
    j["collision_events"] = st.collision_events;
    j["completed"] = st.completed;
    j["collided"] = st.collided;
    out << j.dump() << '\n';
  }
}

EpisodeRecord read_record(std::istream& in, double dt) {
  EpisodeRecord rec;
  rec.dt = dt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = ojson::parse(line);
      StepRecord st;
      st.time = j.at("t").get<double>();
      for (const auto& o : j.at("vehicles")) {
        VehicleRecord v;
        v.id = o.at("id").get<VehicleId>();
        v.kind = o.at("kind").get<std::string>() == "AV" ? VehicleKind::av : VehicleKind::mv;
        v.path = o.at("path").get<PathId>();
        v.s = o.at("s").get<double>();
        v.v = o.at("v").get<double>();
        v.a = o.at("a").get<double>();
        v.x = o.at("x").get<double>();
        v.y = o.at("y").get<double>();
        v.psi = o.at("psi").get<double>();
        st.vehicles.push_back(v);
      }
      const auto& r = j.at("reward");
      st.reward.velocity = r.at("velocity").get<double>();
      st.reward.action = r.at("action").get<double>();
      st.reward.idle = r.at("idle").get<double>();
      st.reward.proximity = r.at("proximity").get<double>();
      st.reward.collision = r.at("collision").get<double>();
      st.reward.reluctance = r.at("reluctance").get<double>();
      st.reward.total = r.at("total").get<double>();
      st.collision = j.at("collision").get<bool>();
      st.collision_events = j.at("collision_events").get<std::size_t>();
      st.completed = j.at("completed").get<std::vector<VehicleId>>();
      st.collided = j.at("collided").get<std::vector<VehicleId>>();
      rec.steps.push_back(std::move(st));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("episode record line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rec;
}

}  // namespace aim
