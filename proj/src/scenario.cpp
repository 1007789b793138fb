#include "aim/scenario.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aim {

namespace {

constexpr std::array<double, kScenarioCount> kMajorDemand{0.05, 0.08, 0.11, 0.14, 0.17};

}  // namespace

void ScenarioConfig::validate() const {
  if (!(automation_level >= 0.0 && automation_level <= 1.0)) {
    throw std::invalid_argument("automation_level must lie in [0, 1]");
  }
  for (std::size_t a = 0; a < 4; ++a) {
    if (!(demand[a] >= 0.0)) throw std::invalid_argument("demand must be non-negative");
    double sum = 0.0;
    for (double p : turn_distribution[a]) {
      if (p < 0.0) throw std::invalid_argument("turn probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("turn probabilities of approach " +
                                  std::string(to_string(static_cast<Approach>(a))) +
                                  " must sum to 1");
    }
  }
  if (episode_length <= 0) throw std::invalid_argument("episode_length must be positive");
  if (!(step_dt > 0.0)) throw std::invalid_argument("step_dt must be positive");
  if (!(min_spawn_gap >= 0.0)) throw std::invalid_argument("min_spawn_gap must be non-negative");
}

ScenarioConfig demand_scenario(int index, double automation_level,
                               const IntersectionLayout& layout) {
  if (index < 1 || index > kScenarioCount) {
    throw std::invalid_argument("scenario index must be in 1.." + std::to_string(kScenarioCount));
  }
  ScenarioConfig sc;
  const double major = kMajorDemand[static_cast<std::size_t>(index - 1)];
  for (Approach a : kApproaches) {
    const auto i = static_cast<std::size_t>(a);
    sc.demand[i] = layout.approach(a).road == RoadClass::major ? major : major / 2.0;
    sc.turn_distribution[i] = kDefaultTurns;
  }
  sc.automation_level = automation_level;
  sc.validate();
  return sc;
}

ScenarioConfig load_scenario(const Config& cfg, const IntersectionLayout& layout) {
  const int preset = cfg.get<int>("scenario.preset", 1);
  ScenarioConfig sc =
      demand_scenario(preset, cfg.get<double>("scenario.automation_level", 0.0), layout);
  for (Approach a : kApproaches) {
    const auto i = static_cast<std::size_t>(a);
    const std::string name(to_string(a));
    sc.demand[i] = cfg.get<double>("demand." + name, sc.demand[i]);
    auto turns = cfg.get_list("turns." + name);
    if (!turns.empty()) {
      if (turns.size() != 3) {
        throw ConfigError("turns." + name + " needs three probabilities (left, straight, right)");
      }
      sc.turn_distribution[i] = {turns[0], turns[1], turns[2]};
    }
  }
  sc.episode_length = cfg.get<int>("scenario.episode_length", sc.episode_length);
  sc.step_dt = cfg.get<double>("scenario.step_dt", sc.step_dt);
  sc.rng_seed = cfg.get<std::uint64_t>("scenario.seed", sc.rng_seed);
  sc.min_spawn_gap = cfg.get<double>("scenario.min_spawn_gap", sc.min_spawn_gap);
  sc.validate();
  return sc;
}

void store_scenario(const ScenarioConfig& sc, Config& cfg) {
  cfg.set("scenario.automation_level", format_double(sc.automation_level));
  cfg.set("scenario.episode_length", sc.episode_length);
  cfg.set("scenario.step_dt", format_double(sc.step_dt));
  cfg.set("scenario.seed", sc.rng_seed);
  cfg.set("scenario.min_spawn_gap", format_double(sc.min_spawn_gap));
  for (Approach a : kApproaches) {
    const auto i = static_cast<std::size_t>(a);
    const std::string name(to_string(a));
    cfg.set("demand." + name, format_double(sc.demand[i]));
    const auto& t = sc.turn_distribution[i];
    cfg.set_list("turns." + name, {t[0], t[1], t[2]});
  }
}

}  // namespace aim
