#include "aim/td3.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "aim/nn/checkpoint.hpp"

namespace aim {

double mv_share_schedule(double progress) {
  if (!(progress >= 0.0 && progress <= 1.0)) {
    throw std::invalid_argument("mv_share_schedule: progress must lie in [0, 1]");
  }
  constexpr double third = 1.0 / 3.0;
  if (progress < third) return 0.0;
  if (progress < 2.0 * third) return 0.5 * (progress - third) / third;
  return 0.5;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

bool ReplayBuffer::push(Transition t) {
  if (t.state.av_index.empty()) return false;
  if (t.action.size() != t.state.av_index.size()) {
    throw std::invalid_argument("transition action count differs from the AV count");
  }
  std::lock_guard lock(mutex_);
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(t));
  return true;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::lock_guard lock(mutex_);
  if (entries_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, entries_.size() - 1);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(entries_[pick(rng)]);
  return out;
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

TransitionBatch make_transition_batch(const std::vector<Transition>& entries) {
  if (entries.empty()) throw std::invalid_argument("empty transition batch");
  std::vector<const SceneGraph*> states;
  std::vector<const SceneGraph*> nexts;
  std::size_t actions = 0;
  for (const auto& e : entries) {
    if (e.action.size() != e.state.av_index.size()) {
      throw std::invalid_argument("transition action count differs from the AV count");
    }
    states.push_back(&e.state);
    nexts.push_back(&e.next);
    actions += e.action.size();
  }
  TransitionBatch b;
  b.state = nn::make_batch(states);
  b.next = nn::make_batch(nexts);
  b.action.resize(static_cast<Eigen::Index>(actions), 1);
  b.reward.resize(static_cast<Eigen::Index>(entries.size()), 1);
  b.done.resize(static_cast<Eigen::Index>(entries.size()), 1);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (double a : entries[i].action) b.action(k++, 0) = static_cast<nn::Scalar>(a);
    b.reward(row, 0) = static_cast<nn::Scalar>(entries[i].reward);
    b.done(row, 0) = entries[i].terminal ? 1 : 0;
  }
  return b;
}

void Td3Config::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("td3: gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("td3: tau must lie in (0, 1]");
  if (policy_delay < 1) throw std::invalid_argument("td3: policy_delay must be at least 1");
  if (!(target_noise >= 0.0 && target_noise_clip >= 0.0 && exploration_noise >= 0.0)) {
    throw std::invalid_argument("td3: noise parameters must be non-negative");
  }
  if (batch_size < 1 || buffer_capacity < 1) {
    throw std::invalid_argument("td3: batch size and buffer capacity must be positive");
  }
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) {
    throw std::invalid_argument("td3: learning rates must be positive");
  }
  if (total_steps < 1 || start_steps < 0 || checkpoint_every < 1) {
    throw std::invalid_argument("td3: step counts out of range");
  }
  if (!(episode_seconds > 0.0)) throw std::invalid_argument("td3: episode_seconds must be positive");
  if (scenario < 1 || scenario > kScenarioCount) throw std::invalid_argument("td3: scenario out of range");
  if (hidden < 1) throw std::invalid_argument("td3: hidden width must be positive");
}

Td3Config load_td3_config(const Config& cfg) {
  Td3Config c;
  c.gamma = cfg.get("td3.gamma", c.gamma);
  c.tau = cfg.get("td3.tau", c.tau);
  c.policy_delay = cfg.get("td3.policy_delay", c.policy_delay);
  c.target_noise = cfg.get("td3.target_noise", c.target_noise);
  c.target_noise_clip = cfg.get("td3.target_noise_clip", c.target_noise_clip);
  c.exploration_noise = cfg.get("td3.exploration_noise", c.exploration_noise);
  c.batch_size = cfg.get("td3.batch_size", c.batch_size);
  c.buffer_capacity = cfg.get("td3.buffer_capacity", c.buffer_capacity);
  c.actor_lr = cfg.get("td3.actor_lr", c.actor_lr);
  c.critic_lr = cfg.get("td3.critic_lr", c.critic_lr);
  c.total_steps = cfg.get("td3.total_steps", c.total_steps);
  c.start_steps = cfg.get("td3.start_steps", c.start_steps);
  c.episode_seconds = cfg.get("td3.episode_seconds", c.episode_seconds);
  c.scenario = cfg.get("td3.scenario", c.scenario);
  c.hidden = cfg.get("td3.hidden", c.hidden);
  c.checkpoint_every = cfg.get("td3.checkpoint_every", c.checkpoint_every);
  c.seed = cfg.get("td3.seed", c.seed);
  c.curriculum = cfg.get("td3.curriculum", c.curriculum);
  c.validate();
  return c;
}

void store_td3_config(const Td3Config& c, Config& cfg) {
  cfg.set("td3.gamma", format_double(c.gamma));
  cfg.set("td3.tau", format_double(c.tau));
  cfg.set("td3.policy_delay", c.policy_delay);
  cfg.set("td3.target_noise", format_double(c.target_noise));
  cfg.set("td3.target_noise_clip", format_double(c.target_noise_clip));
  cfg.set("td3.exploration_noise", format_double(c.exploration_noise));
  cfg.set("td3.batch_size", c.batch_size);
  cfg.set("td3.buffer_capacity", c.buffer_capacity);
  cfg.set("td3.actor_lr", format_double(c.actor_lr));
  cfg.set("td3.critic_lr", format_double(c.critic_lr));
  cfg.set("td3.total_steps", c.total_steps);
  cfg.set("td3.start_steps", c.start_steps);
  cfg.set("td3.episode_seconds", format_double(c.episode_seconds));
  cfg.set("td3.scenario", c.scenario);
  cfg.set("td3.hidden", c.hidden);
  cfg.set("td3.checkpoint_every", c.checkpoint_every);
  cfg.set("td3.seed", c.seed);
  cfg.set("td3.curriculum", c.curriculum);
}

namespace {

std::vector<nn::Parameter*> concat(std::vector<nn::Parameter*> a,
                                   const std::vector<nn::Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

nn::Var squared_error(nn::Var q, nn::Var y) {
  nn::Var d = nn::sub(q, y);
  return nn::mean(nn::mul(d, d));
}

}  // namespace

Td3Agent::Td3Agent(const Td3Config& cfg)
    : cfg_(cfg),
      actor_({cfg.hidden}, "actor"),
      critic1_({cfg.hidden}, "critic1"),
      critic2_({cfg.hidden}, "critic2"),
      actor_target_({cfg.hidden}, "actor_target"),
      critic1_target_({cfg.hidden}, "critic1_target"),
      critic2_target_({cfg.hidden}, "critic2_target"),
      actor_opt_({}, static_cast<nn::Scalar>(cfg.actor_lr)),
      critic_opt_({}, static_cast<nn::Scalar>(cfg.critic_lr)) {
  cfg_.validate();
  nn::InitRng init = make_stream(cfg.seed, 10);
  actor_.init(init);
  critic1_.init(init);
  critic2_.init(init);
  nn::copy_values(actor_target_.parameters(), actor_.parameters());
  nn::copy_values(critic1_target_.parameters(), critic1_.parameters());
  nn::copy_values(critic2_target_.parameters(), critic2_.parameters());
  actor_opt_.rebind(actor_.parameters());
  critic_opt_.rebind(concat(critic1_.parameters(), critic2_.parameters()));
}

std::vector<nn::Parameter*> Td3Agent::all_parameters() {
  auto p = concat(actor_.parameters(), critic1_.parameters());
  p = concat(std::move(p), critic2_.parameters());
  p = concat(std::move(p), actor_target_.parameters());
  p = concat(std::move(p), critic1_target_.parameters());
  return concat(std::move(p), critic2_target_.parameters());
}

nn::Matrix Td3Agent::critic_targets(const TransitionBatch& batch, Rng& rng) {
  nn::Tape t;
  nn::Matrix a = actor_target_.forward(t, batch.next).value();
  std::normal_distribution<double> normal(0.0, cfg_.target_noise);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double eps =
        std::clamp(normal(rng), -cfg_.target_noise_clip, cfg_.target_noise_clip);
    a(i, 0) = static_cast<nn::Scalar>(std::clamp(static_cast<double>(a(i, 0)) + eps, -1.0, 1.0));
  }
  const nn::Var av = t.constant(a);
  const nn::Matrix q1 = critic1_target_.forward(t, batch.next, av).value();
  const nn::Matrix q2 = critic2_target_.forward(t, batch.next, av).value();
  nn::Matrix y(batch.reward.rows(), 1);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    y(i, 0) = batch.reward(i, 0) + static_cast<nn::Scalar>(cfg_.gamma) * (1 - batch.done(i, 0)) *
                                       std::min(q1(i, 0), q2(i, 0));
  }
  return y;
}

UpdateStats Td3Agent::update(const TransitionBatch& batch, Rng& rng) {
  UpdateStats stats;
  const nn::Matrix y = critic_targets(batch, rng);
  {
    nn::zero_grad(critic1_.parameters());
    nn::zero_grad(critic2_.parameters());
    nn::Tape t;
    const nn::Var a = t.constant(batch.action);
    const nn::Var yv = t.constant(y);
    const nn::Var l1 = squared_error(critic1_.forward(t, batch.state, a), yv);
    const nn::Var l2 = squared_error(critic2_.forward(t, batch.state, a), yv);
    stats.critic1_loss = static_cast<double>(l1.value()(0, 0));
    stats.critic2_loss = static_cast<double>(l2.value()(0, 0));
    t.backward(nn::add(l1, l2));
    critic_opt_.step();
  }
  ++updates_;
  if (updates_ % cfg_.policy_delay == 0) {
    nn::zero_grad(actor_.parameters());
    nn::Tape t;
    const nn::Var a = actor_.forward(t, batch.state);
    const nn::Var loss = nn::scale(nn::mean(critic1_.forward(t, batch.state, a)), -1);
    stats.actor_loss = static_cast<double>(loss.value()(0, 0));
    t.backward(loss);
    actor_opt_.step();
    nn::zero_grad(critic1_.parameters());
    const auto tau = static_cast<nn::Scalar>(cfg_.tau);
    nn::soft_update(actor_target_.parameters(), actor_.parameters(), tau);
    nn::soft_update(critic1_target_.parameters(), critic1_.parameters(), tau);
    nn::soft_update(critic2_target_.parameters(), critic2_.parameters(), tau);
  }
  return stats;
}

std::string training_log_header() {
  return "step,episode,mv_share,episode_steps,episode_return,velocity,action,idle,proximity,"
         "collision,reluctance,critic1_loss,critic2_loss,actor_loss,terminated";
}

namespace {

void dump_batch(const std::filesystem::path& file, const std::vector<Transition>& batch,
                long step, const UpdateStats& stats) {
  std::ofstream out(file);
  out << "non-finite loss at step " << step << ": critic1 " << stats.critic1_loss << ", critic2 "
      << stats.critic2_loss << ", actor "
      << (stats.actor_loss ? format_double(*stats.actor_loss) : std::string("-")) << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& e = batch[i];
    out << "entry " << i << " reward " << format_double(e.reward) << " terminal " << e.terminal
        << "\naction";
    for (double a : e.action) out << ' ' << format_double(a);
    out << "\nstate\n";
    write_graph_text(out, e.state);
    out << "next\n";
    write_graph_text(out, e.next);
  }
}

bool finite(const UpdateStats& s) {
  return std::isfinite(s.critic1_loss) && std::isfinite(s.critic2_loss) &&
         (!s.actor_loss || std::isfinite(*s.actor_loss));
}

std::string optional_number(double sum, int count) {
  return count ? format_double(sum / count) : std::string();
}

}  // namespace

TrainSummary train(const Td3Config& cfg, const EnvConfig& base, const IntersectionLayout& layout,
                   const std::filesystem::path& out_dir, std::ostream* progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "training_log.csv");
  if (!log) throw std::runtime_error("cannot write training log in " + out_dir.string());
  log << training_log_header() << '\n';

  Td3Agent agent(cfg);
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng rng = make_stream(cfg.seed, 11);
  Rng episode_seeds = make_stream(cfg.seed, 12);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::normal_distribution<double> explore(0.0, cfg.exploration_noise);

  EnvConfig env = base;
  env.drivers.mode = DriverMode::idm;
  env.observation_noise = false;
  env.terminate_on_collision = true;

  TrainSummary summary;
  long step = 0;
  while (step < cfg.total_steps) {
    const double share =
        cfg.curriculum
            ? mv_share_schedule(static_cast<double>(step) / static_cast<double>(cfg.total_steps))
            : 0.0;
    const ScenarioConfig preset = demand_scenario(cfg.scenario, 1.0 - share, layout);
    env.scenario.demand = preset.demand;
    env.scenario.automation_level = preset.automation_level;
    env.scenario.episode_length =
        static_cast<int>(std::lround(cfg.episode_seconds / env.scenario.step_dt));

    Episode ep(layout, env, episode_seeds());
    RewardBreakdown sums;
    double c1 = 0.0;
    double c2 = 0.0;
    double al = 0.0;
    int updates = 0;
    int actor_updates = 0;
    int ep_steps = 0;
    bool terminated = false;
    while (!ep.done() && step < cfg.total_steps) {
      SceneGraph g = ep.graph();
      std::vector<double> action;
      if (!g.av_index.empty()) {
        if (step < cfg.start_steps) {
          for (std::size_t k = 0; k < g.av_index.size(); ++k) action.push_back(uniform(rng));
        } else {
          action = nn::act(agent.actor(), g);
          for (double& a : action) a = std::clamp(a + explore(rng), -1.0, 1.0);
        }
      }
      const auto outcome = ep.step_actions(action);
      ++step;
      ++ep_steps;
      terminated = outcome.terminal;
      sums.velocity += outcome.reward.velocity;
      sums.action += outcome.reward.action;
      sums.idle += outcome.reward.idle;
      sums.proximity += outcome.reward.proximity;
      sums.collision += outcome.reward.collision;
      sums.reluctance += outcome.reward.reluctance;
      sums.total += outcome.reward.total;
      buffer.push({std::move(g), std::move(action), outcome.reward.total, ep.graph(),
                   outcome.terminal});

      if (step >= cfg.start_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        const auto entries = buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng);
        const UpdateStats s = agent.update(make_transition_batch(entries), rng);
        if (!finite(s)) {
          const auto dump = out_dir / "nan_dump.txt";
          dump_batch(dump, entries, step, s);
          throw TrainingError("non-finite loss at step " + std::to_string(step) +
                              "; last batch written to " + dump.string());
        }
        c1 += s.critic1_loss;
        c2 += s.critic2_loss;
        ++updates;
        if (s.actor_loss) {
          al += *s.actor_loss;
          ++actor_updates;
        }
      }
      if (step % cfg.checkpoint_every == 0) {
        nn::save_checkpoint(out_dir / ("checkpoint_" + std::to_string(step) + ".ckpt"),
                            agent.all_parameters());
      }
    }
    ++summary.episodes;
    log << step << ',' << summary.episodes << ',' << format_double(share) << ',' << ep_steps
        << ',' << format_double(sums.total) << ',' << format_double(sums.velocity) << ','
        << format_double(sums.action) << ',' << format_double(sums.idle) << ','
        << format_double(sums.proximity) << ',' << format_double(sums.collision) << ','
        << format_double(sums.reluctance) << ',' << optional_number(c1, updates) << ','
        << optional_number(c2, updates) << ',' << optional_number(al, actor_updates) << ','
        << (terminated ? 1 : 0) << '\n';
    log.flush();
    if (progress && summary.episodes % 10 == 0) {
      *progress << "step " << step << " episode " << summary.episodes << " return "
                << format_double(sums.total) << '\n';
    }
  }
  summary.steps = step;
  summary.checkpoint = out_dir / "policy.ckpt";
  nn::save_checkpoint(summary.checkpoint, agent.all_parameters());
  return summary;
}

}  // namespace aim
