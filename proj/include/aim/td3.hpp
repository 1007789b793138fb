#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aim/episode.hpp"
#include "aim/nn/network.hpp"

namespace aim {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Share of MVs over training progress: none for the first third, a linear
/// ramp to one half during the second, one half for the rest.
double mv_share_schedule(double progress);

struct Transition {
  SceneGraph state;
  std::vector<double> action;  // normalized, state AV order
  double reward = 0.0;
  SceneGraph next;
  bool terminal = false;
};

/// Thread-safe FIFO replay memory.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Stores the transition unless its state has no AV. Returns whether it
  /// was stored.
  bool push(Transition t);
  /// `n` entries drawn uniformly with replacement.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<Transition> entries_;
};

/// Minibatch of transitions as disjoint unions.
struct TransitionBatch {
  nn::GraphBatch state;
  nn::GraphBatch next;
  nn::Matrix action;  // one row per state AV
  nn::Matrix reward;  // one row per entry
  nn::Matrix done;
};

TransitionBatch make_transition_batch(const std::vector<Transition>& entries);

struct Td3Config {
  double gamma = 0.99;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  double exploration_noise = 0.1;
  int batch_size = 64;
  std::size_t buffer_capacity = 100000;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  long total_steps = 150000;
  long start_steps = 1000;  // uniform random actions before the policy acts
  double episode_seconds = 60.0;
  int scenario = 1;
  int hidden = 64;
  long checkpoint_every = 10000;
  std::uint64_t seed = 1;
  bool curriculum = true;  // otherwise train at full automation throughout

  void validate() const;
};

Td3Config load_td3_config(const Config& cfg);
void store_td3_config(const Td3Config& c, Config& cfg);

struct UpdateStats {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  std::optional<double> actor_loss;
};

/// Actor, twin critics and their target copies with optimizers.
class Td3Agent {
 public:
  explicit Td3Agent(const Td3Config& cfg);

  /// One gradient step on the batch. The actor and the targets update on
  /// every `policy_delay`-th call.
  UpdateStats update(const TransitionBatch& batch, Rng& rng);

  /// Critic targets r + gamma * (1 - done) * min(Q1', Q2') at the smoothed
  /// target action.
  nn::Matrix critic_targets(const TransitionBatch& batch, Rng& rng);

  nn::Actor& actor() { return actor_; }
  nn::Critic& critic1() { return critic1_; }
  nn::Critic& critic2() { return critic2_; }
  nn::Actor& actor_target() { return actor_target_; }
  nn::Critic& critic1_target() { return critic1_target_; }
  nn::Critic& critic2_target() { return critic2_target_; }
  long updates() const { return updates_; }

  /// Every network, for checkpoints.
  std::vector<nn::Parameter*> all_parameters();

 private:
  Td3Config cfg_;
  nn::Actor actor_;
  nn::Critic critic1_;
  nn::Critic critic2_;
  nn::Actor actor_target_;
  nn::Critic critic1_target_;
  nn::Critic critic2_target_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
  long updates_ = 0;
};

struct TrainSummary {
  long steps = 0;
  int episodes = 0;
  std::filesystem::path checkpoint;
};

/// Runs the training loop with IDM drivers and noise-free observations.
/// Writes `training_log.csv`, periodic `checkpoint_<step>.ckpt` and the final
/// `policy.ckpt` to `out_dir`. A non-finite loss aborts with TrainingError
/// after writing `nan_dump.txt`.
TrainSummary train(const Td3Config& cfg, const EnvConfig& base, const IntersectionLayout& layout,
                   const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

/// Header of the training log.
std::string training_log_header();

}  // namespace aim
