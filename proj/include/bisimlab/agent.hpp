#pragma once

#include <cstdint>
#include <vector>

#include "bisimlab/net.hpp"
#include "bisimlab/repr.hpp"

namespace bisimlab {

struct AgentConfig {
  double eta_r = 0.0;    // intrinsic reward scale (0 disables IR)
  double eta_d = 0.0;    // inverse dynamics weight
  double r_max_i = 0.1;  // intrinsic clamp
  bool use_ir = false;
  bool use_id = false;
  bool use_projection = true;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::size_t eps_decay_steps = 20000;
  std::vector<std::size_t> q_hidden = {64, 64};
  double q_lr = 1e-3;
  bool q_grad_to_encoder = true;
  std::size_t train_every = 2;
  std::size_t warmup_steps = 1000;
  std::size_t eval_every = 2000;
  std::size_t eval_episodes = 10;
};

struct Transition {
  std::vector<double> obs;
  std::size_t action = 0;
  std::vector<double> action_value;  // continuous representation
  double reward = 0.0;               // training reward (extrinsic + intrinsic)
  double reward_extrinsic = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

// FIFO ring buffer with uniform seeded sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return data_.size(); }

  TransitionBatch sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t write_ = 0;
  std::vector<Transition> data_;
};

// eta_r ||phihat_mu(z_t, a_t) - z_{t+1}||_2^2 / (2n), clamped to r_max_i.
// latent_next is treated as a constant.
double intrinsic_reward(const std::vector<double>& latent_t, const std::vector<double>& action,
                        const std::vector<double>& latent_next, const LatentDynamics& dyn,
                        double eta_r, double r_max_i);

// Epsilon-greedy over Q(latent); greedy ties break toward the lowest action id.
std::size_t act(const Mlp& q_net, const std::vector<double>& latent, double epsilon, Rng& rng);

// TD(0) update: target r + gamma max_a' Q(z', a') with a stop-gradient
// target network pass on the same parameters. Latent inputs are scaled by
// `input_scale` before the Q net. Returns the TD loss; g_enc may be null
// when critic gradients should not reach the encoder.
double q_update(Mlp& q_net, const EncoderModel& enc, const TransitionBatch& batch, double gamma,
                double input_scale, std::vector<double>& g_q, std::vector<double>* g_enc);

}  // namespace bisimlab
