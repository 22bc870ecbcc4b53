#include "bisimlab/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bisimlab/kernels.hpp"

namespace bisimlab {

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[write_] = std::move(t);
    write_ = (write_ + 1) % capacity_;
  }
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (data_.empty()) throw Error("InvalidArgument", "sampling from an empty buffer");
  std::size_t obs_d = data_.front().obs.size();
  std::size_t act_d = data_.front().action_value.size();
  TransitionBatch batch;
  batch.obs = Mat(batch_size, obs_d);
  batch.action = Mat(batch_size, act_d);
  batch.next_obs = Mat(batch_size, obs_d);
  batch.action_id.resize(batch_size);
  batch.reward.resize(batch_size);
  batch.done.resize(batch_size);
  for (std::size_t r = 0; r < batch_size; ++r) {
    const Transition& t = data_[rng.uniform_int(data_.size())];
    std::copy(t.obs.begin(), t.obs.end(), batch.obs.row(r));
    std::copy(t.action_value.begin(), t.action_value.end(), batch.action.row(r));
    std::copy(t.next_obs.begin(), t.next_obs.end(), batch.next_obs.row(r));
    batch.action_id[r] = t.action;
    batch.reward[r] = t.reward;
    batch.done[r] = t.done ? 1 : 0;
  }
  return batch;
}

double intrinsic_reward(const std::vector<double>& latent_t, const std::vector<double>& action,
                        const std::vector<double>& latent_next, const LatentDynamics& dyn,
                        double eta_r, double r_max_i) {
  std::size_t n = latent_t.size();
  if (latent_next.size() != n || n != dyn.latent_dim || action.size() != dyn.action_dim)
    throw Error("DimensionMismatch", "intrinsic reward input widths");
  for (double v : latent_t)
    if (!std::isfinite(v)) throw Error("NonFiniteInput", "latent_t");
  for (double v : latent_next)
    if (!std::isfinite(v)) throw Error("NonFiniteInput", "latent_next");
  if (eta_r == 0.0) return 0.0;
  Mat z(1, n), a(1, action.size());
  std::copy(latent_t.begin(), latent_t.end(), z.row(0));
  std::copy(action.begin(), action.end(), a.row(0));
  DynPrediction pred = dynamics_predict(dyn, z, a);
  double err = kernels::sq_l2_diff(pred.mean.row(0), latent_next.data(), n);
  double r = eta_r * err / (2.0 * static_cast<double>(n));
  return std::min(r_max_i, r);
}

std::size_t act(const Mlp& q_net, const std::vector<double>& latent, double epsilon, Rng& rng) {
  if (latent.size() != q_net.in_dim()) throw Error("DimensionMismatch", "Q input width");
  std::size_t n_actions = q_net.out_dim();
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.uniform_int(n_actions);
  Mat in(1, latent.size());
  std::copy(latent.begin(), latent.end(), in.row(0));
  Mat q = q_net.forward(in);
  std::size_t best = 0;
  for (std::size_t a = 1; a < n_actions; ++a)
    if (q.at(0, a) > q.at(0, best)) best = a;  // strict: ties keep the lowest id
  return best;
}

double q_update(Mlp& q_net, const EncoderModel& enc, const TransitionBatch& batch, double gamma,
                double input_scale, std::vector<double>& g_q, std::vector<double>* g_enc) {
  std::size_t B = batch.size();
  std::size_t n_actions = q_net.out_dim();
  if (batch.action_id.size() != B) throw Error("ShapeMismatch", "batch lacks action ids");

  EncodeCache enc_cache;
  Mat z = g_enc ? encode_with_cache(enc, batch.obs, enc_cache) : encode(enc, batch.obs);
  Mat z_next = encode(enc, batch.next_obs);  // stop-gradient target

  Mat zin = z, zin_next = z_next;
  for (auto& v : zin.v) v *= input_scale;
  for (auto& v : zin_next.v) v *= input_scale;

  MlpCache q_cache;
  Mat qvals = q_net.forward(zin, &q_cache);
  Mat qnext = q_net.forward(zin_next);

  double loss = 0.0;
  Mat dq(B, n_actions);
  for (std::size_t r = 0; r < B; ++r) {
    double best_next = qnext.at(r, 0);
    for (std::size_t a = 1; a < n_actions; ++a) best_next = std::max(best_next, qnext.at(r, a));
    double target = batch.reward[r] + (batch.done[r] ? 0.0 : gamma * best_next);
    std::size_t aid = batch.action_id[r];
    if (aid >= n_actions) throw Error("DimensionMismatch", "action id exceeds Q head");
    double e = qvals.at(r, aid) - target;
    loss += e * e;
    dq.at(r, aid) = 2.0 * e / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);

  Mat dzin;
  q_net.backward(q_cache, dq, g_q, g_enc ? &dzin : nullptr);
  if (g_enc) {
    for (auto& v : dzin.v) v *= input_scale;
    encode_backward(enc, enc_cache, dzin, *g_enc);
  }
  if (!std::isfinite(loss)) throw Error("NonFiniteLoss", "Q update diverged");
  return loss;
}

}  // namespace bisimlab
