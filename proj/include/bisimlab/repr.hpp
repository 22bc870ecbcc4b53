#pragma once

#include <optional>
#include <vector>

#include "bisimlab/net.hpp"

namespace bisimlab {

// One minibatch of transitions. Actions carry their continuous
// representation in [-1,1]^{n_a} (the inverse model regresses these) plus
// the discrete id used by the Q head.
struct TransitionBatch {
  Mat obs;       // B x obs_dim
  Mat action;    // B x n_a
  std::vector<std::size_t> action_id;
  std::vector<double> reward;
  Mat next_obs;  // B x obs_dim
  std::vector<char> done;

  std::size_t size() const { return obs.rows; }
};

// Generalized DBC metric-learning configuration. q1 is the norm inside the
// Wasserstein target term, q2 the embedding distance order; the matched
// default is q1 = q2 = 2 and the original recipe is (q1=2, q2=1).
struct ReprConfig {
  double c_r = 1.0;
  double c_t = 0.5;
  double q1 = 2.0;
  double q2 = 2.0;
  double projection_q = 2.0;  // ball norm order (the paper normalizes in L2)
  double lr = 1e-3;
  std::size_t batch_size = 128;
  bool stop_gradient_target = true;
  bool projection_enabled = true;
  double huber_delta = 0.0;  // > 0 switches the embedding distance to Huber
  bool gaussian_dynamics = false;
  double reward_range = 1.0;  // R_max - R_min of the task
  bool use_adam = true;

  // c_R (R_max - R_min) / (2 (1 - c_T)); 0 when projection is disabled.
  double ball_radius() const {
    if (!projection_enabled) return 0.0;
    return c_r * reward_range / (2.0 * (1.0 - c_t));
  }
};

struct EncoderModel {
  Mlp net;                        // obs -> latent, linear output
  double projection_radius = 0.0; // <= 0 disables the projection
  double projection_q = 2.0;

  std::size_t latent_dim() const { return net.out_dim(); }
};

struct LatentDynamics {
  Mlp net;  // (latent ++ action) -> latent mean, or 2x latent in gaussian mode
  bool gaussian = false;
  double projection_radius = 0.0;
  double projection_q = 2.0;
  std::size_t latent_dim = 0;
  std::size_t action_dim = 0;
};

struct RewardModel {
  Mlp net;  // latent -> 1
};

// g_I: (latent_t, latent_{t+1}) -> action in [-1,1]^{n_a}; tanh output keeps
// predictions inside the action box.
struct InverseModel {
  Mlp net;
  std::size_t n_actions_dim = 0;
};

// Returns x unchanged inside the ball, else scales radially onto the surface
// (q in {1, 2}).
std::vector<double> project_to_ball(const std::vector<double>& x, double radius, double q);

// Forward pass with projection applied last; DimensionMismatch /
// NonFiniteOutput on bad inputs.
Mat encode(const EncoderModel& enc, const Mat& obs);

// Differentiable encode: the cache carries what the projection-aware
// backward pass needs. Used by every loss that reaches encoder parameters.
struct ProjCache {
  Mat pre;
  std::vector<double> norms;
  double radius = 0.0;
  double q = 2.0;
};

struct EncodeCache {
  MlpCache net;
  ProjCache proj;
};

Mat encode_with_cache(const EncoderModel& enc, const Mat& obs, EncodeCache& cache);
void encode_backward(const EncoderModel& enc, const EncodeCache& cache, const Mat& dlatent,
                     std::vector<double>& g_enc);

// Predicted next-latent means (projected when enabled) and, in gaussian
// mode, strictly positive diagonal scales.
struct DynPrediction {
  Mat mean;
  Mat scale;  // empty in deterministic mode
};
DynPrediction dynamics_predict(const LatentDynamics& dyn, const Mat& latent, const Mat& action);

// Losses return their scalar value and accumulate parameter gradients into
// the provided flat buffers (sized like the respective model's params()).
double dbc_loss(const TransitionBatch& batch, const EncoderModel& enc, const LatentDynamics& dyn,
                const ReprConfig& cfg, std::vector<double>& g_enc, std::vector<double>& g_dyn);

double forward_model_loss(const TransitionBatch& batch, const EncoderModel& enc,
                          const LatentDynamics& dyn, std::vector<double>& g_enc,
                          std::vector<double>& g_dyn);

double reward_model_loss(const TransitionBatch& batch, const EncoderModel& enc,
                         const RewardModel& rew, std::vector<double>& g_enc,
                         std::vector<double>& g_rew);

// eta_d ||a - a_hat||_1 / n_a, averaged over the batch; gradients reach both
// g_I and the encoder (through both endpoint latents).
double inverse_dynamics_loss(const TransitionBatch& batch, const EncoderModel& enc,
                             const InverseModel& inv, double eta_d, std::vector<double>& g_enc,
                             std::vector<double>& g_inv);

struct DiagnosticsRecord {
  std::size_t step = 0;
  double loss_dbc = 0.0;
  double loss_fwd = 0.0;
  double loss_rew = 0.0;
  double loss_inv = 0.0;
  double mean_norm = 0.0;
  double max_norm = 0.0;
  double mu_bd = 0.0;
  double mu_rd = 0.0;
  double ratio = 0.0;  // NaN when mu_rd = 0
  bool diverged = false;
};

struct ReprModels {
  EncoderModel encoder;
  LatentDynamics dynamics;
  RewardModel reward;
  std::optional<InverseModel> inverse;
  double eta_d = 0.0;

  Adam opt_enc, opt_dyn, opt_rew, opt_inv;
  Sgd sgd_enc, sgd_dyn, sgd_rew, sgd_inv;
};

// Deterministic model construction for a task shape; widths are the hidden
// layers of the encoder.
ReprModels make_repr_models(const ReprConfig& cfg, std::size_t obs_dim, std::size_t latent_dim,
                            std::size_t action_dim, const std::vector<std::size_t>& enc_hidden,
                            const std::vector<std::size_t>& dyn_hidden, bool with_inverse,
                            double eta_d, Rng& rng, double dyn_init_gain = 1.0);

// Mini-batch norms and dispersion estimates (pairing matches training:
// row i against row (i+1) mod B).
DiagnosticsRecord batch_diagnostics(const TransitionBatch& batch, const EncoderModel& enc,
                                    const ReprConfig& cfg);

// One joint gradient step on dbc + forward + reward (+ inverse when present).
// Non-finite losses set `diverged` and skip the parameter update instead of
// aborting.
DiagnosticsRecord train_step(const TransitionBatch& batch, ReprModels& models,
                             const ReprConfig& cfg, std::size_t step_index);

}  // namespace bisimlab
