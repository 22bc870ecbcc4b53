#include "bisimlab/repr.hpp"

#include <cmath>
#include <limits>

#include "bisimlab/kernels.hpp"

namespace bisimlab {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
constexpr double kScaleFloor = 1e-4;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double norm_q(const double* x, std::size_t n, double q) {
  if (q == 1.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
  }
  return std::sqrt(kernels::dot(x, x, n));
}

// Embedding distance between two latent rows: L_q2 norm of the difference,
// or the summed Huber value when huber_delta > 0.
double embed_dist(const double* a, const double* b, std::size_t n, double q2, double delta) {
  if (delta > 0.0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = std::fabs(a[i] - b[i]);
      acc += e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
    }
    return acc;
  }
  if (q2 == 1.0) return kernels::l1_diff(a, b, n);
  return std::sqrt(kernels::sq_l2_diff(a, b, n));
}

// d(dist)/d(a - b), scaled by g, added into dd.
void embed_dist_grad(const double* a, const double* b, std::size_t n, double q2, double delta,
                     double dist, double g, double* dd) {
  if (delta > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double e = a[i] - b[i];
      dd[i] += g * (std::fabs(e) <= delta ? e : delta * sgn(e));
    }
    return;
  }
  if (q2 == 1.0) {
    for (std::size_t i = 0; i < n; ++i) dd[i] += g * sgn(a[i] - b[i]);
    return;
  }
  if (dist <= 0.0) return;
  for (std::size_t i = 0; i < n; ++i) dd[i] += g * (a[i] - b[i]) / dist;
}

Mat project_batch(const Mat& x, double radius, double q, ProjCache* cache) {
  Mat out = x;
  if (cache) {
    cache->pre = x;
    cache->norms.assign(x.rows, 0.0);
    cache->radius = radius;
    cache->q = q;
  }
  if (radius <= 0.0) return out;
  for (std::size_t r = 0; r < x.rows; ++r) {
    double nrm = norm_q(x.row(r), x.cols, q);
    if (cache) cache->norms[r] = nrm;
    if (nrm > radius) {
      double s = radius / nrm;
      double* row = out.row(r);
      for (std::size_t c = 0; c < x.cols; ++c) row[c] *= s;
    }
  }
  return out;
}

// dL/d(pre-projection) from dL/d(projected).
Mat project_batch_backward(const ProjCache& cache, const Mat& dproj) {
  Mat dx = dproj;
  if (cache.radius <= 0.0) return dx;
  std::size_t n = dproj.cols;
  for (std::size_t r = 0; r < dproj.rows; ++r) {
    double nrm = cache.norms[r];
    if (nrm <= cache.radius) continue;
    const double* x = cache.pre.row(r);
    const double* g = dproj.row(r);
    double* out = dx.row(r);
    double s = cache.radius / nrm;
    double xg = kernels::dot(x, g, n);
    if (cache.q == 1.0) {
      for (std::size_t c = 0; c < n; ++c) out[c] = s * g[c] - (s / nrm) * xg * sgn(x[c]);
    } else {
      for (std::size_t c = 0; c < n; ++c) out[c] = s * (g[c] - x[c] * xg / (nrm * nrm));
    }
  }
  return dx;
}

Mat hcat(const Mat& a, const Mat& b) {
  Mat out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    double* dst = out.row(r);
    std::copy(a.row(r), a.row(r) + a.cols, dst);
    std::copy(b.row(r), b.row(r) + b.cols, dst + a.cols);
  }
  return out;
}

void check_finite(const Mat& m, const char* what) {
  for (double v : m.v)
    if (!std::isfinite(v)) throw Error("NonFiniteOutput", what);
}

struct DynCache {
  MlpCache net;
  ProjCache mean_proj;
  Mat raw;  // raw network output (pre-softplus scales)
  Mat input;
};

DynPrediction dynamics_predict_cached(const LatentDynamics& dyn, const Mat& latent,
                                      const Mat& action, DynCache* cache) {
  if (latent.cols != dyn.latent_dim || action.cols != dyn.action_dim)
    throw Error("DimensionMismatch", "dynamics input widths");
  Mat in = hcat(latent, action);
  MlpCache local;
  Mat raw = dyn.net.forward(in, cache ? &cache->net : &local);
  std::size_t n = dyn.latent_dim;
  DynPrediction pred;
  Mat mean_raw(raw.rows, n);
  for (std::size_t r = 0; r < raw.rows; ++r)
    std::copy(raw.row(r), raw.row(r) + n, mean_raw.row(r));
  ProjCache local_proj;
  pred.mean = project_batch(mean_raw, dyn.projection_radius, dyn.projection_q,
                            cache ? &cache->mean_proj : &local_proj);
  if (dyn.gaussian) {
    pred.scale = Mat(raw.rows, n);
    for (std::size_t r = 0; r < raw.rows; ++r)
      for (std::size_t c = 0; c < n; ++c)
        pred.scale.at(r, c) = softplus(raw.at(r, c + n)) + kScaleFloor;
  }
  if (cache) {
    cache->raw = std::move(raw);
    cache->input = std::move(in);
  }
  return pred;
}

// dmean/dscale -> gradients for dyn params plus dL/d(latent input).
Mat dynamics_backward(const LatentDynamics& dyn, const DynCache& cache, const Mat& dmean,
                      const Mat& dscale, std::vector<double>& g_dyn) {
  std::size_t n = dyn.latent_dim;
  Mat dmean_raw = project_batch_backward(cache.mean_proj, dmean);
  Mat draw(cache.raw.rows, cache.raw.cols);
  for (std::size_t r = 0; r < draw.rows; ++r) {
    std::copy(dmean_raw.row(r), dmean_raw.row(r) + n, draw.row(r));
    if (dyn.gaussian)
      for (std::size_t c = 0; c < n; ++c)
        draw.at(r, c + n) = dscale.at(r, c) * sigmoid(cache.raw.at(r, c + n));
  }
  Mat din;
  dyn.net.backward(cache.net, draw, g_dyn, &din);
  Mat dlatent(din.rows, n);
  for (std::size_t r = 0; r < din.rows; ++r)
    std::copy(din.row(r), din.row(r) + n, dlatent.row(r));
  return dlatent;
}

}  // namespace

std::vector<double> project_to_ball(const std::vector<double>& x, double radius, double q) {
  if (!(radius > 0.0)) throw Error("InvalidArgument", "radius must be > 0");
  if (q != 1.0 && q != 2.0) throw Error("InvalidArgument", "q in {1,2} supported");
  for (double v : x)
    if (!std::isfinite(v)) throw Error("NonFiniteInput", "projection input");
  double nrm = norm_q(x.data(), x.size(), q);
  if (nrm <= radius) return x;
  std::vector<double> out(x.size());
  double s = radius / nrm;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return out;
}

Mat encode(const EncoderModel& enc, const Mat& obs) {
  Mat raw = enc.net.forward(obs, nullptr);
  check_finite(raw, "encoder output");
  return project_batch(raw, enc.projection_radius, enc.projection_q, nullptr);
}

Mat encode_with_cache(const EncoderModel& enc, const Mat& obs, EncodeCache& cache) {
  Mat raw = enc.net.forward(obs, &cache.net);
  return project_batch(raw, enc.projection_radius, enc.projection_q, &cache.proj);
}

void encode_backward(const EncoderModel& enc, const EncodeCache& cache, const Mat& dlatent,
                     std::vector<double>& g_enc) {
  Mat draw = project_batch_backward(cache.proj, dlatent);
  enc.net.backward(cache.net, draw, g_enc);
}

DynPrediction dynamics_predict(const LatentDynamics& dyn, const Mat& latent, const Mat& action) {
  return dynamics_predict_cached(dyn, latent, action, nullptr);
}

double dbc_loss(const TransitionBatch& batch, const EncoderModel& enc, const LatentDynamics& dyn,
                const ReprConfig& cfg, std::vector<double>& g_enc, std::vector<double>& g_dyn) {
  std::size_t B = batch.size();
  std::size_t n = enc.latent_dim();
  if (B < 2) throw Error("ShapeMismatch", "pairing needs a batch of at least 2");
  EncodeCache enc_cache;
  Mat z = encode_with_cache(enc, batch.obs, enc_cache);
  check_finite(z, "encoder output");
  DynCache dyn_cache;
  DynPrediction pred = dynamics_predict_cached(dyn, z, batch.action, &dyn_cache);

  double loss = 0.0;
  Mat dz(B, n);
  Mat dmean(B, n), dscale(B, n);
  bool target_grads = !cfg.stop_gradient_target;
  for (std::size_t i = 0; i < B; ++i) {
    std::size_t j = (i + 1) % B;
    double dhat = embed_dist(z.row(i), z.row(j), n, cfg.q2, cfg.huber_delta);
    double wterm;
    if (dyn.gaussian) {
      double m2 = kernels::sq_l2_diff(pred.mean.row(i), pred.mean.row(j), n);
      double s2 = kernels::sq_l2_diff(pred.scale.row(i), pred.scale.row(j), n);
      wterm = std::sqrt(m2 + s2);
    } else {
      wterm = embed_dist(pred.mean.row(i), pred.mean.row(j), n, cfg.q1, 0.0);
    }
    double target = cfg.c_r * std::fabs(batch.reward[i] - batch.reward[j]) + cfg.c_t * wterm;
    double e = dhat - target;
    loss += 0.5 * e * e;
    double g = e / static_cast<double>(B);
    std::vector<double> dd(n, 0.0);
    embed_dist_grad(z.row(i), z.row(j), n, cfg.q2, cfg.huber_delta, dhat, g, dd.data());
    kernels::axpy(dz.row(i), 1.0, dd.data(), n);
    kernels::axpy(dz.row(j), -1.0, dd.data(), n);
    if (target_grads) {
      double gt = -g * cfg.c_t;
      if (dyn.gaussian) {
        if (wterm > 0.0) {
          for (std::size_t c = 0; c < n; ++c) {
            double dm = gt * (pred.mean.at(i, c) - pred.mean.at(j, c)) / wterm;
            dmean.at(i, c) += dm;
            dmean.at(j, c) -= dm;
            double ds = gt * (pred.scale.at(i, c) - pred.scale.at(j, c)) / wterm;
            dscale.at(i, c) += ds;
            dscale.at(j, c) -= ds;
          }
        }
      } else {
        std::vector<double> dm(n, 0.0);
        embed_dist_grad(pred.mean.row(i), pred.mean.row(j), n, cfg.q1, 0.0, wterm, gt, dm.data());
        kernels::axpy(dmean.row(i), 1.0, dm.data(), n);
        kernels::axpy(dmean.row(j), -1.0, dm.data(), n);
      }
    }
  }
  loss /= static_cast<double>(B);

  if (target_grads) {
    Mat dz_from_dyn = dynamics_backward(dyn, dyn_cache, dmean, dscale, g_dyn);
    for (std::size_t k = 0; k < dz.v.size(); ++k) dz.v[k] += dz_from_dyn.v[k];
  }
  encode_backward(enc, enc_cache, dz, g_enc);
  if (!std::isfinite(loss)) throw Error("NonFiniteLoss", "dbc loss diverged");
  return loss;
}

double forward_model_loss(const TransitionBatch& batch, const EncoderModel& enc,
                          const LatentDynamics& dyn, std::vector<double>& g_enc,
                          std::vector<double>& g_dyn) {
  std::size_t B = batch.size();
  std::size_t n = enc.latent_dim();
  EncodeCache enc_cache;
  Mat z = encode_with_cache(enc, batch.obs, enc_cache);
  Mat z_next = encode(enc, batch.next_obs);  // stop-gradient target
  DynCache dyn_cache;
  DynPrediction pred = dynamics_predict_cached(dyn, z, batch.action, &dyn_cache);

  double denom = static_cast<double>(B * n);
  double loss = 0.0;
  Mat dmean(B, n), dscale(B, n);
  if (dyn.gaussian) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double m = pred.mean.at(r, c), t = z_next.at(r, c), s = pred.scale.at(r, c);
        double u = (m - t) / s;
        loss += 0.5 * u * u + std::log(s) + half_log_2pi;
        dmean.at(r, c) = u / s / denom;
        dscale.at(r, c) = (1.0 / s - u * u / s) / denom;
      }
  } else {
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double e = pred.mean.at(r, c) - z_next.at(r, c);
        loss += e * e;
        dmean.at(r, c) = 2.0 * e / denom;
      }
  }
  loss /= denom;

  Mat dz = dynamics_backward(dyn, dyn_cache, dmean, dscale, g_dyn);
  encode_backward(enc, enc_cache, dz, g_enc);
  if (!std::isfinite(loss)) throw Error("NonFiniteLoss", "forward model loss diverged");
  return loss;
}

double reward_model_loss(const TransitionBatch& batch, const EncoderModel& enc,
                         const RewardModel& rew, std::vector<double>& g_enc,
                         std::vector<double>& g_rew) {
  std::size_t B = batch.size();
  EncodeCache enc_cache;
  Mat z = encode_with_cache(enc, batch.obs, enc_cache);
  MlpCache rew_cache;
  Mat pred = rew.net.forward(z, &rew_cache);
  double loss = 0.0;
  Mat dpred(B, 1);
  for (std::size_t r = 0; r < B; ++r) {
    double e = pred.at(r, 0) - batch.reward[r];
    loss += e * e;
    dpred.at(r, 0) = 2.0 * e / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);
  Mat dz;
  rew.net.backward(rew_cache, dpred, g_rew, &dz);
  encode_backward(enc, enc_cache, dz, g_enc);
  if (!std::isfinite(loss)) throw Error("NonFiniteLoss", "reward model loss diverged");
  return loss;
}

double inverse_dynamics_loss(const TransitionBatch& batch, const EncoderModel& enc,
                             const InverseModel& inv, double eta_d, std::vector<double>& g_enc,
                             std::vector<double>& g_inv) {
  std::size_t B = batch.size();
  std::size_t n = enc.latent_dim();
  std::size_t na = inv.n_actions_dim;
  EncodeCache cache_t, cache_next;
  Mat z_t = encode_with_cache(enc, batch.obs, cache_t);
  Mat z_next = encode_with_cache(enc, batch.next_obs, cache_next);
  Mat in = hcat(z_t, z_next);
  MlpCache inv_cache;
  Mat a_hat = inv.net.forward(in, &inv_cache);

  double loss = 0.0;
  Mat da(B, na);
  double denom = static_cast<double>(B) * static_cast<double>(na);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < na; ++c) {
      double e = batch.action.at(r, c) - a_hat.at(r, c);
      loss += eta_d * std::fabs(e);
      da.at(r, c) = -eta_d * sgn(e) / denom;
    }
  loss /= denom;

  Mat din;
  inv.net.backward(inv_cache, da, g_inv, &din);
  Mat dz_t(B, n), dz_next(B, n);
  for (std::size_t r = 0; r < B; ++r) {
    std::copy(din.row(r), din.row(r) + n, dz_t.row(r));
    std::copy(din.row(r) + n, din.row(r) + 2 * n, dz_next.row(r));
  }
  encode_backward(enc, cache_t, dz_t, g_enc);
  encode_backward(enc, cache_next, dz_next, g_enc);
  if (!std::isfinite(loss)) throw Error("NonFiniteLoss", "inverse dynamics loss diverged");
  return loss;
}

ReprModels make_repr_models(const ReprConfig& cfg, std::size_t obs_dim, std::size_t latent_dim,
                            std::size_t action_dim, const std::vector<std::size_t>& enc_hidden,
                            const std::vector<std::size_t>& dyn_hidden, bool with_inverse,
                            double eta_d, Rng& rng, double dyn_init_gain) {
  ReprModels m;
  double radius = cfg.ball_radius();

  std::vector<std::size_t> enc_widths{obs_dim};
  enc_widths.insert(enc_widths.end(), enc_hidden.begin(), enc_hidden.end());
  enc_widths.push_back(latent_dim);
  m.encoder.net = Mlp(enc_widths, Act::tanh, Act::linear);
  m.encoder.net.init_params(rng);
  m.encoder.projection_radius = radius;
  m.encoder.projection_q = cfg.projection_q;

  std::vector<std::size_t> dyn_widths{latent_dim + action_dim};
  dyn_widths.insert(dyn_widths.end(), dyn_hidden.begin(), dyn_hidden.end());
  dyn_widths.push_back(cfg.gaussian_dynamics ? 2 * latent_dim : latent_dim);
  m.dynamics.net = Mlp(dyn_widths, Act::tanh, Act::linear);
  m.dynamics.net.init_params(rng, dyn_init_gain);
  m.dynamics.gaussian = cfg.gaussian_dynamics;
  m.dynamics.projection_radius = radius;
  m.dynamics.projection_q = cfg.projection_q;
  m.dynamics.latent_dim = latent_dim;
  m.dynamics.action_dim = action_dim;

  std::vector<std::size_t> rew_widths{latent_dim};
  rew_widths.insert(rew_widths.end(), dyn_hidden.begin(), dyn_hidden.end());
  rew_widths.push_back(1);
  m.reward.net = Mlp(rew_widths, Act::tanh, Act::linear);
  m.reward.net.init_params(rng);

  if (with_inverse) {
    InverseModel inv;
    inv.net = Mlp({2 * latent_dim, 256, 128, action_dim}, Act::tanh, Act::tanh);
    inv.net.init_params(rng);
    inv.n_actions_dim = action_dim;
    m.inverse = std::move(inv);
    m.eta_d = eta_d;
  }

  double lr = cfg.lr;
  m.opt_enc.lr = m.opt_dyn.lr = m.opt_rew.lr = m.opt_inv.lr = lr;
  m.sgd_enc.lr = m.sgd_dyn.lr = m.sgd_rew.lr = m.sgd_inv.lr = lr;
  return m;
}

DiagnosticsRecord batch_diagnostics(const TransitionBatch& batch, const EncoderModel& enc,
                                    const ReprConfig& cfg) {
  DiagnosticsRecord rec;
  Mat z = encode(enc, batch.obs);
  std::size_t B = z.rows, n = z.cols;
  for (std::size_t r = 0; r < B; ++r) {
    double nrm = norm_q(z.row(r), n, cfg.projection_q);
    rec.mean_norm += nrm;
    rec.max_norm = std::max(rec.max_norm, nrm);
  }
  rec.mean_norm /= static_cast<double>(B);
  if (B >= 2) {
    for (std::size_t i = 0; i < B; ++i) {
      std::size_t j = (i + 1) % B;
      rec.mu_bd += embed_dist(z.row(i), z.row(j), n, cfg.q2, cfg.huber_delta);
      rec.mu_rd += std::fabs(batch.reward[i] - batch.reward[j]);
    }
    rec.mu_bd /= static_cast<double>(B);
    rec.mu_rd /= static_cast<double>(B);
  }
  rec.ratio = rec.mu_rd > 0.0 ? rec.mu_bd / rec.mu_rd
                              : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

DiagnosticsRecord train_step(const TransitionBatch& batch, ReprModels& models,
                             const ReprConfig& cfg, std::size_t step_index) {
  std::vector<double> g_enc(models.encoder.net.n_params(), 0.0);
  std::vector<double> g_dyn(models.dynamics.net.n_params(), 0.0);
  std::vector<double> g_rew(models.reward.net.n_params(), 0.0);
  std::vector<double> g_inv(models.inverse ? models.inverse->net.n_params() : 0, 0.0);

  DiagnosticsRecord rec = batch_diagnostics(batch, models.encoder, cfg);
  rec.step = step_index;

  bool finite = true;
  try {
    rec.loss_dbc = dbc_loss(batch, models.encoder, models.dynamics, cfg, g_enc, g_dyn);
    rec.loss_fwd = forward_model_loss(batch, models.encoder, models.dynamics, g_enc, g_dyn);
    rec.loss_rew = reward_model_loss(batch, models.encoder, models.reward, g_enc, g_rew);
    if (models.inverse)
      rec.loss_inv =
          inverse_dynamics_loss(batch, models.encoder, *models.inverse, models.eta_d, g_enc, g_inv);
  } catch (const Error& e) {
    if (e.code() != "NonFiniteLoss" && e.code() != "NonFiniteOutput") throw;
    finite = false;
  }

  rec.diverged = !finite || rec.max_norm > 1e6;
  if (finite) {
    if (cfg.use_adam) {
      models.opt_enc.step(models.encoder.net.params(), g_enc);
      models.opt_dyn.step(models.dynamics.net.params(), g_dyn);
      models.opt_rew.step(models.reward.net.params(), g_rew);
      if (models.inverse) models.opt_inv.step(models.inverse->net.params(), g_inv);
    } else {
      models.sgd_enc.step(models.encoder.net.params(), g_enc);
      models.sgd_dyn.step(models.dynamics.net.params(), g_dyn);
      models.sgd_rew.step(models.reward.net.params(), g_rew);
      if (models.inverse) models.sgd_inv.step(models.inverse->net.params(), g_inv);
    }
  }
  return rec;
}

}  // namespace bisimlab
