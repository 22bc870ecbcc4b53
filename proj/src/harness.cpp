#include "bisimlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "bisimlab/csv.hpp"
#include "bisimlab/kernels.hpp"
#include "bisimlab/transport.hpp"

namespace bisimlab {

using nlohmann::json;

BisimConfig metric_preset(const std::string& name, double gamma, double c) {
  BisimConfig cfg;
  if (name == "def1") {
    cfg.c_r = 1.0 - c;
    cfg.c_t = c;
  } else if (name == "def2") {
    cfg.c_r = 1.0;
    cfg.c_t = gamma;
  } else {
    throw Error("UnknownPreset", name);
  }
  return cfg;
}

VariantPreset variant_preset(const std::string& name, double gamma) {
  VariantPreset v;
  v.name = name;
  ReprConfig& r = v.repr;
  r.c_r = 1.0;
  r.c_t = gamma;
  r.q1 = 2.0;
  r.q2 = 2.0;
  r.projection_enabled = false;
  r.gaussian_dynamics = false;
  if (name == "dbc-plain" || name == "dbc-orig") {
    r.q2 = 1.0;
    r.gaussian_dynamics = true;
  } else if (name == "dbc-matched") {
    r.gaussian_dynamics = true;
  } else if (name == "dbc-alt") {
    r.c_r = 0.5;
    r.c_t = 0.5;
    r.q2 = 1.0;
    r.gaussian_dynamics = true;
  } else if (name == "normed") {
    r.projection_enabled = true;
  } else if (name == "normed-ir") {
    r.projection_enabled = true;
    v.use_ir = true;
  } else if (name == "normed-ir-id") {
    r.projection_enabled = true;
    v.use_ir = true;
    v.use_id = true;
  } else {
    throw Error("UnknownPreset", name);
  }
  return v;
}

TaskEtas default_etas(Task task) {
  switch (task) {
    case Task::sparse_cartpole:
      return {2.0, 1.0};
    case Task::sparse_pendulum:
      return {0.1, 0.1};
    case Task::mountain_car:
      return {20.0, 20.0};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Bound suite.

namespace {

struct CheckAccum {
  std::size_t cases = 0;
  std::size_t oh_cases = 0;
  double max_violation = -std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
};

class SuiteRecorder {
 public:
  void record(const std::string& name, double violation, double tol) {
    auto& acc = accum_[name];
    ++acc.cases;
    acc.max_violation = std::max(acc.max_violation, violation);
    acc.tolerance = tol;
  }
  void record_out_of_hypothesis(const std::string& name) { ++accum_[name].oh_cases; }

  std::vector<CheckResult> results() const {
    std::vector<CheckResult> out;
    for (const auto& [name, acc] : accum_) {
      CheckResult r;
      r.name = name;
      r.cases = acc.cases;
      r.max_violation = acc.cases ? acc.max_violation : 0.0;
      r.tolerance = acc.tolerance;
      if (acc.cases == 0)
        r.status = "out-of-hypothesis";
      else
        r.status = r.max_violation <= acc.tolerance ? "pass" : "fail";
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  std::map<std::string, CheckAccum> accum_;
};

PolicyTable random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
  PolicyTable pi;
  pi.n_states = n_states;
  pi.n_actions = n_actions;
  pi.probs.resize(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    auto row = rng.dirichlet(n_actions);
    std::copy(row.begin(), row.end(), pi.probs.begin() + s * n_actions);
  }
  return pi;
}

PolicyTable random_deterministic_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
  std::vector<std::size_t> acts(n_states);
  for (auto& a : acts) a = rng.uniform_int(n_actions);
  return deterministic_policy(acts, n_actions);
}

// Euclidean distances between the rows of a metric matrix: a cheap honest
// stand-in for learned embedding distances (exactly a metric, so the greedy
// covering hypothesis holds).
DistanceMatrix row_embedding_metric(const DistanceMatrix& d) {
  DistanceMatrix out;
  out.n = d.n;
  out.d.assign(d.n * d.n, 0.0);
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = i + 1; j < d.n; ++j) {
      double v = std::sqrt(kernels::sq_l2_diff(d.d.data() + i * d.n, d.d.data() + j * d.n, d.n));
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
  return out;
}

}  // namespace

std::vector<CheckResult> run_bound_suite(const BoundSuiteOptions& opt) {
  SuiteRecorder rec;
  const double tol = opt.slack_tol;
  BisimConfig solver_base;
  solver_base.tol = 1e-12;

  for (std::size_t m = 0; m < opt.n_mdps; ++m) {
    Rng inst_rng = Rng::split(opt.seed, 10000 + m);
    FiniteMdp mdp =
        generate_mdp(splitmix_seed(opt.seed, m), opt.n_states, opt.n_actions, false, 0.25, opt.gamma);
    PolicyTable pi = random_policy(opt.n_states, opt.n_actions, inst_rng);
    FiniteMdp det_mdp = generate_mdp(splitmix_seed(opt.seed, 50000 + m), opt.n_states,
                                     opt.n_actions, true, 0.25, opt.gamma);
    PolicyTable det_pi = random_deterministic_policy(opt.n_states, opt.n_actions, inst_rng);
    PolicyKernel pk = policy_kernel(mdp, pi);

    // Lemma 4 is preset-independent.
    {
      double g1 = 0.6, g2 = 0.95;
      ValueFunction v1 = policy_evaluation(mdp, pi, g1);
      ValueFunction v2 = policy_evaluation(mdp, pi, g2);
      double bound = (g2 - g1) / ((1.0 - g1) * (1.0 - g2));
      double worst = 0.0;
      for (std::size_t s = 0; s < mdp.n_states; ++s)
        worst = std::max(worst, std::fabs(v1.values[s] - v2.values[s]) - bound);
      rec.record("lemma4_discount_gap", worst, tol);
    }

    for (const auto& [c_r, c_t] : opt.presets) {
      BisimConfig cfg = solver_base;
      cfg.c_r = c_r;
      cfg.c_t = c_t;

      // --- stochastic instance ---
      MetricResult mr = metric_on_policy(mdp, pi, cfg);
      const DistanceMatrix& d = mr.metric;
      double diam_cap = c_r * (mdp.reward_max - mdp.reward_min) / (1.0 - c_t);

      {
        DistanceMatrix checked = d;
        if (opt.perturb_metric > 0.0) {
          Rng noise(splitmix_seed(opt.seed, 90000 + m));
          for (std::size_t i = 0; i < checked.n; ++i)
            for (std::size_t j = i + 1; j < checked.n; ++j) {
              double v = checked.at(i, j) * (1.0 - opt.perturb_metric * noise.uniform());
              checked.at(i, j) = v;
              checked.at(j, i) = v;
            }
        }
        ValueBoundReport vb = value_bound_report(mdp, pi, checked, cfg, opt.gamma);
        rec.record("thm1_value_bound", vb.max_violation, tol);
      }

      rec.record("lemma1_diameter", d.diameter() - diam_cap, tol);
      {
        double gap = 0.0;
        for (std::size_t i = 0; i < mdp.n_states; ++i)
          for (std::size_t j = 0; j < mdp.n_states; ++j)
            gap = std::max(gap, std::fabs(pk.reward[i] - pk.reward[j]));
        rec.record("lemma2_policy_diameter", d.diameter() - c_r / (1.0 - c_t) * gap, tol);
      }

      for (double eps : opt.epsilons) {
        Partition part = epsilon_partition(d, eps);
        VfaBoundReport vr = vfa_bound_report(mdp, pi, part, cfg, opt.gamma,
                                             uniform_weights(mdp.n_states));
        rec.record("thm2_vfa_bound", vr.max_violation, tol);
      }

      {
        auto rho = stationary_distribution(mdp, pi, 1e-12);
        DispersionStats st = dispersion_stats(mdp, pi, d, rho);
        double mean_cap = c_r * (mdp.reward_max - mdp.reward_min) / (2.0 * (1.0 - c_t));
        double var_cap = c_r * c_r * (mdp.reward_max - mdp.reward_min) *
                         (mdp.reward_max - mdp.reward_min) / (4.0 * (1.0 - c_t) * (1.0 - c_t));
        rec.record("corollary1_moment_bounds",
                   std::max(st.mu_bd - mean_cap, st.sigma2_bd - var_cap), tol);
      }

      {
        ContractionReport cr = verify_contraction(mdp, pi, cfg, 10, splitmix_seed(opt.seed, m));
        rec.record("remark1_contraction", cr.max_ratio - c_t, tol);
      }

      for (double w : opt.mix_weights) {
        std::size_t n = mdp.n_states;
        Rng prng(splitmix_seed(opt.seed, 70000 + 7 * m + static_cast<std::uint64_t>(w * 100)));
        std::vector<double> p_hat(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            p_hat[i * n + j] = (1.0 - w) * pk.kernel[i * n + j] + w / static_cast<double>(n);
        std::vector<double> r_hat(n);
        for (std::size_t i = 0; i < n; ++i)
          r_hat[i] = std::clamp(pk.reward[i] + w * prng.uniform(-0.5, 0.5), 0.0, 1.0);

        MetricResult ar = metric_approx_dynamics(mdp, pi, p_hat, r_hat, cfg);
        rec.record("thm3_diameter_approx", ar.metric.diameter() - diam_cap, tol);

        double e_r = kernels::max_abs_diff(r_hat.data(), pk.reward.data(), n);
        double e_p = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          std::vector<double> mu(pk.row(s), pk.row(s) + n);
          std::vector<double> lam(p_hat.begin() + s * n, p_hat.begin() + (s + 1) * n);
          e_p = std::max(e_p, w1_discrete(d.d, n, n, mu, lam).distance);
        }
        double gap = kernels::max_abs_diff(d.d.data(), ar.metric.d.data(), n * n);
        double cap = (2.0 * c_r * e_r + 2.0 * c_t * e_p) / (1.0 - c_t);
        rec.record("appdxd_corollary_p1_distance_error", gap - cap, tol);

        DistanceMatrix learned = row_embedding_metric(ar.metric);
        double eps_hat = 0.25 * std::max(1e-6, learned.diameter());
        Partition part = epsilon_partition(learned, eps_hat);
        ModelErrorVfaReport mv = model_error_vfa_report(mdp, pi, cfg, p_hat, r_hat, learned, part,
                                                        opt.gamma, uniform_weights(n));
        rec.record("appdxd_encoder_error", mv.enc_error - mv.enc_error_bound, tol);
        rec.record("thm4_vfa_model_error", mv.max_violation, tol);
      }

      // --- deterministic instance ---
      MetricResult dr = metric_on_policy(det_mdp, det_pi, cfg);
      {
        auto rho = stationary_distribution(det_mdp, det_pi, 1e-12);
        DispersionStats st = dispersion_stats(det_mdp, det_pi, dr.metric, rho);
        rec.record("lemma5_ratio_equality",
                   std::fabs(st.mu_bd - c_r / (1.0 - c_t) * st.mu_rd), 1e-8);
        if (c_t < std::sqrt(0.5)) {
          double k = 1.0 - 2.0 * c_t * c_t;
          double cap = 2.0 * c_r * c_r / k * st.sigma2_rd +
                       c_r * c_r * (1.0 - 2.0 * c_t) * (1.0 - 2.0 * c_t) /
                           (k * (1.0 - c_t) * (1.0 - c_t)) * st.mu_rd * st.mu_rd;
          rec.record("prop1_variance_bound", st.sigma2_bd - cap, tol);
        } else {
          rec.record_out_of_hypothesis("prop1_variance_bound");
        }
      }

      if (c_t >= opt.gamma) {
        ValueFunction v = policy_evaluation(det_mdp, det_pi, opt.gamma);
        for (double p : {1.0, 2.0}) {
          BisimConfig pcfg = cfg;
          pcfg.p = p;
          MetricResult pm = metric_on_policy(det_mdp, det_pi, pcfg);
          double worst = 0.0;
          for (std::size_t i = 0; i < det_mdp.n_states; ++i)
            for (std::size_t j = i + 1; j < det_mdp.n_states; ++j)
              worst = std::max(worst, c_r * std::fabs(v.values[i] - v.values[j]) -
                                          pm.metric.at(i, j));
          rec.record("lemma3_value_bound_deterministic", worst, tol);
        }
      } else {
        rec.record_out_of_hypothesis("lemma3_value_bound_deterministic");
      }

      {
        double a_p = std::sqrt(2.0);
        if (c_t * a_p < 1.0) {
          std::size_t n = det_mdp.n_states;
          PolicyKernel dpk = policy_kernel(det_mdp, det_pi);
          Rng prng(splitmix_seed(opt.seed, 130000 + m));
          std::vector<double> p_hat(n * n, 0.0);
          std::vector<std::size_t> tgt_true(n), tgt_hat(n);
          for (std::size_t s = 0; s < n; ++s) {
            std::size_t t = 0;
            for (std::size_t j = 0; j < n; ++j)
              if (dpk.kernel[s * n + j] > 0.5) t = j;
            tgt_true[s] = t;
            tgt_hat[s] = (prng.uniform() < 0.3) ? prng.uniform_int(n) : t;
            p_hat[s * n + tgt_hat[s]] = 1.0;
          }
          std::vector<double> r_hat(n);
          for (std::size_t s = 0; s < n; ++s)
            r_hat[s] = std::clamp(dpk.reward[s] + prng.uniform(-0.05, 0.05), 0.0, 1.0);
          BisimConfig pcfg = cfg;
          pcfg.p = 2.0;
          MetricResult exact2 = metric_on_policy(det_mdp, det_pi, pcfg);
          MetricResult hat2 = metric_approx_dynamics(det_mdp, det_pi, p_hat, r_hat, pcfg);
          double e_r = kernels::max_abs_diff(r_hat.data(), dpk.reward.data(), n);
          double e_p = 0.0;
          for (std::size_t s = 0; s < n; ++s)
            e_p = std::max(e_p, exact2.metric.at(tgt_true[s], tgt_hat[s]));
          double gap =
              kernels::max_abs_diff(exact2.metric.d.data(), hat2.metric.d.data(), n * n);
          double k = 1.0 - c_t * a_p;
          double cap = (2.0 * c_r * e_r + 2.0 * c_t * e_p +
                        c_t * (a_p - 1.0) * exact2.metric.diameter()) /
                       k;
          rec.record("appdxd_lemma9_p2", gap - cap, tol);
        } else {
          rec.record_out_of_hypothesis("appdxd_lemma9_p2");
        }
      }
    }
  }
  return rec.results();
}

// ---------------------------------------------------------------------------
// Training loop.

namespace {

std::vector<double> encode_row(const EncoderModel& enc, const std::vector<double>& obs) {
  Mat in(1, obs.size());
  std::copy(obs.begin(), obs.end(), in.row(0));
  Mat z = enc.net.forward(in);
  std::vector<double> out(z.row(0), z.row(0) + z.cols);
  double radius = enc.projection_radius;
  if (radius > 0.0) {
    double nrm = 0.0;
    if (enc.projection_q == 1.0) {
      for (double v : out) nrm += std::fabs(v);
    } else {
      nrm = std::sqrt(kernels::dot(out.data(), out.data(), out.size()));
    }
    if (nrm > radius)
      for (auto& v : out) v *= radius / nrm;
  }
  return out;
}

struct DiagCsv {
  std::optional<CsvWriter> csv;

  explicit DiagCsv(const std::string& path) {
    if (!path.empty())
      csv.emplace(path, std::vector<std::string>{"step", "loss_dbc", "loss_fwd", "loss_rew",
                                                 "loss_inv", "mean_norm", "max_norm", "mu_bd",
                                                 "mu_rd", "ratio", "diverged"});
  }

  void write(const DiagnosticsRecord& r) {
    if (!csv) return;
    csv->field(r.step);
    csv->field(r.loss_dbc);
    csv->field(r.loss_fwd);
    csv->field(r.loss_rew);
    csv->field(r.loss_inv);
    csv->field(r.mean_norm);
    csv->field(r.max_norm);
    csv->field(r.mu_bd);
    csv->field(r.mu_rd);
    csv->field(r.ratio);
    csv->field(static_cast<int>(r.diverged));
    csv->end_row();
  }
};

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("IoError", "cannot open " + path);
  out << j.dump(2) << "\n";
}

void write_manifest(const std::string& dir, const std::vector<std::string>& files) {
  json j;
  j["files"] = files;
  write_json_file(dir + "/manifest.json", j);
}

double eval_policy(const EnvConfig& env, const EncoderModel& enc, const Mlp& q_net,
                   double input_scale, std::size_t episodes, Rng& rng) {
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    EnvState st = env_reset(env, rng);
    double ep_ret = 0.0;
    while (!st.done) {
      std::vector<double> obs = noisy_wrap(observe(st, env), env, rng);
      std::vector<double> z = encode_row(enc, obs);
      for (auto& v : z) v *= input_scale;
      std::size_t a;
      try {
        a = act(q_net, z, 0.0, rng);
      } catch (const Error&) {
        a = 0;
      }
      StepResult sr = env_step(st, a, env, true);
      ep_ret += sr.reward;
      st = sr.next;
      if (sr.done) break;
    }
    total += ep_ret;
  }
  return total / static_cast<double>(episodes);
}

}  // namespace

TrainResult run_train(const TrainOptions& opt) {
  EnvConfig env = opt.env;
  const AgentConfig& agent = opt.agent;
  ReprConfig repr = opt.repr;
  repr.batch_size = opt.batch_size;

  Rng rng = Rng::split(opt.seed, 0);
  Rng model_rng = Rng::split(opt.seed, 1);

  std::size_t obs_d = obs_dim(env);
  auto values = action_values(env);
  std::size_t n_act = values.size();

  ReprModels models = make_repr_models(repr, obs_d, opt.latent_dim, 1, opt.enc_hidden,
                                       opt.dyn_hidden, agent.use_id, agent.eta_d, model_rng);
  std::vector<std::size_t> q_widths{opt.latent_dim};
  q_widths.insert(q_widths.end(), agent.q_hidden.begin(), agent.q_hidden.end());
  q_widths.push_back(n_act);
  Mlp q_net(q_widths, Act::tanh, Act::linear);
  q_net.init_params(model_rng);
  Adam opt_q, opt_enc_critic;
  opt_q.lr = agent.q_lr;
  opt_enc_critic.lr = agent.q_lr;

  // Nominal Lemma-1 ball radius of this weighting, used both as the
  // projection radius (normed variants) and to scale critic inputs.
  double nominal_radius = repr.c_r * repr.reward_range / (2.0 * (1.0 - repr.c_t));
  double input_scale = 1.0 / std::max(1.0, nominal_radius);

  ReplayBuffer buffer(opt.buffer_capacity);
  TrainResult res;
  res.radius = nominal_radius;
  res.final_eval_return = std::numeric_limits<double>::quiet_NaN();

  std::optional<DiagCsv> diag;
  std::optional<CsvWriter> episodes_csv;
  std::vector<std::string> files;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    diag.emplace(opt.out_dir + "/diagnostics.csv");
    episodes_csv.emplace(opt.out_dir + "/episodes.csv",
                         std::vector<std::string>{"episode", "steps", "extrinsic_return",
                                                  "intrinsic_return", "eval_return"});
    files = {"diagnostics.csv", "episodes.csv", "summary.json", "config.json"};
  }

  EnvState state = env_reset(env, rng);
  std::vector<double> obs = noisy_wrap(observe(state, env), env, rng);
  double ep_ext = 0.0, ep_int = 0.0;
  std::size_t ep_steps = 0;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  std::size_t eval_idx = 0;

  std::size_t ratio_window_start = opt.total_steps - opt.total_steps / 10;
  double ratio_sum = 0.0;
  std::size_t ratio_count = 0;

  for (std::size_t t = 0; t < opt.total_steps; ++t) {
    double frac = agent.eps_decay_steps
                      ? std::min(1.0, static_cast<double>(t) /
                                          static_cast<double>(agent.eps_decay_steps))
                      : 1.0;
    double eps = agent.eps_start + (agent.eps_end - agent.eps_start) * frac;

    std::vector<double> z = encode_row(models.encoder, obs);
    std::size_t a = 0;
    {
      std::vector<double> zin = z;
      for (auto& v : zin) v *= input_scale;
      bool finite = true;
      for (double v : zin)
        if (!std::isfinite(v)) finite = false;
      a = finite ? act(q_net, zin, eps, rng) : rng.uniform_int(n_act);
    }

    StepResult sr = env_step(state, a, env, false);
    std::vector<double> next_obs = noisy_wrap(observe(sr.next, env), env, rng);
    double r_ext = sr.reward;
    double r_int = 0.0;
    if (agent.use_ir) {
      std::vector<double> z_next = encode_row(models.encoder, next_obs);
      bool finite = true;
      for (double v : z) finite = finite && std::isfinite(v);
      for (double v : z_next) finite = finite && std::isfinite(v);
      if (finite)
        r_int = intrinsic_reward(z, {values[a]}, z_next, models.dynamics, agent.eta_r,
                                 agent.r_max_i);
    }

    Transition tr;
    tr.obs = obs;
    tr.action = a;
    tr.action_value = {values[a]};
    tr.reward = r_ext + r_int;
    tr.reward_extrinsic = r_ext;
    tr.next_obs = next_obs;
    tr.done = sr.done;
    buffer.push(std::move(tr));

    ep_ext += r_ext;
    ep_int += r_int;
    ++ep_steps;
    if (sr.done) {
      if (episodes_csv) {
        episodes_csv->field(res.episodes);
        episodes_csv->field(ep_steps);
        episodes_csv->field(ep_ext);
        episodes_csv->field(ep_int);
        episodes_csv->field(last_eval);
        episodes_csv->end_row();
      }
      ++res.episodes;
      ep_ext = ep_int = 0.0;
      ep_steps = 0;
      state = env_reset(env, rng);
      obs = noisy_wrap(observe(state, env), env, rng);
    } else {
      state = sr.next;
      obs = std::move(next_obs);
    }

    if (t >= agent.warmup_steps && t % agent.train_every == 0 &&
        buffer.size() >= opt.batch_size) {
      TransitionBatch batch = buffer.sample(opt.batch_size, rng);
      DiagnosticsRecord drec = train_step(batch, models, repr, t);
      std::vector<double> g_q(q_net.n_params(), 0.0);
      std::vector<double> g_enc(models.encoder.net.n_params(), 0.0);
      bool q_ok = true;
      try {
        q_update(q_net, models.encoder, batch, opt.gamma, input_scale, g_q,
                 agent.q_grad_to_encoder ? &g_enc : nullptr);
      } catch (const Error& e) {
        if (e.code() != "NonFiniteLoss" && e.code() != "NonFiniteOutput") throw;
        q_ok = false;
        drec.diverged = true;
      }
      if (q_ok) {
        opt_q.step(q_net.params(), g_q);
        if (agent.q_grad_to_encoder) opt_enc_critic.step(models.encoder.net.params(), g_enc);
      }
      if (diag) diag->write(drec);
      res.diverged = res.diverged || drec.diverged;
      if (std::isfinite(drec.mean_norm))
        res.max_mean_norm = std::max(res.max_mean_norm, drec.mean_norm);
      if (std::isfinite(drec.max_norm))
        res.max_max_norm = std::max(res.max_max_norm, drec.max_norm);
      if (t >= ratio_window_start && std::isfinite(drec.ratio)) {
        ratio_sum += drec.ratio;
        ++ratio_count;
      }
    }

    if (agent.eval_every && ((t + 1) % agent.eval_every == 0 || t + 1 == opt.total_steps)) {
      Rng eval_rng = Rng::split(opt.seed, 7700 + eval_idx++);
      last_eval = eval_policy(env, models.encoder, q_net, input_scale, agent.eval_episodes,
                              eval_rng);
      res.evals.emplace_back(t + 1, last_eval);
      res.final_eval_return = last_eval;
    }
  }
  res.final_ratio = ratio_count ? ratio_sum / static_cast<double>(ratio_count)
                                : std::numeric_limits<double>::quiet_NaN();

  if (!opt.out_dir.empty()) {
    if (opt.write_models) {
      json jm;
      jm["encoder"] = json::parse(models.encoder.net.to_json());
      jm["dynamics"] = json::parse(models.dynamics.net.to_json());
      jm["reward"] = json::parse(models.reward.net.to_json());
      if (models.inverse) jm["inverse"] = json::parse(models.inverse->net.to_json());
      jm["q"] = json::parse(q_net.to_json());
      write_json_file(opt.out_dir + "/models.json", jm);
      files.push_back("models.json");
    }
    json js;
    js["command"] = "train";
    js["variant"] = opt.variant;
    js["diverged"] = res.diverged;
    js["radius"] = res.radius;
    js["max_mean_norm"] = res.max_mean_norm;
    js["max_max_norm"] = res.max_max_norm;
    js["final_ratio"] = res.final_ratio;
    js["ratio_target"] = repr.c_r / (1.0 - repr.c_t);
    js["final_eval_return"] = res.final_eval_return;
    js["episodes"] = res.episodes;
    write_json_file(opt.out_dir + "/summary.json", js);
    write_manifest(opt.out_dir, files);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Collapse study.

CollapseResult run_collapse_study(const CollapseOptions& opt) {
  EnvConfig env = default_env_config(Task::sparse_cartpole);
  Rng rng = Rng::split(opt.seed, 0);
  Rng model_rng = Rng::split(opt.seed, 1);

  std::size_t obs_d = obs_dim(env);
  auto values = action_values(env);

  // Static buffer of random-policy transitions with all rewards zeroed.
  ReplayBuffer buffer(opt.buffer_size);
  EnvState state = env_reset(env, rng);
  std::vector<double> obs = observe(state, env);
  while (buffer.size() < opt.buffer_size) {
    std::size_t a = rng.uniform_int(values.size());
    StepResult sr = env_step(state, a, env, false);
    Transition tr;
    tr.obs = obs;
    tr.action = a;
    tr.action_value = {values[a]};
    tr.reward = 0.0;
    tr.reward_extrinsic = 0.0;
    tr.next_obs = observe(sr.next, env);
    tr.done = sr.done;
    buffer.push(std::move(tr));
    if (sr.done) {
      state = env_reset(env, rng);
      obs = observe(state, env);
    } else {
      state = sr.next;
      obs = tr.next_obs;
    }
  }

  ReprConfig repr = opt.repr;
  repr.batch_size = opt.batch_size;
  ReprModels models = make_repr_models(repr, obs_d, opt.latent_dim, 1, opt.enc_hidden,
                                       opt.dyn_hidden, false, 0.0, model_rng);

  std::optional<DiagCsv> diag;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    diag.emplace(opt.out_dir + "/diagnostics.csv");
  }

  std::deque<double> window;
  double window_sum = 0.0;
  const std::size_t window_len = 200;
  CollapseResult res;
  res.min_window_mu_bd = std::numeric_limits<double>::infinity();
  res.stayed_above_tenth = true;
  double initial_sum = 0.0;
  std::size_t initial_count = 0;

  for (std::size_t t = 0; t < opt.steps; ++t) {
    TransitionBatch batch = buffer.sample(opt.batch_size, rng);
    if (opt.use_ir) {
      // Training-time intrinsic rewards on a reward-free buffer.
      Mat z = encode(models.encoder, batch.obs);
      Mat z_next = encode(models.encoder, batch.next_obs);
      DynPrediction pred = dynamics_predict(models.dynamics, z, batch.action);
      for (std::size_t r = 0; r < batch.size(); ++r) {
        double err = kernels::sq_l2_diff(pred.mean.row(r), z_next.row(r), z.cols);
        batch.reward[r] =
            std::min(opt.r_max_i, opt.eta_r * err / (2.0 * static_cast<double>(z.cols)));
      }
    }
    DiagnosticsRecord rec = train_step(batch, models, repr, t);
    if (diag) diag->write(rec);

    if (t < 50) {
      initial_sum += rec.mu_bd;
      if (++initial_count == 50) res.initial_mu_bd = initial_sum / 50.0;
    }
    window.push_back(rec.mu_bd);
    window_sum += rec.mu_bd;
    if (window.size() > window_len) {
      window_sum -= window.front();
      window.pop_front();
    }
    if (window.size() == window_len && initial_count >= 50) {
      double mean = window_sum / static_cast<double>(window_len);
      res.min_window_mu_bd = std::min(res.min_window_mu_bd, mean);
      if (mean < 0.1 * res.initial_mu_bd) res.stayed_above_tenth = false;
    }
  }
  if (res.initial_mu_bd == 0.0 && initial_count > 0)
    res.initial_mu_bd = initial_sum / static_cast<double>(initial_count);
  res.collapsed = res.min_window_mu_bd < 1e-3 * res.initial_mu_bd;
  return res;
}

// ---------------------------------------------------------------------------
// Ratio study.

RatioTask make_ratio_task(double gamma) {
  // Discretized sparse pendulum: the angle wraps and the speed is clamped at
  // the grid edge, so the deterministic chain can never leave the grid, and
  // an energy-pumping policy keeps it cycling through the reward band.
  EnvConfig env = default_env_config(Task::sparse_pendulum);
  env.theta_rew_deg = 20.0;  // band covers the top grid columns
  GridSpec grid;
  double pi_ = 3.14159265358979323846;
  grid.lo = {-pi_, -8.0};
  grid.hi = {pi_, 8.0};
  grid.cells = {25, 25};
  RatioTask task;
  task.denv = discretize_env(env, grid, gamma);
  std::size_t n = task.denv.mdp.n_states;
  task.policy_actions.assign(n, 0);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const auto& c = task.denv.centers[s];
    task.policy_actions[s] = (c[1] >= 0.0) ? 4 : 0;  // torque with the swing
  }
  task.policy = deterministic_policy(task.policy_actions, task.denv.mdp.n_actions);
  return task;
}

RatioStudyResult run_ratio_study(const RatioStudyOptions& opt) {
  RatioTask task = make_ratio_task(0.99);
  const FiniteMdp& mdp = task.denv.mdp;

  BisimConfig cfg;
  cfg.c_r = opt.repr.c_r;
  cfg.c_t = opt.repr.c_t;
  cfg.tol = 1e-12;
  MetricResult mr = metric_on_policy(mdp, task.policy, cfg);
  auto rho = stationary_distribution(mdp, task.policy, 1e-12);
  DispersionStats st = dispersion_stats(mdp, task.policy, mr.metric, rho);

  RatioStudyResult res;
  res.analytic_target = cfg.c_r / (1.0 - cfg.c_t);
  if (st.mu_rd <= 0.0) throw Error("DegenerateTask", "stationary reward dispersion is zero");
  res.exact_ratio = st.mu_bd / st.mu_rd;

  // On-policy buffer from the discretized chain; observations expose the
  // pendulum's (cos, sin, thetadot) of each cell center.
  Rng rng = Rng::split(opt.seed, 0);
  Rng model_rng = Rng::split(opt.seed, 1);
  auto values = action_values(default_env_config(Task::sparse_pendulum));
  std::size_t n = mdp.n_states;
  auto next_state = [&](std::size_t s, std::size_t a) {
    const double* row = mdp.row(s, a);
    for (std::size_t t = 0; t < n; ++t)
      if (row[t] > 0.5) return t;
    return s;
  };
  std::size_t start = 0;
  for (std::size_t s = 0; s < n; ++s)
    if (mdp.rho0[s] > 0.5) start = s;
  std::size_t s = start;
  for (int burn = 0; burn < 1000; ++burn) s = next_state(s, task.policy_actions[s]);

  ReplayBuffer buffer(opt.buffer_transitions);
  std::size_t obs_d = 3;
  auto center_obs = [&](std::size_t st_id) {
    if (st_id == task.denv.boundary_state) return std::vector<double>(obs_d, 0.0);
    const auto& c = task.denv.centers[st_id];
    return std::vector<double>{std::cos(c[0]), std::sin(c[0]), c[1]};
  };
  while (buffer.size() < opt.buffer_transitions) {
    std::size_t a = task.policy_actions[s];
    std::size_t s2 = next_state(s, a);
    Transition tr;
    tr.obs = center_obs(s);
    tr.action = a;
    tr.action_value = {values[a]};
    tr.reward = mdp.r(s, a);
    tr.reward_extrinsic = tr.reward;
    tr.next_obs = center_obs(s2);
    tr.done = false;
    buffer.push(std::move(tr));
    s = (s2 == task.denv.boundary_state) ? start : s2;
  }

  ReprConfig repr = opt.repr;
  repr.batch_size = opt.batch_size;
  ReprModels models = make_repr_models(repr, obs_d, opt.latent_dim, 1, opt.enc_hidden,
                                       opt.dyn_hidden, false, 0.0, model_rng);

  std::optional<CsvWriter> csv;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    csv.emplace(opt.out_dir + "/ratio.csv",
                std::vector<std::string>{"step", "mu_bd", "mu_rd", "ratio", "analytic_target"});
  }

  double tail_sum = 0.0;
  std::size_t tail_count = 0;
  std::size_t tail_start = opt.steps - opt.steps / 10;
  for (std::size_t t = 0; t < opt.steps; ++t) {
    TransitionBatch batch = buffer.sample(opt.batch_size, rng);
    DiagnosticsRecord rec = train_step(batch, models, repr, t);
    if (csv) {
      csv->field(rec.step);
      csv->field(rec.mu_bd);
      csv->field(rec.mu_rd);
      csv->field(rec.ratio);
      csv->field(res.analytic_target);
      csv->end_row();
    }
    if (t >= tail_start && std::isfinite(rec.ratio)) {
      tail_sum += rec.ratio;
      ++tail_count;
    }
  }
  res.learned_ratio = tail_count ? tail_sum / static_cast<double>(tail_count)
                                 : std::numeric_limits<double>::quiet_NaN();
  res.relative_gap = std::fabs(res.learned_ratio - res.analytic_target) / res.analytic_target;

  if (!opt.out_dir.empty()) {
    json js;
    js["command"] = "ratio-study";
    js["analytic_target"] = res.analytic_target;
    js["exact_ratio"] = res.exact_ratio;
    js["learned_ratio"] = res.learned_ratio;
    js["relative_gap"] = res.relative_gap;
    write_json_file(opt.out_dir + "/summary.json", js);
    write_manifest(opt.out_dir, {"ratio.csv", "summary.json", "config.json"});
  }
  return res;
}

// ---------------------------------------------------------------------------
// CLI commands.

namespace {

json parse_config(const std::string& text) {
  return text.empty() ? json::object() : json::parse(text);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

void echo_config(const std::string& dir, const json& cfg) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  write_json_file(dir + "/config.json", cfg);
}

Task parse_task(const std::string& name) {
  if (name == "sparse_cartpole") return Task::sparse_cartpole;
  if (name == "mountain_car") return Task::mountain_car;
  if (name == "sparse_pendulum") return Task::sparse_pendulum;
  throw Error("UnknownTask", name);
}

EnvConfig env_from_json(const json& cfg, Task task) {
  EnvConfig env = default_env_config(task);
  if (!cfg.contains("env")) return env;
  const json& e = cfg.at("env");
  env.theta_term_deg = get_or(e, "theta_term_deg", env.theta_term_deg);
  env.theta_rew_deg = get_or(e, "theta_rew_deg", env.theta_rew_deg);
  env.noise_dims_multiplier = get_or(e, "noise_dims_multiplier", env.noise_dims_multiplier);
  env.noise_std = get_or(e, "noise_std", env.noise_std);
  env.episode_cap = get_or(e, "episode_cap", env.episode_cap);
  return env;
}

void repr_overrides(ReprConfig& r, const json& cfg) {
  if (!cfg.contains("repr")) return;
  const json& j = cfg.at("repr");
  r.c_r = get_or(j, "c_r", r.c_r);
  r.c_t = get_or(j, "c_t", r.c_t);
  r.q1 = get_or(j, "q1", r.q1);
  r.q2 = get_or(j, "q2", r.q2);
  r.projection_q = get_or(j, "projection_q", r.projection_q);
  r.lr = get_or(j, "lr", r.lr);
  r.stop_gradient_target = get_or(j, "stop_gradient_target", r.stop_gradient_target);
  r.projection_enabled = get_or(j, "projection_enabled", r.projection_enabled);
  r.huber_delta = get_or(j, "huber_delta", r.huber_delta);
  r.gaussian_dynamics = get_or(j, "gaussian_dynamics", r.gaussian_dynamics);
  r.reward_range = get_or(j, "reward_range", r.reward_range);
  r.use_adam = get_or(j, "use_adam", r.use_adam);
}

PolicyTable policy_from_json(const json& cfg, const FiniteMdp& mdp) {
  if (!cfg.contains("policy") || cfg.at("policy") == "uniform")
    return uniform_policy(mdp.n_states, mdp.n_actions);
  const json& p = cfg.at("policy");
  if (p.is_object() && p.contains("actions"))
    return deterministic_policy(p.at("actions").get<std::vector<std::size_t>>(), mdp.n_actions);
  PolicyTable pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  for (const auto& row : p) {
    auto r = row.get<std::vector<double>>();
    pi.probs.insert(pi.probs.end(), r.begin(), r.end());
  }
  if (pi.probs.size() != mdp.n_states * mdp.n_actions)
    throw Error("ShapeMismatch", "policy table shape");
  return pi;
}

FiniteMdp mdp_from_config(const json& cfg) {
  if (cfg.contains("mdp_file")) {
    std::ifstream in(cfg.at("mdp_file").get<std::string>());
    if (!in) throw Error("IoError", "cannot open mdp_file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return mdp_from_json(text);
  }
  if (cfg.contains("mdp")) return mdp_from_json(cfg.at("mdp").dump());
  if (cfg.contains("generator")) {
    const json& g = cfg.at("generator");
    return generate_mdp(get_or<std::uint64_t>(g, "seed", 0), get_or<std::size_t>(g, "n_states", 8),
                        get_or<std::size_t>(g, "n_actions", 2),
                        get_or<bool>(g, "deterministic", false), get_or<double>(g, "sparsity", 0.0),
                        get_or<double>(g, "gamma", 0.9));
  }
  throw Error("ConfigError", "config needs one of mdp / mdp_file / generator");
}

}  // namespace

int cmd_verify_bounds(const std::string& config_json, const std::string& out_dir) {
  json cfg;
  BoundSuiteOptions opt;
  try {
    cfg = parse_config(config_json);
    opt.n_mdps = get_or<std::size_t>(cfg, "n_mdps", opt.n_mdps);
    opt.n_states = get_or<std::size_t>(cfg, "n_states", opt.n_states);
    opt.n_actions = get_or<std::size_t>(cfg, "n_actions", opt.n_actions);
    opt.gamma = get_or(cfg, "gamma", opt.gamma);
    opt.seed = get_or<std::uint64_t>(cfg, "seed", opt.seed);
    opt.perturb_metric = get_or(cfg, "perturb_metric", opt.perturb_metric);
    if (cfg.contains("presets")) {
      opt.presets.clear();
      for (const auto& p : cfg.at("presets")) opt.presets.emplace_back(p.at(0), p.at(1));
    }
    if (cfg.contains("epsilons")) opt.epsilons = cfg.at("epsilons").get<std::vector<double>>();
    if (cfg.contains("mix_weights"))
      opt.mix_weights = cfg.at("mix_weights").get<std::vector<double>>();
    echo_config(out_dir, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  auto t0 = std::chrono::steady_clock::now();
  std::vector<CheckResult> checks = run_bound_suite(opt);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool all_pass = true;
  json jchecks = json::array();
  for (const auto& c : checks) {
    if (c.status == "fail") all_pass = false;
    json jc;
    jc["name"] = c.name;
    jc["status"] = c.status;
    jc["cases"] = c.cases;
    jc["max_violation"] = c.max_violation;
    jc["tolerance"] = c.tolerance;
    jchecks.push_back(jc);
    std::printf("%-36s %-18s cases=%-6zu max_violation=%.3e\n", c.name.c_str(), c.status.c_str(),
                c.cases, c.max_violation);
    if (c.status == "fail") std::fprintf(stderr, "FAILED check: %s\n", c.name.c_str());
  }
  if (!out_dir.empty()) {
    json js;
    js["command"] = "verify-bounds";
    js["all_pass"] = all_pass;
    js["checks"] = jchecks;
    js["wall_time_s"] = wall;
    write_json_file(out_dir + "/summary.json", js);
    write_json_file(out_dir + "/checks.json", jchecks);
    write_manifest(out_dir, {"config.json", "summary.json", "checks.json"});
  }
  return all_pass ? 0 : 1;
}

int cmd_exact_metric(const std::string& config_json, const std::string& out_dir) {
  json cfg;
  FiniteMdp mdp;
  PolicyTable pi;
  BisimConfig bc;
  std::string variant;
  try {
    cfg = parse_config(config_json);
    mdp = mdp_from_config(cfg);
    pi = policy_from_json(cfg, mdp);
    variant = get_or<std::string>(cfg, "variant", "on-policy");
    if (cfg.contains("preset")) {
      bc = metric_preset(cfg.at("preset").get<std::string>(), mdp.gamma,
                         get_or(cfg, "preset_c", 0.5));
    }
    if (cfg.contains("bisim")) {
      const json& b = cfg.at("bisim");
      bc.c_r = get_or(b, "c_r", bc.c_r);
      bc.c_t = get_or(b, "c_t", bc.c_t);
      bc.p = get_or(b, "p", bc.p);
      bc.tol = get_or(b, "tol", bc.tol);
      bc.max_iter = get_or<std::size_t>(b, "max_iter", bc.max_iter);
    }
    echo_config(out_dir, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    auto t0 = std::chrono::steady_clock::now();
    MetricResult mr;
    if (variant == "policy-independent") {
      mr = metric_policy_independent(mdp, bc);
    } else if (variant == "approx-dynamics") {
      auto p_hat = cfg.at("p_hat").get<std::vector<double>>();
      auto r_hat = cfg.at("r_hat").get<std::vector<double>>();
      mr = metric_approx_dynamics(mdp, pi, p_hat, r_hat, bc);
    } else {
      mr = metric_on_policy(mdp, pi, bc);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out_dir.empty()) {
      metric_to_csv(mr.metric, out_dir + "/metric.csv");
      json js;
      js["command"] = "exact-metric";
      js["variant"] = variant;
      js["diameter"] = mr.metric.diameter();
      js["iterations"] = mr.trace.iterations;
      js["residual"] = mr.trace.residuals.empty() ? 0.0 : mr.trace.residuals.back();
      js["converged"] = mr.trace.converged;
      js["c_r"] = bc.c_r;
      js["c_t"] = bc.c_t;
      js["p"] = bc.p;
      js["wall_time_s"] = wall;
      write_json_file(out_dir + "/summary.json", js);
      write_manifest(out_dir, {"config.json", "metric.csv", "summary.json"});
    }
    std::printf("diameter=%.12g iterations=%zu residual=%.3e\n", mr.metric.diameter(),
                mr.trace.iterations,
                mr.trace.residuals.empty() ? 0.0 : mr.trace.residuals.back());
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 1;
  }
}

int cmd_train(const std::string& config_json, const std::string& out_dir) {
  json cfg;
  TrainOptions opt;
  try {
    cfg = parse_config(config_json);
    Task task = parse_task(get_or<std::string>(cfg, "task", "sparse_cartpole"));
    opt.env = env_from_json(cfg, task);
    opt.gamma = get_or(cfg, "gamma", opt.gamma);
    opt.variant = get_or<std::string>(cfg, "variant", "normed");
    VariantPreset preset = variant_preset(opt.variant, opt.gamma);
    opt.repr = preset.repr;
    if (task == Task::mountain_car) opt.repr.reward_range = 1.01;
    repr_overrides(opt.repr, cfg);
    opt.agent.use_ir = preset.use_ir;
    opt.agent.use_id = preset.use_id;
    TaskEtas etas = default_etas(task);
    opt.agent.eta_r = etas.eta_r;
    opt.agent.eta_d = etas.eta_d;
    if (cfg.contains("agent")) {
      const json& a = cfg.at("agent");
      opt.agent.eta_r = get_or(a, "eta_r", opt.agent.eta_r);
      opt.agent.eta_d = get_or(a, "eta_d", opt.agent.eta_d);
      opt.agent.r_max_i = get_or(a, "r_max_i", opt.agent.r_max_i);
      opt.agent.eps_start = get_or(a, "eps_start", opt.agent.eps_start);
      opt.agent.eps_end = get_or(a, "eps_end", opt.agent.eps_end);
      opt.agent.eps_decay_steps = get_or(a, "eps_decay_steps", opt.agent.eps_decay_steps);
      opt.agent.q_lr = get_or(a, "q_lr", opt.agent.q_lr);
      opt.agent.q_grad_to_encoder = get_or(a, "q_grad_to_encoder", opt.agent.q_grad_to_encoder);
      opt.agent.train_every = get_or<std::size_t>(a, "train_every", opt.agent.train_every);
      opt.agent.warmup_steps = get_or<std::size_t>(a, "warmup_steps", opt.agent.warmup_steps);
      opt.agent.eval_every = get_or<std::size_t>(a, "eval_every", opt.agent.eval_every);
      opt.agent.eval_episodes = get_or<std::size_t>(a, "eval_episodes", opt.agent.eval_episodes);
      if (a.contains("q_hidden")) opt.agent.q_hidden = a.at("q_hidden").get<std::vector<std::size_t>>();
    }
    opt.total_steps = get_or<std::size_t>(cfg, "steps", opt.total_steps);
    opt.latent_dim = get_or<std::size_t>(cfg, "latent_dim", opt.latent_dim);
    if (cfg.contains("enc_hidden"))
      opt.enc_hidden = cfg.at("enc_hidden").get<std::vector<std::size_t>>();
    if (cfg.contains("dyn_hidden"))
      opt.dyn_hidden = cfg.at("dyn_hidden").get<std::vector<std::size_t>>();
    opt.batch_size = get_or<std::size_t>(cfg, "batch_size", opt.batch_size);
    opt.buffer_capacity = get_or<std::size_t>(cfg, "buffer_capacity", opt.buffer_capacity);
    opt.seed = get_or<std::uint64_t>(cfg, "seed", opt.seed);
    opt.out_dir = out_dir;
    echo_config(out_dir, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  TrainResult res = run_train(opt);
  std::printf("train done: diverged=%d max_mean_norm=%.6g radius=%.6g final_ratio=%.6g "
              "final_eval_return=%.6g\n",
              static_cast<int>(res.diverged), res.max_mean_norm, res.radius, res.final_ratio,
              res.final_eval_return);
  return 0;
}

int cmd_ratio_study(const std::string& config_json, const std::string& out_dir) {
  json cfg;
  RatioStudyOptions opt;
  try {
    cfg = parse_config(config_json);
    std::string variant = get_or<std::string>(cfg, "variant", "normed");
    opt.repr = variant_preset(variant, 0.99).repr;
    opt.repr.c_r = get_or(cfg, "c_r", 1.0);
    opt.repr.c_t = get_or(cfg, "c_t", 0.5);
    if (cfg.contains("preset")) {
      BisimConfig bc = metric_preset(cfg.at("preset").get<std::string>(), 0.99,
                                     get_or(cfg, "preset_c", 0.5));
      opt.repr.c_r = bc.c_r;
      opt.repr.c_t = bc.c_t;
    }
    repr_overrides(opt.repr, cfg);
    opt.steps = get_or<std::size_t>(cfg, "steps", opt.steps);
    opt.batch_size = get_or<std::size_t>(cfg, "batch_size", opt.batch_size);
    opt.latent_dim = get_or<std::size_t>(cfg, "latent_dim", opt.latent_dim);
    opt.buffer_transitions = get_or<std::size_t>(cfg, "buffer_transitions", opt.buffer_transitions);
    opt.seed = get_or<std::uint64_t>(cfg, "seed", opt.seed);
    opt.out_dir = out_dir;
    echo_config(out_dir, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  RatioStudyResult res = run_ratio_study(opt);
  std::printf("analytic_target=%.6g exact_ratio=%.12g learned_ratio=%.6g relative_gap=%.4f\n",
              res.analytic_target, res.exact_ratio, res.learned_ratio, res.relative_gap);
  return 0;
}

int cmd_gen_mdp(const std::string& config_json, const std::string& out_dir) {
  json cfg;
  try {
    cfg = parse_config(config_json);
    FiniteMdp mdp = generate_mdp(
        get_or<std::uint64_t>(cfg, "seed", 0), get_or<std::size_t>(cfg, "n_states", 8),
        get_or<std::size_t>(cfg, "n_actions", 2), get_or<bool>(cfg, "deterministic", false),
        get_or<double>(cfg, "sparsity", 0.0), get_or<double>(cfg, "gamma", 0.9));
    std::string dir = out_dir.empty() ? "." : out_dir;
    std::filesystem::create_directories(dir);
    echo_config(dir, cfg);
    std::ofstream out(dir + "/mdp.json");
    out << mdp_to_json(mdp) << "\n";
    write_manifest(dir, {"config.json", "mdp.json"});
    std::printf("wrote %s/mdp.json\n", dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
}

}  // namespace bisimlab
