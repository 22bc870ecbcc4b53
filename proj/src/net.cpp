#include "bisimlab/net.hpp"

#include <cmath>

#include <json.hpp>

#include "bisimlab/kernels.hpp"

namespace bisimlab {

Mlp::Mlp(std::vector<std::size_t> widths, Act hidden, Act output)
    : widths_(std::move(widths)), hidden_(hidden), output_(output) {
  if (widths_.size() < 2) throw Error("ShapeMismatch", "MLP needs at least one layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    w_off_.push_back(total);
    total += widths_[l] * widths_[l + 1];
    b_off_.push_back(total);
    total += widths_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::init_params(Rng& rng, double gain) {
  for (std::size_t l = 0; l < n_layers(); ++l) {
    std::size_t in = widths_[l], out = widths_[l + 1];
    double scale = gain / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) params_[w_off_[l] + k] = scale * rng.normal();
    for (std::size_t k = 0; k < out; ++k) params_[b_off_[l] + k] = 0.0;
  }
}

Mat Mlp::forward(const Mat& x, MlpCache* cache) const {
  if (x.cols != in_dim()) throw Error("DimensionMismatch", "MLP input width");
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  Mat cur = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    std::size_t in = widths_[l], out = widths_[l + 1];
    Mat next(cur.rows, out);
    const double* w = params_.data() + w_off_[l];
    const double* b = params_.data() + b_off_[l];
    for (std::size_t r = 0; r < cur.rows; ++r) {
      double* dst = next.row(r);
      const double* src = cur.row(r);
      for (std::size_t o = 0; o < out; ++o) dst[o] = b[o];
      for (std::size_t i = 0; i < in; ++i) {
        if (src[i] == 0.0) continue;
        kernels::axpy(dst, src[i], w + i * out, out);
      }
    }
    Act act = (l + 1 == n_layers()) ? output_ : hidden_;
    if (act == Act::tanh)
      for (auto& val : next.v) val = std::tanh(val);
    if (cache) cache->acts.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

void Mlp::backward(const MlpCache& cache, const Mat& dout, std::vector<double>& grads,
                   Mat* dx) const {
  if (grads.size() != params_.size()) throw Error("ShapeMismatch", "gradient buffer size");
  Mat da = dout;
  for (std::size_t li = n_layers(); li-- > 0;) {
    std::size_t in = widths_[li], out = widths_[li + 1];
    const Mat& a_in = cache.acts[li];
    const Mat& a_out = cache.acts[li + 1];
    Act act = (li + 1 == n_layers()) ? output_ : hidden_;
    Mat dz = std::move(da);
    if (act == Act::tanh)
      for (std::size_t k = 0; k < dz.v.size(); ++k) dz.v[k] *= 1.0 - a_out.v[k] * a_out.v[k];
    double* gw = grads.data() + w_off_[li];
    double* gb = grads.data() + b_off_[li];
    const double* w = params_.data() + w_off_[li];
    Mat dprev(a_in.rows, in);
    for (std::size_t r = 0; r < a_in.rows; ++r) {
      const double* dzr = dz.row(r);
      const double* ar = a_in.row(r);
      kernels::axpy(gb, 1.0, dzr, out);
      double* dpr = dprev.row(r);
      for (std::size_t i = 0; i < in; ++i) {
        if (ar[i] != 0.0) kernels::axpy(gw + i * out, ar[i], dzr, out);
        dpr[i] = kernels::dot(w + i * out, dzr, out);
      }
    }
    da = std::move(dprev);
  }
  if (dx) *dx = std::move(da);
}

std::string Mlp::to_json() const {
  nlohmann::json j;
  j["widths"] = widths_;
  j["hidden_act"] = hidden_ == Act::tanh ? "tanh" : "linear";
  j["output_act"] = output_ == Act::tanh ? "tanh" : "linear";
  j["params"] = params_;
  return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  auto widths = j.at("widths").get<std::vector<std::size_t>>();
  auto parse_act = [](const std::string& s) { return s == "tanh" ? Act::tanh : Act::linear; };
  Mlp mlp(widths, parse_act(j.at("hidden_act").get<std::string>()),
          parse_act(j.at("output_act").get<std::string>()));
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != mlp.n_params()) throw Error("ShapeMismatch", "parameter count in JSON");
  mlp.params() = std::move(params);
  return mlp;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (m.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  if (params.size() != grads.size() || params.size() != m.size())
    throw Error("ShapeMismatch", "Adam buffer sizes");
  ++t;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

void Sgd::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != grads.size()) throw Error("ShapeMismatch", "SGD buffer sizes");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

}  // namespace bisimlab
