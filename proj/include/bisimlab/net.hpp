#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bisimlab/common.hpp"
#include "bisimlab/rng.hpp"

namespace bisimlab {

// Row-major batch matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

enum class Act { linear, tanh };

struct MlpCache {
  std::vector<Mat> acts;  // acts[0] = input, acts[l+1] = output of layer l
};

// Dense MLP with flat parameter storage (one vector holding every weight and
// bias) so the optimizer and finite-difference checks can treat models as
// plain parameter vectors. Hidden layers use `hidden`, the last layer `output`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, Act hidden = Act::tanh, Act output = Act::linear);

  void init_params(Rng& rng, double gain = 1.0);

  std::size_t n_layers() const { return widths_.size() - 1; }
  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const { return widths_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t n_params() const { return params_.size(); }

  Mat forward(const Mat& x, MlpCache* cache = nullptr) const;

  // Accumulates parameter gradients into `grads` (same layout as params());
  // when dx is non-null it receives the gradient w.r.t. the input batch.
  void backward(const MlpCache& cache, const Mat& dout, std::vector<double>& grads,
                Mat* dx = nullptr) const;

  std::string to_json() const;
  static Mlp from_json(const std::string& text);

 private:
  friend struct MlpLayout;
  std::vector<std::size_t> widths_;
  Act hidden_ = Act::tanh;
  Act output_ = Act::linear;
  std::vector<double> params_;
  std::vector<std::size_t> w_off_, b_off_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(std::vector<double>& params, const std::vector<double>& grads);

  std::vector<double> m, v;
  std::size_t t = 0;
};

struct Sgd {
  double lr = 1e-3;
  void step(std::vector<double>& params, const std::vector<double>& grads);
};

}  // namespace bisimlab
