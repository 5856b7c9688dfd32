#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "gfn/tensor.hpp"

namespace gfn {

enum class Activation { LeakyRelu, Tanh, Identity };

/// Widths include input and output: {in, h1, ..., out}.
struct MlpSpec {
  std::vector<int> widths;
  Activation hidden = Activation::LeakyRelu;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Mat m, v;  // first/second moments, same shape as the parameter
};

/// One Adam step. Deterministic; moments are lazily initialized to zero.
void adam_update(AdamState& state, Mat& param, const Mat& grad, double lr_scale = 1.0);

/// Named parameter registry with per-parameter Adam state and a learning-rate
/// multiplier (log Z typically trains faster than the policy nets).
class ParamStore {
 public:
  Mat& add(const std::string& name, int rows, int cols, double init_scale,
           std::mt19937_64& rng, double lr_mult = 1.0);
  Mat& add_zeros(const std::string& name, int rows, int cols, double lr_mult = 1.0);

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  Mat& operator[](const std::string& name);
  const Mat& at(const std::string& name) const;

  /// Registers every parameter as a leaf on the tape.
  std::map<std::string, Var> leaves(Tape& tape) const;
  /// Adam step from the gradients accumulated on the tape.
  void apply_gradients(Tape& tape, const std::map<std::string, Var>& lv,
                       double base_lr, double lr_scale = 1.0);

  std::size_t count() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t scalar_count() const;

  /// Flat binary of 64-bit values plus a JSON sidecar of shapes.
  void save(const std::string& path) const;
  void load(const std::string& path);

  AdamState& adam(const std::string& name);
  void set_lr_mult(const std::string& name, double mult);

 private:
  std::map<std::string, Mat> params_;
  std::map<std::string, AdamState> adam_;
  std::map<std::string, double> lr_mult_;
  std::vector<std::string> order_;
};

Var mlp_forward(Tape& tape, const std::map<std::string, Var>& lv, const MlpSpec& spec,
                const std::string& prefix, Var input);
/// Plain forward pass straight from the store (sampling path; no tape).
Mat mlp_forward(const ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                const Mat& input);

void add_mlp_params(ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                    std::mt19937_64& rng, double final_scale = 1e-2);

/// sin/cos ladder over frequencies w_k = 2*pi*2^k / horizon, k = 0..dim/2-1.
Eigen::RowVectorXd fourier_time_features(double t, int dim, double horizon);

}  // namespace gfn
