#include "gfn/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace gfn {

void adam_update(AdamState& st, Mat& param, const Mat& grad, double lr_scale) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ShapeError("adam_update: parameter/gradient shape mismatch");
  if (st.m.size() == 0) {
    st.m = Mat::Zero(param.rows(), param.cols());
    st.v = Mat::Zero(param.rows(), param.cols());
  }
  st.step += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v.array().matrix() + (1.0 - st.beta2) * grad.array().square().matrix();
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  Mat mhat = st.m / bc1;
  Mat vhat = st.v / bc2;
  param.array() -= st.lr * lr_scale * mhat.array() / (vhat.array().sqrt() + st.eps);
}

Mat& ParamStore::add(const std::string& name, int rows, int cols, double init_scale,
                     std::mt19937_64& rng, double lr_mult) {
  if (params_.count(name)) throw std::runtime_error("duplicate parameter " + name);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = init_scale * gauss(rng);
  params_[name] = std::move(m);
  lr_mult_[name] = lr_mult;
  adam_[name] = AdamState{};
  order_.push_back(name);
  return params_[name];
}

Mat& ParamStore::add_zeros(const std::string& name, int rows, int cols, double lr_mult) {
  if (params_.count(name)) throw std::runtime_error("duplicate parameter " + name);
  params_[name] = Mat::Zero(rows, cols);
  lr_mult_[name] = lr_mult;
  adam_[name] = AdamState{};
  order_.push_back(name);
  return params_[name];
}

Mat& ParamStore::operator[](const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("unknown parameter " + name);
  return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("unknown parameter " + name);
  return it->second;
}

AdamState& ParamStore::adam(const std::string& name) { return adam_.at(name); }

void ParamStore::set_lr_mult(const std::string& name, double mult) { lr_mult_.at(name) = mult; }

std::map<std::string, Var> ParamStore::leaves(Tape& tape) const {
  std::map<std::string, Var> lv;
  for (const auto& name : order_) lv[name] = tape.leaf(params_.at(name));
  return lv;
}

void ParamStore::apply_gradients(Tape& tape, const std::map<std::string, Var>& lv,
                                 double base_lr, double lr_scale) {
  for (const auto& name : order_) {
    auto it = lv.find(name);
    if (it == lv.end()) continue;
    Mat g = tape.grad(it->second);
    AdamState& st = adam_.at(name);
    st.lr = base_lr * lr_mult_.at(name);
    adam_update(st, params_.at(name), g, lr_scale);
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += static_cast<std::size_t>(params_.at(name).size());
  return n;
}

void ParamStore::save(const std::string& path) const {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + path);
  nlohmann::json sidecar;
  sidecar["params"] = nlohmann::json::array();
  for (const auto& name : order_) {
    const Mat& m = params_.at(name);
    sidecar["params"].push_back({{"name", name},
                                 {"rows", m.rows()},
                                 {"cols", m.cols()}});
    // column-major, matching Eigen's internal layout
    bin.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  std::ofstream side(path + ".json");
  side << sidecar.dump(2) << "\n";
}

void ParamStore::load(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot open " + path + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(side);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + path);
  for (const auto& entry : sidecar["params"]) {
    std::string name = entry["name"];
    Eigen::Index rows = entry["rows"], cols = entry["cols"];
    auto it = params_.find(name);
    if (it == params_.end()) throw std::runtime_error("checkpoint has unknown parameter " + name);
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    bin.read(reinterpret_cast<char*>(it->second.data()),
             static_cast<std::streamsize>(sizeof(double) * rows * cols));
  }
  if (!bin) throw std::runtime_error("checkpoint truncated: " + path);
}

namespace {
Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::LeakyRelu: return leaky_relu(x);
    case Activation::Tanh: return vtanh(x);
    case Activation::Identity: return x;
  }
  throw std::runtime_error("unknown activation");
}

Mat activate(const Mat& x, Activation a) {
  switch (a) {
    case Activation::LeakyRelu:
      return (x.array() > 0.0).select(x.array(), 0.01 * x.array()).matrix();
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Identity: return x;
  }
  throw std::runtime_error("unknown activation");
}
}  // namespace

Var mlp_forward(Tape& tape, const std::map<std::string, Var>& lv, const MlpSpec& spec,
                const std::string& prefix, Var input) {
  if (spec.widths.size() < 2) throw std::runtime_error("MlpSpec needs at least one layer");
  if (tape.value(input).cols() != spec.widths.front())
    throw ShapeError("mlp_forward: input width mismatch for " + prefix);
  Var h = input;
  std::size_t nlayer = spec.widths.size() - 1;
  for (std::size_t l = 0; l < nlayer; ++l) {
    std::string suffix = std::to_string(l);
    Var W = lv.at(prefix + ".W" + suffix);
    Var b = lv.at(prefix + ".b" + suffix);
    h = add_rowvec(matmul(h, W), b);
    if (l + 1 < nlayer) h = activate(h, spec.hidden);
  }
  return h;
}

Mat mlp_forward(const ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                const Mat& input) {
  if (input.cols() != spec.widths.front())
    throw ShapeError("mlp_forward: input width mismatch for " + prefix);
  Mat h = input;
  std::size_t nlayer = spec.widths.size() - 1;
  for (std::size_t l = 0; l < nlayer; ++l) {
    std::string suffix = std::to_string(l);
    h = h * store.at(prefix + ".W" + suffix);
    h.rowwise() += store.at(prefix + ".b" + suffix).row(0);
    if (l + 1 < nlayer) h = activate(h, spec.hidden);
  }
  return h;
}

void add_mlp_params(ParamStore& store, const MlpSpec& spec, const std::string& prefix,
                    std::mt19937_64& rng, double final_scale) {
  std::size_t nlayer = spec.widths.size() - 1;
  for (std::size_t l = 0; l < nlayer; ++l) {
    int fan_in = spec.widths[l];
    int fan_out = spec.widths[l + 1];
    bool last = (l + 1 == nlayer);
    double scale = last ? final_scale : std::sqrt(2.0 / fan_in);
    store.add(prefix + ".W" + std::to_string(l), fan_in, fan_out, scale, rng);
    store.add_zeros(prefix + ".b" + std::to_string(l), 1, fan_out);
  }
}

Eigen::RowVectorXd fourier_time_features(double t, int dim, double horizon) {
  if (dim <= 0 || dim % 2 != 0) throw std::runtime_error("fourier feature dim must be even, positive");
  Eigen::RowVectorXd out(dim);
  int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    double omega = 2.0 * M_PI * std::exp2(static_cast<double>(k)) / horizon;
    out(k) = std::sin(omega * t);
    out(half + k) = std::cos(omega * t);
  }
  return out;
}

}  // namespace gfn
