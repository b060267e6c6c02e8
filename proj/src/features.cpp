#include "ciirl/features.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "ciirl/mdp.hpp"
#include "ciirl/util.hpp"

namespace ciirl {

using json = nlohmann::json;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

std::string to_string(InputEncoding e) { return e == InputEncoding::OneHot ? "one-hot" : "coords"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + s);
}

InputEncoding encoding_from_string(const std::string& s) {
  if (s == "one-hot") return InputEncoding::OneHot;
  if (s == "coords") return InputEncoding::Coords;
  throw std::invalid_argument("unknown input encoding: " + s);
}

namespace {

double act(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Identity: return z;
  }
  return z;
}

double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

double act_second_deriv(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Relu: return 0.0;
    case Activation::Identity: return 0.0;
  }
  return 0.0;
}

}  // namespace

void FeatureNet::Grads::setZero() {
  for (auto& l : layers) {
    l.W.setZero();
    l.b.setZero();
  }
}

Eigen::VectorXd FeatureNet::Grads::flatten() const {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += l.W.size() + l.b.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& l : layers) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) out[at++] = l.W(i, j);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) out[at++] = l.b[i];
  }
  return out;
}

FeatureNet::FeatureNet(std::vector<int> layer_dims, Activation activation, Eigen::MatrixXd item_inputs)
    : dims_(std::move(layer_dims)), activation_(activation), item_inputs_(std::move(item_inputs)) {
  if (dims_.size() < 2) throw std::invalid_argument("FeatureNet: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("FeatureNet: layer dims must be positive");
  if (item_inputs_.cols() != dims_.front())
    throw std::invalid_argument("FeatureNet: item input width does not match first layer");
  layers_.resize(dims_.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].W = Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]);
    layers_[l].b = Eigen::VectorXd::Zero(dims_[l + 1]);
  }
  cache_.resize(static_cast<std::size_t>(item_inputs_.rows()));
}

void FeatureNet::init_uniform_fan_in(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : layers_) {
    double bound = 1.0 / std::sqrt(static_cast<double>(layer.W.cols()));
    for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = rng.uniform(-bound, bound);
  }
  ++version_;
}

void FeatureNet::run_forward(const Eigen::VectorXd& x, std::vector<Eigen::VectorXd>& pre,
                             std::vector<Eigen::VectorXd>& post) const {
  const std::size_t L = layers_.size();
  pre.resize(L);
  post.resize(L + 1);
  post[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = layers_[l].W * post[l] + layers_[l].b;
    if (l + 1 == L) {
      post[l + 1] = pre[l];  // linear output layer
    } else {
      post[l + 1] = pre[l].unaryExpr([&](double z) { return act(activation_, z); });
    }
  }
}

Eigen::VectorXd FeatureNet::forward(int item) {
  if (item < 0 || item >= n_items()) throw std::invalid_argument("FeatureNet::forward: item out of range");
  Cache& c = cache_[item];
  if (!c.valid || c.version != version_) {
    run_forward(item_inputs_.row(item).transpose(), c.pre, c.post);
    c.version = version_;
    c.valid = true;
  }
  return c.post.back();
}

Eigen::MatrixXd FeatureNet::forward_all() {
  Eigen::MatrixXd out(n_items(), output_dim());
  for (int i = 0; i < n_items(); ++i) out.row(i) = forward(i).transpose();
  return out;
}

Eigen::VectorXd FeatureNet::forward_input(const Eigen::VectorXd& x) const {
  std::vector<Eigen::VectorXd> pre, post;
  run_forward(x, pre, post);
  return post.back();
}

void FeatureNet::backward(int item, const Eigen::VectorXd& upstream, Grads& accum) const {
  if (item < 0 || item >= n_items()) throw std::invalid_argument("FeatureNet::backward: item out of range");
  const Cache& c = cache_[item];
  if (!c.valid || c.version != version_)
    throw std::logic_error("FeatureNet::backward: no forward cache for this item");
  if (upstream.size() != output_dim()) throw std::invalid_argument("FeatureNet::backward: bad upstream size");
  const std::size_t L = layers_.size();
  Eigen::VectorXd delta = upstream;  // output layer is linear
  for (std::size_t l = L; l-- > 0;) {
    accum.layers[l].W.noalias() += delta * c.post[l].transpose();
    accum.layers[l].b += delta;
    if (l > 0) {
      Eigen::VectorXd back = layers_[l].W.transpose() * delta;
      delta = back.cwiseProduct(c.pre[l - 1].unaryExpr([&](double z) { return act_deriv(activation_, z); }));
    }
  }
}

Eigen::VectorXd FeatureNet::input_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& head) const {
  std::vector<Eigen::VectorXd> pre, post;
  run_forward(x, pre, post);
  const std::size_t L = layers_.size();
  Eigen::VectorXd delta = head;
  for (std::size_t l = L; l-- > 0;) {
    Eigen::VectorXd back = layers_[l].W.transpose() * delta;
    if (l > 0) {
      delta = back.cwiseProduct(pre[l - 1].unaryExpr([&](double z) { return act_deriv(activation_, z); }));
    } else {
      return back;
    }
  }
  return head;  // zero-layer nets cannot occur (>= 2 dims enforced)
}

void FeatureNet::directional_param_grads(const Eigen::VectorXd& x, const Eigen::VectorXd& dir,
                                         const Eigen::VectorXd& head, Grads& accum,
                                         Eigen::VectorXd* head_accum) const {
  // Forward pass with tangents along dir, then reverse pass over the
  // (value, tangent) program; yields d/dtheta of (input-gradient . dir).
  const std::size_t L = layers_.size();
  std::vector<Eigen::VectorXd> pre(L), post(L + 1), dpre(L), dpost(L + 1);
  post[0] = x;
  dpost[0] = dir;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = layers_[l].W * post[l] + layers_[l].b;
    dpre[l] = layers_[l].W * dpost[l];
    if (l + 1 == L) {
      post[l + 1] = pre[l];
      dpost[l + 1] = dpre[l];
    } else {
      post[l + 1] = pre[l].unaryExpr([&](double z) { return act(activation_, z); });
      dpost[l + 1] = dpre[l].cwiseProduct(pre[l].unaryExpr([&](double z) { return act_deriv(activation_, z); }));
    }
  }
  if (head_accum != nullptr) *head_accum += dpost[L];

  // adjoints of (post, dpost)
  Eigen::VectorXd abar = Eigen::VectorXd::Zero(dims_.back());
  Eigen::VectorXd dbar = head;
  for (std::size_t l = L; l-- > 0;) {
    Eigen::VectorXd zbar, dzbar;
    if (l + 1 == L) {
      zbar = abar;
      dzbar = dbar;
    } else {
      Eigen::VectorXd s1 = pre[l].unaryExpr([&](double z) { return act_deriv(activation_, z); });
      Eigen::VectorXd s2 = pre[l].unaryExpr([&](double z) { return act_second_deriv(activation_, z); });
      zbar = abar.cwiseProduct(s1) + dbar.cwiseProduct(s2).cwiseProduct(dpre[l]);
      dzbar = dbar.cwiseProduct(s1);
    }
    accum.layers[l].W.noalias() += zbar * post[l].transpose();
    accum.layers[l].W.noalias() += dzbar * dpost[l].transpose();
    accum.layers[l].b += zbar;
    abar = layers_[l].W.transpose() * zbar;
    dbar = layers_[l].W.transpose() * dzbar;
  }
}

FeatureNet::Grads FeatureNet::zero_grads() const {
  Grads g;
  g.layers.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    g.layers[l].W = Eigen::MatrixXd::Zero(layers_[l].W.rows(), layers_[l].W.cols());
    g.layers[l].b = Eigen::VectorXd::Zero(layers_[l].b.size());
  }
  return g;
}

int FeatureNet::param_count() const {
  int total = 0;
  for (const auto& l : layers_) total += static_cast<int>(l.W.size() + l.b.size());
  return total;
}

Eigen::VectorXd FeatureNet::flatten_params() const {
  Eigen::VectorXd out(param_count());
  Eigen::Index at = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) out[at++] = l.W(i, j);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) out[at++] = l.b[i];
  }
  return out;
}

void FeatureNet::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count()) throw std::invalid_argument("FeatureNet::set_params: wrong size");
  Eigen::Index at = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = flat[at++];
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = flat[at++];
  }
  ++version_;
}

Eigen::MatrixXd FeatureNet::one_hot_inputs(int n_states) {
  return Eigen::MatrixXd::Identity(n_states, n_states);
}

Eigen::MatrixXd FeatureNet::coord_inputs(int width, int height) {
  Eigen::MatrixXd out(width * height, 2);
  for (int s = 0; s < width * height; ++s) {
    out(s, 0) = width > 1 ? static_cast<double>(s % width) / (width - 1) : 0.0;
    out(s, 1) = height > 1 ? static_cast<double>(s / width) / (height - 1) : 0.0;
  }
  return out;
}

Eigen::MatrixXd FeatureNet::state_action_inputs(const Eigen::MatrixXd& state_inputs, int n_actions) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(state_inputs.rows() * n_actions, state_inputs.cols() + n_actions);
  for (Eigen::Index s = 0; s < state_inputs.rows(); ++s)
    for (int a = 0; a < n_actions; ++a) {
      Eigen::Index row = s * n_actions + a;
      out.block(row, 0, 1, state_inputs.cols()) = state_inputs.row(s);
      out(row, state_inputs.cols() + a) = 1.0;
    }
  return out;
}

double RewardModel::reward(int state) { return head.dot(net.forward(state)); }

std::vector<double> RewardModel::state_rewards() {
  Eigen::VectorXd r = net.forward_all() * head;
  return std::vector<double>(r.data(), r.data() + r.size());
}

RewardModel make_reward_model(const Gridworld& gw, InputEncoding encoding, const std::vector<int>& hidden_dims,
                              int output_dim, Activation activation, std::uint64_t seed) {
  Eigen::MatrixXd inputs = encoding == InputEncoding::OneHot
                               ? FeatureNet::one_hot_inputs(gw.mdp.n_states())
                               : FeatureNet::coord_inputs(gw.spec.width, gw.spec.height);
  std::vector<int> dims;
  dims.push_back(static_cast<int>(inputs.cols()));
  for (int h : hidden_dims) dims.push_back(h);
  dims.push_back(output_dim);
  FeatureNet net(dims, activation, std::move(inputs));
  net.init_uniform_fan_in(seed);
  return RewardModel{std::move(net), Eigen::VectorXd::Ones(output_dim)};
}

RmsProp::RmsProp(int n_params, double lr, double decay, double eps)
    : acc_(Eigen::VectorXd::Zero(n_params)), lr_(lr), decay_(decay), eps_(eps) {}

void RmsProp::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
  if (params.size() != acc_.size() || grads.size() != acc_.size())
    throw std::invalid_argument("RmsProp::step: size mismatch");
  acc_ = decay_ * acc_ + (1.0 - decay_) * grads.cwiseProduct(grads);
  params -= lr_ * (grads.array() / (acc_.array().sqrt() + eps_)).matrix();
}

namespace {

json tensor_json(const std::string& name, const Eigen::MatrixXd& m) {
  json t;
  t["name"] = name;
  t["shape"] = {m.rows(), m.cols()};
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  t["data"] = data;
  return t;
}

Eigen::MatrixXd tensor_from_json(const json& t) {
  auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2) throw std::invalid_argument("checkpoint: tensor shape must be 2-d");
  auto data = t.at("data").get<std::vector<double>>();
  if (data.size() != static_cast<std::size_t>(shape[0] * shape[1]))
    throw std::invalid_argument("checkpoint: tensor data does not match shape");
  Eigen::MatrixXd m(shape[0], shape[1]);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < shape[0]; ++i)
    for (Eigen::Index j = 0; j < shape[1]; ++j) m(i, j) = data[at++];
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const FeatureNet& net, const Eigen::VectorXd& head,
                     const std::string& kind, const std::string& encoding_tag, int width, int height) {
  json out;
  out["format"] = "ci-irl-checkpoint";
  out["version"] = 1;
  out["kind"] = kind;
  out["input_encoding"] = encoding_tag;
  out["activation"] = to_string(net.activation());
  out["width"] = width;
  out["height"] = height;
  out["layer_dims"] = net.layer_dims();
  json tensors = json::array();
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    tensors.push_back(tensor_json("layer" + std::to_string(l) + "/W", net.layers()[l].W));
    tensors.push_back(tensor_json("layer" + std::to_string(l) + "/b", net.layers()[l].b));
  }
  tensors.push_back(tensor_json("head", head));
  out["tensors"] = std::move(tensors);
  out["item_inputs"] = tensor_json("item_inputs", net.item_inputs());
  atomic_write_file(path, out.dump(1));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json in = json::parse(read_file(path));
  if (in.at("format").get<std::string>() != "ci-irl-checkpoint" || in.at("version").get<int>() != 1)
    throw std::invalid_argument("checkpoint: unsupported format or version");
  auto dims = in.at("layer_dims").get<std::vector<int>>();
  Eigen::MatrixXd item_inputs = tensor_from_json(in.at("item_inputs"));
  FeatureNet net(dims, activation_from_string(in.at("activation").get<std::string>()), std::move(item_inputs));
  Eigen::VectorXd flat(net.param_count());
  Eigen::VectorXd head;
  std::size_t li = 0;
  Eigen::Index at = 0;
  for (const auto& t : in.at("tensors")) {
    Eigen::MatrixXd m = tensor_from_json(t);
    std::string name = t.at("name").get<std::string>();
    if (name == "head") {
      head = m.col(0);
    } else {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat[at++] = m(i, j);
      ++li;
    }
  }
  (void)li;
  if (at != flat.size()) throw std::invalid_argument("checkpoint: parameter tensors incomplete");
  net.set_params(flat);
  Checkpoint ck{std::move(net), std::move(head), in.at("kind").get<std::string>(),
                in.at("input_encoding").get<std::string>(), in.at("width").get<int>(), in.at("height").get<int>()};
  return ck;
}

}  // namespace ciirl
