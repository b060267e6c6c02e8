#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ciirl {

struct Gridworld;

enum class Activation { Tanh, Relu, Identity };
enum class InputEncoding { OneHot, Coords };

std::string to_string(Activation a);
std::string to_string(InputEncoding e);
Activation activation_from_string(const std::string& s);
InputEncoding encoding_from_string(const std::string& s);

/// Small MLP over a fixed table of item input vectors (one row per state, or
/// per state-action pair for the discriminator). Hidden layers use the
/// configured activation; the output layer is linear. Forward passes cache
/// activations per item for the exact manual backward pass.
class FeatureNet {
 public:
  struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
  };

  struct Grads {
    std::vector<Layer> layers;
    void setZero();
    Eigen::VectorXd flatten() const;
  };

  /// layer_dims = {input_dim, hidden..., output_dim}; weights start at zero.
  FeatureNet(std::vector<int> layer_dims, Activation activation, Eigen::MatrixXd item_inputs);

  /// Symmetric uniform fan-in init: W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init_uniform_fan_in(std::uint64_t seed);

  int output_dim() const { return dims_.back(); }
  int input_dim() const { return dims_.front(); }
  int n_items() const { return static_cast<int>(item_inputs_.rows()); }
  const std::vector<Layer>& layers() const { return layers_; }
  Activation activation() const { return activation_; }
  const std::vector<int>& layer_dims() const { return dims_; }
  const Eigen::MatrixXd& item_inputs() const { return item_inputs_; }

  /// Feature vector of one item; caches activations for backward().
  Eigen::VectorXd forward(int item);
  /// All item features as rows (n_items x output_dim); caches everything.
  Eigen::MatrixXd forward_all();
  /// Forward on an arbitrary input vector (no cache kept).
  Eigen::VectorXd forward_input(const Eigen::VectorXd& x) const;

  /// Accumulates exact gradients of upstream . phi(item) into `accum`.
  /// Throws std::logic_error when forward() has not cached this item.
  void backward(int item, const Eigen::VectorXd& upstream, Grads& accum) const;

  /// Gradient of head . phi(x) with respect to the raw input vector.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& head) const;

  /// Gradients w.r.t. parameters (and head) of the directional derivative
  /// d/de head . phi(x + e*dir), the mixed second-order term needed by
  /// input-gradient penalties.
  void directional_param_grads(const Eigen::VectorXd& x, const Eigen::VectorXd& dir, const Eigen::VectorXd& head,
                               Grads& accum, Eigen::VectorXd* head_accum) const;

  Grads zero_grads() const;
  int param_count() const;
  Eigen::VectorXd flatten_params() const;
  void set_params(const Eigen::VectorXd& flat);

  static Eigen::MatrixXd one_hot_inputs(int n_states);
  /// Rows of (x, y) scaled to [0, 1].
  static Eigen::MatrixXd coord_inputs(int width, int height);
  /// State encoding rows stacked with one-hot action blocks, ordered s*A+a.
  static Eigen::MatrixXd state_action_inputs(const Eigen::MatrixXd& state_inputs, int n_actions);

 private:
  struct Cache {
    std::vector<Eigen::VectorXd> pre;   // z_l per layer
    std::vector<Eigen::VectorXd> post;  // a_0 = input, a_1.. = layer outputs
    std::uint64_t version = 0;
    bool valid = false;
  };

  std::vector<int> dims_;
  Activation activation_;
  Eigen::MatrixXd item_inputs_;  // n_items x input_dim
  std::vector<Layer> layers_;
  mutable std::vector<Cache> cache_;
  std::uint64_t version_ = 1;

  void run_forward(const Eigen::VectorXd& x, std::vector<Eigen::VectorXd>& pre,
                   std::vector<Eigen::VectorXd>& post) const;
};

/// r(s) = head . phi(s): feature network plus linear reward head.
struct RewardModel {
  FeatureNet net;
  Eigen::VectorXd head;

  int feature_dim() const { return net.output_dim(); }
  double reward(int state);
  /// Rewards for all items, as a plain vector.
  std::vector<double> state_rewards();
  Eigen::MatrixXd features_all() { return net.forward_all(); }
};

/// Builds the default reward model for a gridworld: the requested input
/// encoding, hidden widths and output dimension; head starts at all ones.
RewardModel make_reward_model(const Gridworld& gw, InputEncoding encoding, const std::vector<int>& hidden_dims,
                              int output_dim, Activation activation, std::uint64_t seed);

/// RMSProp with persistent accumulator: acc = decay*acc + (1-decay)*g^2,
/// param -= lr * g / (sqrt(acc) + eps).
class RmsProp {
 public:
  RmsProp(int n_params, double lr = 1e-3, double decay = 0.99, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);
  const Eigen::VectorXd& accumulator() const { return acc_; }

 private:
  Eigen::VectorXd acc_;
  double lr_, decay_, eps_;
};

void save_checkpoint(const std::filesystem::path& path, const FeatureNet& net, const Eigen::VectorXd& head,
                     const std::string& kind, const std::string& encoding_tag, int width, int height);
struct Checkpoint {
  FeatureNet net;
  Eigen::VectorXd head;
  std::string kind;
  std::string encoding_tag;
  int width = 0;
  int height = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ciirl
