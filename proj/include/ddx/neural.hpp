#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ddx/rng.hpp"
#include "ddx/types.hpp"

namespace ddx {

enum class Activation { relu, tanh, identity };

const char* to_string(Activation a);
Activation parse_activation(std::string_view text);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;
};

// Per-layer inputs and activated outputs of a forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
  std::vector<std::span<double>> blocks();
};

// Feed-forward network. Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  // sizes = [input, hidden..., output]; one activation per layer. Weights are
  // scaled normal draws; output_gain shrinks the last layer.
  Mlp(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations, Rng& rng,
      double output_gain = 1.0);
  explicit Mlp(std::vector<DenseLayer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::vector<std::size_t> layer_sizes() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;
  // Accumulates parameter gradients into `grads` and returns dL/dx.
  Eigen::MatrixXd backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                           MlpGradients& grads) const;

  MlpGradients zero_gradients() const;
  std::vector<std::span<double>> parameters();
  bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct ActorCriticShape {
  std::vector<std::size_t> trunk_hidden{256, 256};
  std::size_t head_hidden = 128;
};

// Shared trunk producing a representation, with separate policy-logit and
// state-value heads.
struct ActorCritic {
  Mlp trunk;
  Mlp policy_head;
  Mlp value_head;

  static ActorCritic create(std::size_t observation_dim, std::size_t action_count,
                            const ActorCriticShape& shape, Rng& rng);

  std::size_t observation_dim() const { return trunk.input_dim(); }
  std::size_t action_count() const { return policy_head.output_dim(); }
  std::vector<std::span<double>> parameters();
};

struct ActorCriticGradients {
  MlpGradients trunk;
  MlpGradients policy_head;
  MlpGradients value_head;

  std::vector<std::span<double>> blocks();
};

struct ActorCriticForward {
  Eigen::MatrixXd logits;   // actions x batch
  Eigen::RowVectorXd values;  // batch
  ForwardCache trunk, policy_head, value_head;
};

ActorCriticForward forward(const ActorCritic& net, const Eigen::MatrixXd& observations);
// Backpropagates head gradients through both heads and the trunk.
ActorCriticGradients backward(const ActorCritic& net, const ActorCriticForward& fwd,
                              const Eigen::MatrixXd& grad_logits,
                              const Eigen::RowVectorXd& grad_values);

// Zero probability off the mask, stable under large logits. Throws
// ContractViolation on an empty mask.
std::vector<double> masked_softmax(std::span<const double> logits, const BitVector& mask);
std::vector<double> softmax(std::span<const double> logits);

// -log probs[label], with the probability clipped at 1e-12.
double cross_entropy(std::span<const double> probs, std::size_t label);
std::vector<double> cross_entropy_gradient(std::span<const double> probs, std::size_t label);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Bias-corrected update. Throws NumericError on non-finite gradients and
  // ShapeError when the block layout changes between calls.
  void step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads);

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

double global_norm(std::span<const std::span<double>> blocks);
void scale_blocks(std::span<const std::span<double>> blocks, double factor);

inline constexpr int kWeightsFormatVersion = 1;

std::string serialize_weights(const Mlp& net);
std::string serialize_weights(const ActorCritic& net);
Mlp parse_mlp_weights(std::string_view text);
ActorCritic parse_actor_critic_weights(std::string_view text);

void save_weights(const Mlp& net, const std::filesystem::path& path);
void save_weights(const ActorCritic& net, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);
ActorCritic load_actor_critic(const std::filesystem::path& path);

}  // namespace ddx
