#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ddx/cohort.hpp"
#include "ddx/neural.hpp"
#include "ddx/ontology.hpp"
#include "ddx/rng.hpp"
#include "ddx/screen_env.hpp"

namespace ddx {

// Picks the next symptom to ask about among the mask's set bits.
class InquiryPolicy {
 public:
  virtual ~InquiryPolicy() = default;
  virtual SymptomId choose(const ScreeningState& state, const BitVector& mask, Rng& rng) const = 0;
};

// Uniform over the mask's set bits. Throws ContractViolation on an empty mask.
SymptomId random_policy(const BitVector& mask, Rng& rng);

// Argmax of the masked logits, lowest index on ties.
SymptomId greedy_action(std::span<const double> logits, const BitVector& mask);

// Inverse-CDF draw from a distribution; returns the index.
std::size_t sample_index(std::span<const double> probs, Rng& rng);

class RandomPolicy final : public InquiryPolicy {
 public:
  SymptomId choose(const ScreeningState&, const BitVector& mask, Rng& rng) const override {
    return random_policy(mask, rng);
  }
};

class ActorCriticPolicy final : public InquiryPolicy {
 public:
  enum class Mode { greedy, sample };
  explicit ActorCriticPolicy(const ActorCritic& net, Mode mode = Mode::greedy)
      : net_(&net), mode_(mode) {}
  SymptomId choose(const ScreeningState& state, const BitVector& mask, Rng& rng) const override;

 private:
  const ActorCritic* net_;
  Mode mode_;
};

struct EpisodeResult {
  ScreeningState final_state;
  std::vector<SymptomId> actions;
  double episode_return = 0.0;
};

EpisodeResult run_episode(const InquiryPolicy& policy, const PatientRecord& record,
                          const Ontology& ontology, const EnvConfig& env, Rng& rng);

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  std::size_t epochs_per_update = 4;
  std::size_t minibatch_size = 256;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::size_t n_envs = 8;
  std::size_t rollout_steps = 2048;  // transitions gathered per update
  std::size_t total_steps = 300000;
  std::uint64_t seed = 1;
};

void validate(const PpoConfig& config);

// Transitions stored episode by episode; every stored episode is complete, so
// the bootstrap value after a terminal step is zero.
struct RolloutBuffer {
  std::size_t observation_dim = 0;
  std::vector<double> observations;  // sample-major, observation_dim per step
  std::vector<BitVector> masks;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;  // filled by compute_gae
  std::vector<double> returns;     // filled by compute_gae
  std::vector<double> episode_returns;

  std::size_t size() const { return actions.size(); }
  bool has_advantages() const { return advantages.size() == size() && size() > 0; }
  std::span<const double> observation(std::size_t t) const {
    return {observations.data() + t * observation_dim, observation_dim};
  }
  void append(const RolloutBuffer& other);
};

// Runs n_envs environments in lockstep, each with its own stream drawn from
// rng, sampling actions from the masked policy until at least n_steps
// transitions of complete episodes are stored.
RolloutBuffer collect_rollouts(const ActorCritic& policy, std::span<const PatientRecord> records,
                               const Ontology& ontology, const EnvConfig& env, std::size_t n_steps,
                               std::size_t n_envs, Rng& rng);

void compute_gae(RolloutBuffer& buffer, double gamma, double lambda);

// Zero mean, unit standard deviation (population), in place.
void normalize_advantages(std::vector<double>& advantages);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Loss and head gradients for one minibatch. Exposed for gradient checking.
struct PpoLoss {
  double total = 0.0;
  PpoStats stats;
  Eigen::MatrixXd grad_logits;
  Eigen::RowVectorXd grad_values;
};

PpoLoss ppo_loss(const Eigen::MatrixXd& logits, const Eigen::RowVectorXd& values,
                 std::span<const BitVector> masks, std::span<const std::size_t> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, const PpoConfig& config);

PpoStats ppo_update(ActorCritic& policy, Adam& optimizer, const RolloutBuffer& buffer,
                    const PpoConfig& config, Rng& rng);

struct CurvePoint {
  std::size_t update = 0;
  std::size_t steps = 0;
  double mean_return = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

std::string to_json_line(const CurvePoint& point);

struct TrainResult {
  ActorCritic policy;
  std::vector<CurvePoint> curve;
  std::size_t steps = 0;
  std::size_t mask_violations = 0;
};

using CurveCallback = std::function<void(const CurvePoint&)>;
// Optional hook to see every rollout before it is consumed.
using RolloutCallback = std::function<void(const RolloutBuffer&)>;

TrainResult train_policy(std::span<const PatientRecord> train, const Ontology& ontology,
                         const EnvConfig& env, const PpoConfig& config,
                         const ActorCriticShape& shape = {}, const CurveCallback& on_curve = {},
                         const RolloutCallback& on_rollout = {});

}  // namespace ddx
