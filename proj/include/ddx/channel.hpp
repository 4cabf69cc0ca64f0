#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "ddx/rng.hpp"
#include "ddx/types.hpp"

namespace ddx {

// The language layer between the planners and the patient. A question goes
// out through render_question; the patient's true yes/no comes back through
// deliver_answer, which returns what the doctor side understood.
class SemanticChannel {
 public:
  virtual ~SemanticChannel() = default;
  virtual std::string render_question(std::string_view planner_question) = 0;
  virtual bool deliver_answer(std::string_view question, bool truth) = 0;

  // Tri-state screening answers ride on the boolean channel: an understood
  // "yes" reads as confirmed, a misunderstood "yes" as denied, anything else
  // keeps the patient's own state.
  SymptomState deliver_symptom(std::string_view question, SymptomState truth) {
    if (deliver_answer(question, truth == SymptomState::confirmed)) return SymptomState::confirmed;
    return truth == SymptomState::confirmed ? SymptomState::denied : truth;
  }
};

class ExactChannel final : public SemanticChannel {
 public:
  std::string render_question(std::string_view q) override { return std::string(q); }
  bool deliver_answer(std::string_view, bool truth) override { return truth; }
};

struct NoisyChannelConfig {
  double p_neg_to_pos = 0.0;  // a "no" is understood as "yes"
  double p_pos_to_neg = 0.0;  // a "yes" is understood as "no"
  std::uint64_t seed = 0;
};

void validate(const NoisyChannelConfig& config);

// Lumped perturbation of the answer. Every delivery consumes exactly one
// uniform draw, so streams stay aligned whatever the answers are.
class NoisyChannel final : public SemanticChannel {
 public:
  explicit NoisyChannel(const NoisyChannelConfig& config);
  std::string render_question(std::string_view q) override { return std::string(q); }
  bool deliver_answer(std::string_view question, bool truth) override;

 private:
  NoisyChannelConfig config_;
  Rng rng_;
};

// Builds one channel per consultation from a per-consultation stream seed.
using ChannelFactory = std::function<std::unique_ptr<SemanticChannel>(std::uint64_t stream_seed)>;

ChannelFactory exact_channel_factory();
ChannelFactory noisy_channel_factory(NoisyChannelConfig config);

}  // namespace ddx
