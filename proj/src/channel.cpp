#include "ddx/channel.hpp"

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {

void validate(const NoisyChannelConfig& c) {
  for (double p : {c.p_neg_to_pos, c.p_pos_to_neg}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("noise rates must lie in [0, 1], got " + format_double(p));
    }
  }
}

NoisyChannel::NoisyChannel(const NoisyChannelConfig& config) : config_(config), rng_(config.seed) {
  validate(config);
}

bool NoisyChannel::deliver_answer(std::string_view, bool truth) {
  const double u = rng_.uniform();
  return truth ? !(u < config_.p_pos_to_neg) : u < config_.p_neg_to_pos;
}

ChannelFactory exact_channel_factory() {
  return [](std::uint64_t) { return std::make_unique<ExactChannel>(); };
}

ChannelFactory noisy_channel_factory(NoisyChannelConfig config) {
  validate(config);
  return [config](std::uint64_t stream) {
    auto c = config;
    c.seed = derive_seed(config.seed, stream);
    return std::make_unique<NoisyChannel>(c);
  };
}

}  // namespace ddx
