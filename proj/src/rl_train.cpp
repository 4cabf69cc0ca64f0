#include "ddx/rl_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ddx/error.hpp"

namespace ddx {
namespace {

Eigen::MatrixXd as_column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

SymptomId random_policy(const BitVector& mask, Rng& rng) {
  const std::size_t n = popcount(mask);
  if (n == 0) throw ContractViolation("random policy called with an empty mask");
  std::size_t k = rng.index(n);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j] && k-- == 0) return SymptomId{j};
  }
  return SymptomId{mask.size()};  // unreachable
}

SymptomId greedy_action(std::span<const double> logits, const BitVector& mask) {
  std::size_t best = mask.size();
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j] && (best == mask.size() || logits[j] > logits[best])) best = j;
  }
  if (best == mask.size()) throw ContractViolation("greedy action requested with an empty mask");
  return SymptomId{best};
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last = probs.size();
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    cum += probs[j];
    last = j;
    if (u < cum) return j;
  }
  if (last == probs.size()) throw ContractViolation("cannot sample from an all-zero distribution");
  return last;
}

SymptomId ActorCriticPolicy::choose(const ScreeningState& state, const BitVector& mask,
                                    Rng& rng) const {
  Eigen::MatrixXd rep = net_->trunk.forward(as_column(observe(state)));
  Eigen::VectorXd logits = net_->policy_head.forward(rep).col(0);
  std::span<const double> z(logits.data(), static_cast<std::size_t>(logits.size()));
  if (mode_ == Mode::greedy) return greedy_action(z, mask);
  return SymptomId{sample_index(masked_softmax(z, mask), rng)};
}

EpisodeResult run_episode(const InquiryPolicy& policy, const PatientRecord& record,
                          const Ontology& ontology, const EnvConfig& env, Rng& rng) {
  EpisodeResult out;
  out.final_state = reset(record, ontology, rng);
  if (!any_valid_action(out.final_state, ontology)) return out;
  for (;;) {
    const auto mask = valid_action_mask(out.final_state, ontology);
    const auto action = policy.choose(out.final_state, mask, rng);
    const auto r = step(out.final_state, action, record, ontology, env);
    out.actions.push_back(action);
    out.episode_return += r.reward;
    if (r.done) break;
  }
  return out;
}

void validate(const PpoConfig& c) {
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(c.clip_eps > 0.0)) throw ConfigError("clip_eps must be positive");
  if (c.epochs_per_update == 0 || c.minibatch_size == 0 || c.n_envs == 0 || c.rollout_steps == 0) {
    throw ConfigError("epochs, minibatch size, env count and rollout steps must be positive");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

void RolloutBuffer::append(const RolloutBuffer& o) {
  if (observation_dim == 0) observation_dim = o.observation_dim;
  if (o.size() > 0 && o.observation_dim != observation_dim) throw ShapeError("observation width mismatch");
  observations.insert(observations.end(), o.observations.begin(), o.observations.end());
  masks.insert(masks.end(), o.masks.begin(), o.masks.end());
  actions.insert(actions.end(), o.actions.begin(), o.actions.end());
  log_probs.insert(log_probs.end(), o.log_probs.begin(), o.log_probs.end());
  rewards.insert(rewards.end(), o.rewards.begin(), o.rewards.end());
  values.insert(values.end(), o.values.begin(), o.values.end());
  dones.insert(dones.end(), o.dones.begin(), o.dones.end());
  episode_returns.insert(episode_returns.end(), o.episode_returns.begin(), o.episode_returns.end());
  advantages.clear();
  returns.clear();
}

RolloutBuffer collect_rollouts(const ActorCritic& policy, std::span<const PatientRecord> records,
                               const Ontology& ontology, const EnvConfig& env, std::size_t n_steps,
                               std::size_t n_envs, Rng& rng) {
  if (records.empty()) throw ContractViolation("no records to roll out");
  if (n_envs == 0) throw ContractViolation("need at least one environment");
  const std::size_t obs_dim = records.front().history.size() + 3 * ontology.size();
  if (policy.observation_dim() != obs_dim || policy.action_count() != ontology.size()) {
    throw ShapeError("policy dimensions do not match the observation/action spaces");
  }
  const std::size_t share = (n_steps + n_envs - 1) / n_envs;

  struct Lane {
    Rng rng;
    RolloutBuffer buf;
    const PatientRecord* record = nullptr;
    ScreeningState state;
    double ret = 0.0;
    bool finished = false;
  };
  std::vector<Lane> lanes;
  for (std::size_t e = 0; e < n_envs; ++e) {
    Lane lane{Rng(rng.next()), {}, nullptr, {}, 0.0, false};
    lane.buf.observation_dim = obs_dim;
    lanes.push_back(std::move(lane));
  }

  auto start_episode = [&](Lane& lane) {
    // Records whose disclosure leaves nothing to ask are skipped.
    for (int tries = 0; tries < 1000; ++tries) {
      lane.record = &records[lane.rng.index(records.size())];
      lane.state = reset(*lane.record, ontology, lane.rng);
      lane.ret = 0.0;
      if (any_valid_action(lane.state, ontology)) return;
    }
    throw ContractViolation("no record offers a valid first question");
  };
  for (auto& lane : lanes) start_episode(lane);

  std::vector<std::size_t> active;
  std::vector<BitVector> masks(n_envs);
  Eigen::MatrixXd obs(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(n_envs));
  for (;;) {
    active.clear();
    for (std::size_t e = 0; e < n_envs; ++e) {
      if (!lanes[e].finished) active.push_back(e);
    }
    if (active.empty()) break;
    obs.resize(static_cast<Eigen::Index>(obs_dim), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto o = observe(lanes[active[i]].state);
      obs.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
    }
    Eigen::MatrixXd rep = policy.trunk.forward(obs);
    Eigen::MatrixXd logits = policy.policy_head.forward(rep);
    Eigen::MatrixXd values = policy.value_head.forward(rep);

    for (std::size_t i = 0; i < active.size(); ++i) {
      auto& lane = lanes[active[i]];
      const auto col = static_cast<Eigen::Index>(i);
      const auto mask = valid_action_mask(lane.state, ontology);
      std::span<const double> z(logits.col(col).data(), ontology.size());
      const auto probs = masked_softmax(z, mask);
      const std::size_t a = sample_index(probs, lane.rng);
      if (!mask[a]) throw ContractViolation("sampled a masked action");

      auto& buf = lane.buf;
      buf.observations.insert(buf.observations.end(), obs.col(col).data(), obs.col(col).data() + obs_dim);
      buf.masks.push_back(mask);
      buf.actions.push_back(a);
      buf.log_probs.push_back(std::log(probs[a]));
      buf.values.push_back(values(0, col));

      const auto r = step(lane.state, SymptomId{a}, *lane.record, ontology, env);
      buf.rewards.push_back(r.reward);
      buf.dones.push_back(r.done ? 1 : 0);
      lane.ret += r.reward;
      if (r.done) {
        buf.episode_returns.push_back(lane.ret);
        if (buf.size() >= share) {
          lane.finished = true;
        } else {
          start_episode(lane);
        }
      }
    }
  }

  RolloutBuffer out;
  out.observation_dim = obs_dim;
  for (const auto& lane : lanes) out.append(lane.buf);
  return out;
}

void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
  const std::size_t n = b.size();
  if (b.rewards.size() != n || b.values.size() != n || b.dones.size() != n) {
    throw ShapeError("rollout buffer columns have different lengths");
  }
  b.advantages.assign(n, 0.0);
  b.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = b.dones[t] ? 0.0 : 1.0;
    const double next_value = (t + 1 < n) ? b.values[t + 1] : 0.0;
    const double delta = b.rewards[t] + gamma * next_value * live - b.values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    b.advantages[t] = next_adv;
    b.returns[t] = next_adv + b.values[t];
  }
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

PpoLoss ppo_loss(const Eigen::MatrixXd& logits, const Eigen::RowVectorXd& values,
                 std::span<const BitVector> masks, std::span<const std::size_t> actions,
                 std::span<const double> old_log_probs, std::span<const double> advantages,
                 std::span<const double> returns, const PpoConfig& c) {
  const auto B = static_cast<std::size_t>(logits.cols());
  if (values.size() != logits.cols() || masks.size() != B || actions.size() != B ||
      old_log_probs.size() != B || advantages.size() != B || returns.size() != B) {
    throw ShapeError("minibatch columns have different lengths");
  }
  const auto A = static_cast<std::size_t>(logits.rows());
  const double inv_b = 1.0 / static_cast<double>(B);
  PpoLoss out;
  out.grad_logits = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  out.grad_values = Eigen::RowVectorXd::Zero(values.size());

  std::vector<double> logp(A);
  for (std::size_t i = 0; i < B; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const auto& mask = masks[i];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < A; ++j) {
      if (mask[j]) best = std::max(best, logits(static_cast<Eigen::Index>(j), col));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < A; ++j) {
      if (mask[j]) total += std::exp(logits(static_cast<Eigen::Index>(j), col) - best);
    }
    const double lse = best + std::log(total);
    double entropy = 0.0;
    for (std::size_t j = 0; j < A; ++j) {
      if (!mask[j]) continue;
      logp[j] = logits(static_cast<Eigen::Index>(j), col) - lse;
      entropy -= std::exp(logp[j]) * logp[j];
    }
    const std::size_t a = actions[i];
    if (!mask[a]) throw ContractViolation("minibatch action outside its mask");
    const double ratio = std::exp(logp[a] - old_log_probs[i]);
    const double adv = advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - c.clip_eps, 1.0 + c.clip_eps);
    const double unclipped = ratio * adv;
    const double clipped = clipped_ratio * adv;
    const double surrogate = std::min(unclipped, clipped);
    const double d_surr_d_ratio = unclipped <= clipped ? adv : 0.0;
    const double d_logp_a = -ratio * d_surr_d_ratio * inv_b;

    for (std::size_t j = 0; j < A; ++j) {
      if (!mask[j]) continue;
      const double p = std::exp(logp[j]);
      double g = d_logp_a * ((j == a ? 1.0 : 0.0) - p);
      g += c.entropy_coef * inv_b * p * (logp[j] + entropy);
      out.grad_logits(static_cast<Eigen::Index>(j), col) = g;
    }
    const double err = values(col) - returns[i];
    out.grad_values(col) = 2.0 * c.value_coef * err * inv_b;

    out.stats.policy_loss -= surrogate * inv_b;
    out.stats.value_loss += err * err * inv_b;
    out.stats.entropy += entropy * inv_b;
    out.stats.clip_fraction += (std::abs(ratio - 1.0) > c.clip_eps ? 1.0 : 0.0) * inv_b;
    out.stats.approx_kl += (old_log_probs[i] - logp[a]) * inv_b;
  }
  out.total = out.stats.policy_loss + c.value_coef * out.stats.value_loss -
              c.entropy_coef * out.stats.entropy;
  if (!std::isfinite(out.total)) throw NumericError("non-finite PPO loss");
  return out;
}

PpoStats ppo_update(ActorCritic& policy, Adam& optimizer, const RolloutBuffer& buffer,
                    const PpoConfig& c, Rng& rng) {
  if (!buffer.has_advantages()) throw ContractViolation("compute_gae must run before ppo_update");
  const std::size_t n = buffer.size();
  const std::size_t dim = buffer.observation_dim;
  std::vector<double> adv = buffer.advantages;
  normalize_advantages(adv);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  PpoStats mean{};
  std::size_t batches = 0;

  std::vector<BitVector> masks;
  std::vector<std::size_t> actions;
  std::vector<double> old_lp, mb_adv, mb_ret;
  for (std::size_t epoch = 0; epoch < c.epochs_per_update; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += c.minibatch_size) {
      const std::size_t end = std::min(n, start + c.minibatch_size);
      const std::size_t B = end - start;
      Eigen::MatrixXd obs(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(B));
      masks.clear();
      actions.clear();
      old_lp.clear();
      mb_adv.clear();
      mb_ret.clear();
      for (std::size_t k = 0; k < B; ++k) {
        const std::size_t t = order[start + k];
        auto o = buffer.observation(t);
        obs.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(dim));
        masks.push_back(buffer.masks[t]);
        actions.push_back(buffer.actions[t]);
        old_lp.push_back(buffer.log_probs[t]);
        mb_adv.push_back(adv[t]);
        mb_ret.push_back(buffer.returns[t]);
      }
      auto fwd = forward(policy, obs);
      auto loss = ppo_loss(fwd.logits, fwd.values, masks, actions, old_lp, mb_adv, mb_ret, c);
      auto grads = backward(policy, fwd, loss.grad_logits, loss.grad_values);
      auto blocks = grads.blocks();
      const double norm = global_norm(blocks);
      if (c.max_grad_norm > 0.0 && norm > c.max_grad_norm) scale_blocks(blocks, c.max_grad_norm / norm);
      optimizer.step(policy.parameters(), blocks);

      mean.policy_loss += loss.stats.policy_loss;
      mean.value_loss += loss.stats.value_loss;
      mean.entropy += loss.stats.entropy;
      mean.clip_fraction += loss.stats.clip_fraction;
      mean.approx_kl += loss.stats.approx_kl;
      ++batches;
    }
  }
  if (batches > 0) {
    const double inv = 1.0 / static_cast<double>(batches);
    mean.policy_loss *= inv;
    mean.value_loss *= inv;
    mean.entropy *= inv;
    mean.clip_fraction *= inv;
    mean.approx_kl *= inv;
  }
  return mean;
}

std::string to_json_line(const CurvePoint& p) {
  nlohmann::ordered_json j{{"update", p.update},           {"steps", p.steps},
                           {"mean_return", p.mean_return}, {"policy_loss", p.policy_loss},
                           {"value_loss", p.value_loss},   {"entropy", p.entropy}};
  return j.dump();
}

TrainResult train_policy(std::span<const PatientRecord> train, const Ontology& ontology,
                         const EnvConfig& env, const PpoConfig& c, const ActorCriticShape& shape,
                         const CurveCallback& on_curve, const RolloutCallback& on_rollout) {
  validate(c);
  if (train.empty()) throw ContractViolation("training split is empty");
  if (env.budget == 0) throw ConfigError("question budget must be at least 1");
  Rng rng(derive_seed(c.seed, "ppo"));
  const std::size_t obs_dim = train.front().history.size() + 3 * ontology.size();
  TrainResult result;
  result.policy = ActorCritic::create(obs_dim, ontology.size(), shape, rng);
  Adam adam(AdamConfig{c.learning_rate});

  std::size_t update = 0;
  while (result.steps < c.total_steps) {
    const std::size_t want = std::min(c.rollout_steps, c.total_steps - result.steps);
    auto buffer = collect_rollouts(result.policy, train, ontology, env, want, c.n_envs, rng);
    for (std::size_t t = 0; t < buffer.size(); ++t) {
      if (!buffer.masks[t][buffer.actions[t]]) ++result.mask_violations;
    }
    if (on_rollout) on_rollout(buffer);
    compute_gae(buffer, c.gamma, c.gae_lambda);
    const auto stats = ppo_update(result.policy, adam, buffer, c, rng);
    result.steps += buffer.size();

    CurvePoint point;
    point.update = ++update;
    point.steps = result.steps;
    if (!buffer.episode_returns.empty()) {
      point.mean_return = std::accumulate(buffer.episode_returns.begin(), buffer.episode_returns.end(), 0.0) /
                          static_cast<double>(buffer.episode_returns.size());
    }
    point.policy_loss = stats.policy_loss;
    point.value_loss = stats.value_loss;
    point.entropy = stats.entropy;
    result.curve.push_back(point);
    if (on_curve) on_curve(point);
  }
  return result;
}

}  // namespace ddx
