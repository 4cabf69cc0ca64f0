#include "ddx/neural.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {
namespace {

using ojson = nlohmann::ordered_json;

Eigen::MatrixXd activate(Activation a, Eigen::MatrixXd z) {
  switch (a) {
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::tanh:
      return z.array().tanh().matrix();
    case Activation::identity:
      return z;
  }
  return z;
}

// Multiplies the upstream gradient by the activation derivative, expressed
// through the activated output.
void apply_derivative(Activation a, const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::relu:
      grad.array() *= (out.array() > 0.0).cast<double>();
      break;
    case Activation::tanh:
      grad.array() *= 1.0 - out.array().square();
      break;
    case Activation::identity:
      break;
  }
}

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  if (text == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + std::string(text) + "'");
}

void MlpGradients::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

std::vector<std::span<double>> MlpGradients::blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    out.push_back(span_of(weight[i]));
    out.push_back(span_of(bias[i]));
  }
  return out;
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
         Rng& rng, double output_gain) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
    throw ShapeError("an MLP needs n+1 sizes for n activations");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] == 0 || sizes[l + 1] == 0) throw ShapeError("layer sizes must be positive");
    DenseLayer layer;
    layer.activation = activations[l];
    const double gain = activations[l] == Activation::relu ? std::sqrt(2.0) : 1.0;
    double scale = gain / std::sqrt(static_cast<double>(sizes[l]));
    if (l + 2 == sizes.size()) scale *= output_gain;
    layer.weight.resize(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * rng.normal();
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1]));
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) throw ShapeError("bias size mismatch");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " input does not chain with previous output");
    }
  }
}

std::size_t Mlp::input_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim()};
  for (const auto& l : layers_) sizes.push_back(static_cast<std::size_t>(l.weight.rows()));
  return sizes;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw ShapeError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                     std::to_string(input_dim()));
  }
  if (!x.allFinite()) throw NumericError("non-finite network input");
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weight * h;
    z.colwise() += layer.bias;
    h = activate(layer.activation, std::move(z));
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw ShapeError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                     std::to_string(input_dim()));
  }
  if (!x.allFinite()) throw NumericError("non-finite network input");
  cache.inputs.clear();
  cache.outputs.clear();
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = layer.weight * h;
    z.colwise() += layer.bias;
    h = activate(layer.activation, std::move(z));
    cache.outputs.push_back(h);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                              MlpGradients& grads) const {
  if (cache.outputs.size() != layers_.size()) throw ShapeError("forward cache does not match network");
  if (grad_output.rows() != static_cast<Eigen::Index>(output_dim()) ||
      grad_output.cols() != cache.outputs.back().cols()) {
    throw ShapeError("output gradient shape mismatch");
  }
  if (grads.weight.size() != layers_.size()) grads = zero_gradients();
  Eigen::MatrixXd g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    apply_derivative(layer.activation, cache.outputs[l], g);
    grads.weight[l].noalias() += g * cache.inputs[l].transpose();
    grads.bias[l] += g.rowwise().sum();
    g = layer.weight.transpose() * g;
  }
  return g;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (const auto& l : layers_) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.push_back(span_of(l.weight));
    out.push_back(span_of(l.bias));
  }
  return out;
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ActorCritic ActorCritic::create(std::size_t observation_dim, std::size_t action_count,
                                const ActorCriticShape& shape, Rng& rng) {
  if (shape.trunk_hidden.empty()) throw ShapeError("trunk needs at least one hidden layer");
  ActorCritic net;
  std::vector<std::size_t> trunk_sizes{observation_dim};
  trunk_sizes.insert(trunk_sizes.end(), shape.trunk_hidden.begin(), shape.trunk_hidden.end());
  net.trunk = Mlp(trunk_sizes, std::vector<Activation>(shape.trunk_hidden.size(), Activation::relu), rng);
  const std::size_t rep = shape.trunk_hidden.back();
  net.policy_head = Mlp({rep, shape.head_hidden, action_count},
                        {Activation::relu, Activation::identity}, rng, 0.01);
  net.value_head = Mlp({rep, shape.head_hidden, 1}, {Activation::relu, Activation::identity}, rng);
  return net;
}

std::vector<std::span<double>> ActorCritic::parameters() {
  auto out = trunk.parameters();
  for (auto s : policy_head.parameters()) out.push_back(s);
  for (auto s : value_head.parameters()) out.push_back(s);
  return out;
}

std::vector<std::span<double>> ActorCriticGradients::blocks() {
  auto out = trunk.blocks();
  for (auto s : policy_head.blocks()) out.push_back(s);
  for (auto s : value_head.blocks()) out.push_back(s);
  return out;
}

ActorCriticForward forward(const ActorCritic& net, const Eigen::MatrixXd& observations) {
  ActorCriticForward f;
  Eigen::MatrixXd rep = net.trunk.forward(observations, f.trunk);
  f.logits = net.policy_head.forward(rep, f.policy_head);
  f.values = net.value_head.forward(rep, f.value_head).row(0);
  return f;
}

ActorCriticGradients backward(const ActorCritic& net, const ActorCriticForward& f,
                              const Eigen::MatrixXd& grad_logits,
                              const Eigen::RowVectorXd& grad_values) {
  ActorCriticGradients g{net.trunk.zero_gradients(), net.policy_head.zero_gradients(),
                         net.value_head.zero_gradients()};
  Eigen::MatrixXd grad_rep = net.policy_head.backward(f.policy_head, grad_logits, g.policy_head);
  Eigen::MatrixXd gv = grad_values;
  grad_rep += net.value_head.backward(f.value_head, gv, g.value_head);
  net.trunk.backward(f.trunk, grad_rep, g.trunk);
  return g;
}

std::vector<double> masked_softmax(std::span<const double> logits, const BitVector& mask) {
  if (mask.size() != logits.size()) throw ShapeError("mask length differs from logits");
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) {
      best = std::max(best, logits[i]);
      any = true;
    }
  }
  if (!any) throw ContractViolation("masked_softmax needs at least one unmasked entry");
  std::vector<double> p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) {
      p[i] = std::exp(logits[i] - best);
      total += p[i];
    }
  }
  for (auto& x : p) x /= total;
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  return masked_softmax(logits, BitVector(logits.size(), 1));
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw ContractViolation("label out of range");
  return -std::log(std::max(probs[label], 1e-12));
}

std::vector<double> cross_entropy_gradient(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw ContractViolation("label out of range");
  std::vector<double> g(probs.size(), 0.0);
  g[label] = -1.0 / std::max(probs[label], 1e-12);
  return g;
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient block counts differ");
  for (std::size_t b = 0; b < grads.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw ShapeError("gradient block size mismatch");
    for (double g : grads[b]) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient; aborting update");
    }
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("optimizer state does not match parameter layout");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = m_[b];
    auto& v = v_[b];
    if (m.size() != params[b].size()) throw ShapeError("optimizer state does not match parameter layout");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grads[b][i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      params[b][i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

double global_norm(std::span<const std::span<double>> blocks) {
  double sq = 0.0;
  for (auto b : blocks) {
    for (double x : b) sq += x * x;
  }
  return std::sqrt(sq);
}

void scale_blocks(std::span<const std::span<double>> blocks, double factor) {
  for (auto b : blocks) {
    for (double& x : b) x *= factor;
  }
}

// ---------------------------------------------------------------------------
// Weights files

namespace {

ojson mlp_body(const Mlp& net) {
  ojson activations = ojson::array();
  ojson params = ojson::array();
  for (const auto& l : net.layers()) {
    activations.push_back(to_string(l.activation));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    params.push_back(ojson{{"weight", w}, {"bias", b}});
  }
  return ojson{{"layer_sizes", net.layer_sizes()}, {"activations", activations}, {"parameters", params}};
}

Mlp mlp_from(const ojson& j) {
  auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  const auto& acts = j.at("activations");
  const auto& params = j.at("parameters");
  if (sizes.size() < 2 || acts.size() != sizes.size() - 1 || params.size() != acts.size()) {
    throw FormatError("weights document has inconsistent layer counts");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    layer.activation = parse_activation(acts.at(l).get<std::string>());
    auto w = params.at(l).at("weight").get<std::vector<double>>();
    auto b = params.at(l).at("bias").get<std::vector<double>>();
    const auto rows = static_cast<Eigen::Index>(sizes[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes[l]);
    if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != sizes[l + 1]) {
      throw FormatError("layer " + std::to_string(l) + " parameter count does not match its size");
    }
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    }
    layer.bias = Eigen::Map<Eigen::VectorXd>(b.data(), rows);
    layers.push_back(std::move(layer));
  }
  Mlp net(std::move(layers));
  if (!net.all_finite()) throw FormatError("weights contain non-finite values");
  return net;
}

ojson parse_document(std::string_view text, std::string_view expected_kind) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt weights file: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version")) {
    throw FormatError("corrupt weights file: missing format_version");
  }
  const auto& v = j.at("format_version");
  if (!v.is_number_integer() || v.get<int>() != kWeightsFormatVersion) {
    throw VersionError("weights file format version " + v.dump() +
                       " is not supported by this reader (version " +
                       std::to_string(kWeightsFormatVersion) + ")");
  }
  const auto kind = j.value("kind", std::string("mlp"));
  if (kind != expected_kind) {
    throw FormatError("weights file holds a '" + kind + "', expected '" + std::string(expected_kind) + "'");
  }
  return j;
}

}  // namespace

std::string serialize_weights(const Mlp& net) {
  ojson j{{"format_version", kWeightsFormatVersion}, {"kind", "mlp"}};
  const ojson body = mlp_body(net);
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j.dump() + "\n";
}

std::string serialize_weights(const ActorCritic& net) {
  ojson j{{"format_version", kWeightsFormatVersion},
          {"kind", "actor_critic"},
          {"trunk", mlp_body(net.trunk)},
          {"policy_head", mlp_body(net.policy_head)},
          {"value_head", mlp_body(net.value_head)}};
  return j.dump() + "\n";
}

Mlp parse_mlp_weights(std::string_view text) {
  auto j = parse_document(text, "mlp");
  try {
    return mlp_from(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt weights file: ") + e.what());
  }
}

ActorCritic parse_actor_critic_weights(std::string_view text) {
  auto j = parse_document(text, "actor_critic");
  try {
    ActorCritic net{mlp_from(j.at("trunk")), mlp_from(j.at("policy_head")), mlp_from(j.at("value_head"))};
    if (net.policy_head.input_dim() != net.trunk.output_dim() ||
        net.value_head.input_dim() != net.trunk.output_dim() || net.value_head.output_dim() != 1) {
      throw FormatError("actor-critic heads do not match the trunk");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt weights file: ") + e.what());
  }
}

void save_weights(const Mlp& net, const std::filesystem::path& path) {
  write_file(path, serialize_weights(net));
}

void save_weights(const ActorCritic& net, const std::filesystem::path& path) {
  write_file(path, serialize_weights(net));
}

Mlp load_mlp(const std::filesystem::path& path) { return parse_mlp_weights(read_file(path)); }

ActorCritic load_actor_critic(const std::filesystem::path& path) {
  return parse_actor_critic_weights(read_file(path));
}

}  // namespace ddx
