#include "ddx/screener.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {
namespace {

using ojson = nlohmann::ordered_json;

Eigen::MatrixXd gather(const ScreeningDataset& data, std::span<const std::size_t> idx) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.width()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& row = data.rows[idx[k]];
    x.col(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return x;
}

double top1(const Mlp& net, const ScreeningDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 1024;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    idx.resize(std::min(kChunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Eigen::MatrixXd logits = net.forward(gather(data, idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Eigen::Index best = 0;
      logits.col(static_cast<Eigen::Index>(k)).maxCoeff(&best);
      hits += static_cast<std::size_t>(best) == data.labels[idx[k]];
    }
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

const char* to_string(DatasetVariant v) {
  switch (v) {
    case DatasetVariant::policy_rollout:
      return "policy_rollout";
    case DatasetVariant::full_oracle:
      return "full_oracle";
    case DatasetVariant::history_only:
      return "history_only";
    case DatasetVariant::symptoms_only:
      return "symptoms_only";
  }
  return "?";
}

DatasetVariant parse_dataset_variant(std::string_view t) {
  if (t == "policy_rollout") return DatasetVariant::policy_rollout;
  if (t == "full_oracle") return DatasetVariant::full_oracle;
  if (t == "history_only") return DatasetVariant::history_only;
  if (t == "symptoms_only") return DatasetVariant::symptoms_only;
  throw ConfigError("unknown dataset variant '" + std::string(t) + "'");
}

std::vector<double> oracle_observation(const PatientRecord& r) {
  std::vector<double> obs(r.history.begin(), r.history.end());
  for (auto bit : r.oracle_symptoms) {
    obs.push_back(bit ? 0.0 : 1.0);  // denied
    obs.push_back(bit ? 1.0 : 0.0);  // confirmed
    obs.push_back(0.0);              // unknown
  }
  return obs;
}

ScreeningDataset build_dataset(const InquiryPolicy* policy, std::span<const PatientRecord> records,
                               const Ontology& ontology, const EnvConfig& env,
                               DatasetVariant variant, std::uint64_t seed) {
  ScreeningDataset data;
  data.provenance = variant;
  data.symptom_count = ontology.size();
  data.history_dim = records.empty() ? 0 : records.front().history.size();
  const std::size_t d = data.history_dim;
  const std::size_t M = ontology.size();
  for (const auto& r : records) {
    if (r.history.size() != d || r.oracle_symptoms.size() != M) {
      throw ShapeError("record " + r.id + " does not match the dataset shape");
    }
    std::vector<double> obs;
    switch (variant) {
      case DatasetVariant::policy_rollout: {
        if (!policy) throw ContractViolation("policy_rollout datasets need a policy");
        Rng rng(derive_seed(seed, r.id));
        obs = observe(run_episode(*policy, r, ontology, env, rng).final_state);
        break;
      }
      case DatasetVariant::full_oracle:
        obs = oracle_observation(r);
        break;
      case DatasetVariant::history_only:
        obs.assign(r.history.begin(), r.history.end());
        for (std::size_t j = 0; j < M; ++j) {
          obs.push_back(0.0);
          obs.push_back(0.0);
          obs.push_back(1.0);
        }
        break;
      case DatasetVariant::symptoms_only:
        obs = oracle_observation(r);
        std::fill(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
        break;
    }
    data.rows.push_back(std::move(obs));
    data.labels.push_back(r.label);
  }
  return data;
}

Evidence evidence_from_row(const ScreeningDataset& data, std::size_t row) {
  const auto& x = data.rows.at(row);
  const std::size_t d = data.history_dim;
  Evidence e;
  e.symptoms.resize(data.symptom_count);
  for (std::size_t j = 0; j < data.symptom_count; ++j) {
    const double* slot = &x[d + 3 * j];
    e.symptoms[j] = slot[0] > 0.5   ? SymptomState::denied
                    : slot[1] > 0.5 ? SymptomState::confirmed
                                    : SymptomState::unknown;
  }
  if (data.provenance != DatasetVariant::symptoms_only) e.history.emplace(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
  return e;
}

ScreenerFit train_screener(const ScreeningDataset& train, const ScreeningDataset& validation,
                           std::size_t n_classes, const ScreenerConfig& c) {
  if (train.size() == 0) throw ContractViolation("screener training set is empty");
  std::set<DiseaseId> classes(train.labels.begin(), train.labels.end());
  if (classes.size() < 2) throw ContractViolation("screener training needs at least two classes");
  if (*classes.rbegin() >= n_classes) throw ContractViolation("label exceeds class count");
  if (validation.size() > 0 && validation.width() != train.width()) {
    throw ShapeError("validation width differs from training width");
  }

  Rng rng(derive_seed(c.seed, "screener"));
  std::vector<std::size_t> sizes{train.width()};
  sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
  sizes.push_back(n_classes);
  std::vector<Activation> acts(c.hidden.size(), Activation::relu);
  acts.push_back(Activation::identity);
  ScreenerFit fit;
  Mlp net(sizes, acts, rng);
  Adam adam(AdamConfig{c.learning_rate});

  const auto& select = validation.size() > 0 ? validation : train;
  fit.classifier = net;
  fit.validation_top1 = -1.0;
  std::size_t stale = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  ForwardCache cache;
  for (std::size_t epoch = 1; epoch <= c.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t end = std::min(order.size(), start + c.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Eigen::MatrixXd logits = net.forward(gather(train, idx), cache);
      Eigen::MatrixXd grad(logits.rows(), logits.cols());
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      for (Eigen::Index k = 0; k < logits.cols(); ++k) {
        std::span<const double> z(logits.col(k).data(), n_classes);
        auto p = softmax(z);
        p[train.labels[idx[static_cast<std::size_t>(k)]]] -= 1.0;
        for (std::size_t j = 0; j < n_classes; ++j) grad(static_cast<Eigen::Index>(j), k) = p[j] * inv_b;
      }
      auto grads = net.zero_gradients();
      net.backward(cache, grad, grads);
      adam.step(net.parameters(), grads.blocks());
    }
    fit.epochs_run = epoch;
    const double score = top1(net, select);
    if (score > fit.validation_top1) {
      fit.validation_top1 = score;
      fit.classifier = net;
      fit.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= c.patience) {
      break;
    }
  }
  return fit;
}

Ranking rank(std::vector<double> probabilities) {
  Ranking r;
  r.order.resize(probabilities.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](DiseaseId a, DiseaseId b) { return probabilities[a] > probabilities[b]; });
  r.probabilities = std::move(probabilities);
  return r;
}

Ranking predict_ranking(const Mlp& classifier, std::span<const double> observation) {
  if (observation.size() != classifier.input_dim()) {
    throw ShapeError("observation width " + std::to_string(observation.size()) +
                     " does not match classifier input " + std::to_string(classifier.input_dim()));
  }
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  Eigen::VectorXd logits = classifier.forward(x).col(0);
  return rank(softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size()))));
}

std::vector<Ranking> predict_rankings(const Mlp& classifier, const ScreeningDataset& data) {
  std::vector<Ranking> out;
  out.reserve(data.size());
  for (const auto& row : data.rows) out.push_back(predict_ranking(classifier, row));
  return out;
}

double top_k_hit_rate(std::span<const Ranking> rankings, std::span<const DiseaseId> labels,
                      std::size_t k) {
  if (rankings.empty()) throw ContractViolation("top-k hit rate of an empty set");
  if (rankings.size() != labels.size()) throw ContractViolation("rankings and labels differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const auto& order = rankings[i].order;
    if (k < 1 || k > order.size()) {
      throw ContractViolation("k must lie in [1, " + std::to_string(order.size()) + "]");
    }
    hits += std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), labels[i]) !=
            order.begin() + static_cast<std::ptrdiff_t>(k);
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

std::string serialize_dataset(const ScreeningDataset& data) {
  std::string out = ojson{{"provenance", to_string(data.provenance)},
                          {"d", data.history_dim},
                          {"M", data.symptom_count},
                          {"rows", data.size()}}
                        .dump() +
                    "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += ojson{{"label", data.labels[i]}, {"x", data.rows[i]}}.dump() + "\n";
  }
  return out;
}

ScreeningDataset parse_dataset(std::string_view text) {
  ScreeningDataset data;
  bool header = false;
  for (auto line : split_lines(text)) {
    line = trim(line);
    if (line.empty()) continue;
    try {
      auto j = ojson::parse(line);
      if (!header) {
        data.provenance = parse_dataset_variant(j.at("provenance").get<std::string>());
        data.history_dim = j.at("d").get<std::size_t>();
        data.symptom_count = j.at("M").get<std::size_t>();
        header = true;
        continue;
      }
      auto x = j.at("x").get<std::vector<double>>();
      if (x.size() != data.width()) throw FormatError("dataset row has the wrong width");
      data.rows.push_back(std::move(x));
      data.labels.push_back(j.at("label").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed dataset line: ") + e.what());
    }
  }
  if (!header) throw FormatError("dataset has no header line");
  return data;
}

}  // namespace ddx
