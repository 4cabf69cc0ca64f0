#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ddx/cohort.hpp"
#include "ddx/neural.hpp"
#include "ddx/rl_train.hpp"
#include "ddx/screen_env.hpp"

namespace ddx {

enum class DatasetVariant { policy_rollout, full_oracle, history_only, symptoms_only };

const char* to_string(DatasetVariant v);
DatasetVariant parse_dataset_variant(std::string_view text);

struct ScreeningDataset {
  DatasetVariant provenance = DatasetVariant::policy_rollout;
  std::size_t history_dim = 0;
  std::size_t symptom_count = 0;
  std::vector<std::vector<double>> rows;  // each d + 3M wide
  std::vector<DiseaseId> labels;

  std::size_t width() const { return history_dim + 3 * symptom_count; }
  std::size_t size() const { return rows.size(); }
};

// policy_rollout runs one episode per record with the given policy and keeps
// the final observation; the oracle variants encode the record directly.
// Disclosure randomness per record is derived from (seed, record id).
ScreeningDataset build_dataset(const InquiryPolicy* policy, std::span<const PatientRecord> records,
                               const Ontology& ontology, const EnvConfig& env,
                               DatasetVariant variant, std::uint64_t seed);

// Observation with every symptom resolved from the oracle vector.
std::vector<double> oracle_observation(const PatientRecord& record);

// What a Bayes oracle may condition on for a dataset row.
Evidence evidence_from_row(const ScreeningDataset& data, std::size_t row);

struct ScreenerConfig {
  std::vector<std::size_t> hidden{128};
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;  // epochs without validation Top-1 improvement
  std::uint64_t seed = 1;
};

struct ScreenerFit {
  Mlp classifier;
  double validation_top1 = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

// Cross-entropy training with early stopping on validation Top-1; returns the
// best-validation snapshot. Throws ContractViolation when fewer than two
// classes are present.
ScreenerFit train_screener(const ScreeningDataset& train, const ScreeningDataset& validation,
                           std::size_t n_classes, const ScreenerConfig& config);

struct Ranking {
  std::vector<double> probabilities;
  std::vector<DiseaseId> order;  // descending probability, lower index first on ties
};

Ranking rank(std::vector<double> probabilities);
Ranking predict_ranking(const Mlp& classifier, std::span<const double> observation);
std::vector<Ranking> predict_rankings(const Mlp& classifier, const ScreeningDataset& data);

double top_k_hit_rate(std::span<const Ranking> rankings, std::span<const DiseaseId> labels,
                      std::size_t k);

std::string serialize_dataset(const ScreeningDataset& data);
ScreeningDataset parse_dataset(std::string_view text);

}  // namespace ddx
