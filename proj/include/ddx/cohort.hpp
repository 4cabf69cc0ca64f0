#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddx/ontology.hpp"
#include "ddx/predicate.hpp"
#include "ddx/rng.hpp"
#include "ddx/types.hpp"

namespace ddx {

struct PatientRecord {
  std::string id;
  DiseaseId label = 0;
  BitVector oracle_symptoms;   // length M
  BitVector explicit_denials;  // length M, disjoint from oracle_symptoms
  std::vector<double> history;  // length d
  std::map<std::string, double> findings;

  bool operator==(const PatientRecord&) const = default;
};

struct FindingDist {
  double mean = 0.0;
  double stddev = 0.0;  // 0 means constant

  bool operator==(const FindingDist&) const = default;
};

// Generative model of one disease.
struct DiseaseProfile {
  DiseaseId label = 0;
  std::string name;
  double prior = 0.0;
  std::vector<double> first_layer_probs;  // length F
  std::vector<double> child_cond_probs;   // length M - F, P(child | parent present)
  double denial_prob = 0.1;
  std::vector<double> history_mean;  // length d
  double history_noise = 1.0;
  std::map<std::string, FindingDist> finding_dists;
  double finding_presence = 1.0;  // chance a finding is recorded at all

  bool operator==(const DiseaseProfile&) const = default;
};

struct Cohort {
  std::size_t symptom_count = 0;      // M
  std::size_t first_layer_count = 0;  // F
  std::size_t history_dim = 0;        // d
  std::uint64_t seed = 0;
  std::vector<std::string> disease_names;  // index = DiseaseId
  std::vector<DiseaseProfile> profiles;    // may be empty for external cohorts
  std::vector<PatientRecord> records;

  std::size_t disease_count() const { return disease_names.size(); }
  // Same header and profiles, selected records.
  Cohort subset(std::span<const std::size_t> indices) const;
  const PatientRecord* find(std::string_view record_id) const;
};

struct ProbRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Bounds for random disease profiles. Each disease gets a few characteristic
// first-layer categories with high presence; inside each of those a few
// signature children are likely. Everything else is background noise.
struct CohortConfig {
  std::size_t diseases = 20;
  std::size_t size = 10000;
  std::size_t history_dim = 16;
  std::uint64_t seed = 1;

  ProbRange prior_weight{0.5, 1.5};
  std::size_t characteristic_categories = 3;
  // Diseases k and k + families share characteristic categories and differ
  // only in signature children. Zero draws categories per disease.
  std::size_t families = 5;
  ProbRange characteristic_prob{0.6, 0.95};
  ProbRange background_prob{0.02, 0.08};
  std::size_t signature_children = 2;
  ProbRange signature_child_prob{0.6, 0.9};
  ProbRange background_child_prob{0.05, 0.2};
  double denial_prob = 0.1;
  double history_scale = 1.0;
  double history_noise = 6.0;
  std::size_t findings = 4;
  double finding_presence = 0.8;
};

void validate(const CohortConfig& config, const Ontology& ontology);

std::vector<DiseaseProfile> random_profiles(const Ontology& ontology, const CohortConfig& config,
                                            Rng& rng);

// Draws one record for the profile; resamples symptoms until at least one
// first-layer symptom is present. Children are only drawn under present parents.
PatientRecord sample_record(const DiseaseProfile& profile, const Ontology& ontology,
                            std::string id, Rng& rng);

Cohort generate_cohort(const Ontology& ontology, const CohortConfig& config);
Cohort generate_cohort(const Ontology& ontology, std::vector<DiseaseProfile> profiles,
                       std::size_t size, std::uint64_t seed);

struct CohortSplit {
  Cohort train;
  Cohort validation;
  Cohort test;
};

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

// Label-stratified partition, deterministic per seed.
CohortSplit split(const Cohort& cohort, SplitFractions fractions = {}, std::uint64_t seed = 0);

// Patient agent answers. Absent and unmentioned both read as denied.
SymptomState answer_symptom_query(const PatientRecord& record, SymptomId symptom);
// Finding or flag atom; absent values yield the atom's missing answer.
bool answer_finding_query(const PatientRecord& record, const Atom& atom);

// Hierarchy and disjointness problems, one message per violation.
std::vector<std::string> check_record(const PatientRecord& record, const Ontology& ontology);

struct Evidence {
  std::vector<SymptomState> symptoms;  // length M, or empty for none
  std::optional<std::vector<double>> history;
};

struct Posterior {
  std::vector<double> probabilities;
  bool uniform_fallback = false;  // evidence had zero likelihood under every profile
};

// Exact posterior under the generative model, including the history
// likelihood when supplied and the at-least-one-category conditioning.
Posterior bayes_posterior(std::span<const DiseaseProfile> profiles, const Ontology& ontology,
                          const Evidence& evidence);

// JSON lines: header {M, F, D, d, seed, diseases} then one record per line.
std::string serialize_cohort(const Cohort& cohort);
std::string serialize_profiles(const std::vector<DiseaseProfile>& profiles);
std::vector<DiseaseProfile> parse_profiles(std::string_view text);

struct LoadedCohort {
  Cohort cohort;
  std::vector<std::string> warnings;
};

// Profiles live beside the cohort file as <stem>.profiles.json.
std::filesystem::path profiles_path_for(const std::filesystem::path& cohort_path);
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);
// Records violating hierarchy consistency are accepted with a warning when an
// ontology is given; shape errors always throw.
Cohort parse_cohort(std::string_view text, const Ontology* ontology = nullptr,
                    std::vector<std::string>* warnings = nullptr);
LoadedCohort load_cohort(const std::filesystem::path& path, const Ontology* ontology = nullptr);

}  // namespace ddx
