#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ddx/cohort.hpp"
#include "ddx/metrics.hpp"
#include "ddx/neural.hpp"
#include "ddx/ontology.hpp"
#include "ddx/procedure.hpp"
#include "ddx/rl_train.hpp"
#include "ddx/rng.hpp"
#include "ddx/screen_env.hpp"

namespace ddx::testing {

// ---------------------------------------------------------------------------
// Finite differences

inline constexpr double kFdStep = 1e-5;

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
// turning rounding noise into large ratios.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradientCheck {
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  void merge(const GradientCheck& other);
};

// Central differences of loss() with respect to every entry of params,
// compared with analytic[i].
GradientCheck check_gradient(std::span<double> params, std::span<const double> analytic,
                             const std::function<double()>& loss, double h = kFdStep);

// L = sum(probe .* forward(x)); checks parameter and input gradients at x.
GradientCheck check_mlp_gradients(Mlp& net, Eigen::MatrixXd& x, const Eigen::MatrixXd& probe);

// True when every ReLU pre-activation of the pass is farther than margin from
// the kink, so central differences do not straddle it.
bool clear_of_kinks(const Mlp& net, const Eigen::MatrixXd& x, double margin);

// ---------------------------------------------------------------------------
// Advantage estimation

// A_t = sum_k (gamma lambda)^k delta_{t+k}, summed until the episode ends.
std::vector<double> explicit_gae(const std::vector<double>& rewards,
                                 const std::vector<double>& values,
                                 const std::vector<std::uint8_t>& dones, double gamma,
                                 double lambda);

// Discounted return to the end of each step's episode.
std::vector<double> monte_carlo_returns(const std::vector<double>& rewards,
                                        const std::vector<std::uint8_t>& dones, double gamma);

// Random complete episodes of lengths 1..max_len.
RolloutBuffer random_rollout(Rng& rng, std::size_t episodes, std::size_t max_len);

// ---------------------------------------------------------------------------
// Procedures

struct ProcedureVocabulary {
  std::vector<std::string> symptoms;
  std::vector<std::string> findings;
  std::vector<std::string> flags;
};

ProcedureVocabulary vocabulary_for(const Ontology& ontology, std::size_t findings,
                                   std::size_t flags);

Predicate random_predicate(Rng& rng, const ProcedureVocabulary& vocab, int depth);

// A DAG on nodes n0..n{count-1} in which every node is reachable from the
// start: node i hangs off an earlier node, then spare terminal edges are
// redirected forward at random.
ProcedureGraph random_procedure(Rng& rng, const ProcedureVocabulary& vocab, std::size_t count);

// Straight line of `length` nodes whose yes edges continue the chain.
ProcedureGraph chain_procedure(std::size_t length, const std::string& symptom);

PatientRecord random_record(Rng& rng, const Ontology& ontology, const ProcedureVocabulary& vocab);

enum class Mutation { cycle, dangling_target, duplicate_start };
const char* to_string(Mutation m);

struct MutatedSource {
  Mutation mutation = Mutation::cycle;
  std::string text;
  // Node ids the diagnostic must mention.
  std::vector<std::string> names;
};

MutatedSource mutate(const ProcedureGraph& graph, Mutation mutation, Rng& rng);

// Ids of nodes reachable from the start, in visiting order.
std::vector<std::string> reachable_nodes(const ProcedureGraph& graph);

// ---------------------------------------------------------------------------
// Metrics

struct Recount {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, failures = 0;
};

// Case-by-case tally with failures treated as negative predictions.
Recount recount(const std::vector<Outcome>& outcomes, const std::vector<bool>& labels);

// ---------------------------------------------------------------------------
// Screening state

// Mask re-derived from an observation's triplets alone: a symptom is askable
// when unknown and either first-layer or under a confirmed parent.
BitVector mask_from_observation(std::span<const double> observation, std::size_t history_dim,
                                const Ontology& ontology);

// Whether the action lies inside the re-derived mask.
bool action_allowed(std::span<const double> observation, std::size_t history_dim,
                    const Ontology& ontology, std::size_t action);

// ---------------------------------------------------------------------------
// Fixtures

// Two first-layer symptoms with three children each (M = 8).
Ontology small_ontology();

// Files shipped in the repository (data/, procedures/).
std::filesystem::path repo_path(const std::string& relative);

// The shipped eight-node heart-failure procedure and its ontology.
ProcedureGraph heart_failure_procedure();
Ontology cardiac_ontology();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace ddx::testing
