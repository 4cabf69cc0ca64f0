#include "ddx/cohort.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {
namespace {

using ojson = nlohmann::ordered_json;

constexpr int kMaxResamples = 100000;

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(what) + " must lie in [0, 1], got " + format_double(p));
  }
}

void check_range(const ProbRange& r, const char* what) {
  check_prob(r.lo, what);
  check_prob(r.hi, what);
  if (r.lo > r.hi) throw ConfigError(std::string(what) + ": lower bound exceeds upper bound");
}

std::string record_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "p" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

double log_or_neg_inf(double x) {
  return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

}  // namespace

Cohort Cohort::subset(std::span<const std::size_t> indices) const {
  Cohort out;
  out.symptom_count = symptom_count;
  out.first_layer_count = first_layer_count;
  out.history_dim = history_dim;
  out.seed = seed;
  out.disease_names = disease_names;
  out.profiles = profiles;
  out.records.reserve(indices.size());
  for (auto i : indices) out.records.push_back(records.at(i));
  return out;
}

const PatientRecord* Cohort::find(std::string_view record_id) const {
  for (const auto& r : records) {
    if (r.id == record_id) return &r;
  }
  return nullptr;
}

void validate(const CohortConfig& c, const Ontology& ontology) {
  if (c.diseases < 2) throw ConfigError("cohort needs at least 2 diseases");
  if (c.size < c.diseases) throw ConfigError("cohort size must be at least the disease count");
  if (ontology.size() == 0) throw ConfigError("ontology is empty");
  if (!(c.prior_weight.lo >= 0.0 && c.prior_weight.lo <= c.prior_weight.hi &&
        std::isfinite(c.prior_weight.hi))) {
    throw ConfigError("prior_weight must be a finite non-negative range");
  }
  if (c.prior_weight.hi <= 0.0) throw ConfigError("prior_weight upper bound must be positive");
  check_range(c.characteristic_prob, "characteristic_prob");
  check_range(c.background_prob, "background_prob");
  check_range(c.signature_child_prob, "signature_child_prob");
  check_range(c.background_child_prob, "background_child_prob");
  check_prob(c.denial_prob, "denial_prob");
  check_prob(c.finding_presence, "finding_presence");
  if (c.characteristic_categories < 1) {
    throw ConfigError("characteristic_categories must be at least 1");
  }
  if (c.characteristic_prob.hi <= 0.0) throw ConfigError("characteristic_prob must allow presence");
  if (!(c.history_scale >= 0.0)) throw ConfigError("history_scale must be non-negative");
  if (!(c.history_noise > 0.0)) throw ConfigError("history_noise must be positive");
}

std::vector<DiseaseProfile> random_profiles(const Ontology& ontology, const CohortConfig& config,
                                            Rng& rng) {
  validate(config, ontology);
  const std::size_t F = ontology.first_layer_count();
  const std::size_t M = ontology.size();
  const std::size_t n_char = std::min(config.characteristic_categories, F);

  auto draw_characteristic = [&] {
    std::vector<std::size_t> categories(F);
    std::iota(categories.begin(), categories.end(), 0);
    rng.shuffle(categories);
    std::vector<bool> characteristic(F, false);
    for (std::size_t i = 0; i < n_char; ++i) characteristic[categories[i]] = true;
    return characteristic;
  };
  std::vector<std::vector<bool>> family_categories;
  for (std::size_t f = 0; f < config.families; ++f) family_categories.push_back(draw_characteristic());

  std::vector<DiseaseProfile> profiles(config.diseases);
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < config.diseases; ++k) {
    auto& p = profiles[k];
    p.label = k;
    p.name = "disease" + std::to_string(k);
    p.prior = rng.uniform(config.prior_weight.lo, config.prior_weight.hi);
    weight_sum += p.prior;

    const std::vector<bool> characteristic = config.families == 0
                                                 ? draw_characteristic()
                                                 : family_categories[k % config.families];

    p.first_layer_probs.resize(F);
    p.child_cond_probs.assign(M - F, 0.0);
    for (std::size_t f = 0; f < F; ++f) {
      const auto& range = characteristic[f] ? config.characteristic_prob : config.background_prob;
      p.first_layer_probs[f] = rng.uniform(range.lo, range.hi);

      auto children = ontology.children_of(SymptomId{f});
      std::vector<std::size_t> order(children.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      const std::size_t n_sig = characteristic[f] ? std::min(config.signature_children, order.size()) : 0;
      std::vector<bool> signature(children.size(), false);
      for (std::size_t i = 0; i < n_sig; ++i) signature[order[i]] = true;
      for (std::size_t c = 0; c < children.size(); ++c) {
        const auto& cr = signature[c] ? config.signature_child_prob : config.background_child_prob;
        p.child_cond_probs[children[c].value - F] = rng.uniform(cr.lo, cr.hi);
      }
    }

    p.denial_prob = config.denial_prob;
    p.history_mean.resize(config.history_dim);
    for (auto& m : p.history_mean) m = rng.normal(0.0, config.history_scale);
    p.history_noise = config.history_noise;
    for (std::size_t f = 0; f < config.findings; ++f) {
      p.finding_dists["lab" + std::to_string(f)] = {50.0 + 15.0 * rng.normal(), 10.0};
    }
    p.finding_presence = config.finding_presence;
  }
  for (auto& p : profiles) p.prior /= weight_sum;
  return profiles;
}

PatientRecord sample_record(const DiseaseProfile& profile, const Ontology& ontology,
                            std::string id, Rng& rng) {
  const std::size_t F = ontology.first_layer_count();
  const std::size_t M = ontology.size();
  if (profile.first_layer_probs.size() != F || profile.child_cond_probs.size() != M - F) {
    throw ShapeError("profile '" + profile.name + "' does not match the ontology");
  }
  PatientRecord r;
  r.id = std::move(id);
  r.label = profile.label;
  r.oracle_symptoms.assign(M, 0);
  r.explicit_denials.assign(M, 0);

  bool any = false;
  for (int attempt = 0; !any; ++attempt) {
    if (attempt == kMaxResamples) {
      throw ContractViolation("profile '" + profile.name +
                              "' cannot produce a positive first-layer symptom");
    }
    for (std::size_t f = 0; f < F; ++f) {
      r.oracle_symptoms[f] = rng.bernoulli(profile.first_layer_probs[f]) ? 1 : 0;
      any = any || r.oracle_symptoms[f];
    }
  }
  for (std::size_t j = F; j < M; ++j) {
    const auto parent = ontology.parent_of(SymptomId{j})->value;
    r.oracle_symptoms[j] =
        (r.oracle_symptoms[parent] && rng.bernoulli(profile.child_cond_probs[j - F])) ? 1 : 0;
  }
  for (std::size_t j = 0; j < M; ++j) {
    if (!r.oracle_symptoms[j] && rng.bernoulli(profile.denial_prob)) r.explicit_denials[j] = 1;
  }
  r.history.resize(profile.history_mean.size());
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    r.history[i] = profile.history_mean[i] + profile.history_noise * rng.normal();
  }
  for (const auto& [name, dist] : profile.finding_dists) {
    if (rng.bernoulli(profile.finding_presence)) {
      r.findings[name] = dist.stddev > 0.0 ? dist.mean + dist.stddev * rng.normal() : dist.mean;
    }
  }
  return r;
}

Cohort generate_cohort(const Ontology& ontology, std::vector<DiseaseProfile> profiles,
                       std::size_t size, std::uint64_t seed) {
  if (profiles.empty()) throw ConfigError("at least one disease profile is required");
  double prior_sum = 0.0;
  for (const auto& p : profiles) {
    check_prob(p.prior, "prior");
    check_prob(p.denial_prob, "denial_prob");
    check_prob(p.finding_presence, "finding_presence");
    for (double q : p.first_layer_probs) check_prob(q, "first_layer_probs");
    for (double q : p.child_cond_probs) check_prob(q, "child_cond_probs");
    prior_sum += p.prior;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw ConfigError("profile priors must sum to 1");
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    if (profiles[k].label != k) throw ConfigError("profile labels must be 0..D-1 in order");
  }

  Cohort cohort;
  cohort.symptom_count = ontology.size();
  cohort.first_layer_count = ontology.first_layer_count();
  cohort.history_dim = profiles.front().history_mean.size();
  cohort.seed = seed;
  for (const auto& p : profiles) cohort.disease_names.push_back(p.name);

  Rng rng(derive_seed(seed, "records"));
  cohort.records.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    double u = rng.uniform();
    std::size_t label = profiles.size() - 1;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      if (u < profiles[k].prior) {
        label = k;
        break;
      }
      u -= profiles[k].prior;
    }
    cohort.records.push_back(sample_record(profiles[label], ontology, record_id(i), rng));
  }
  cohort.profiles = std::move(profiles);
  return cohort;
}

Cohort generate_cohort(const Ontology& ontology, const CohortConfig& config) {
  Rng rng(derive_seed(config.seed, "profiles"));
  auto profiles = random_profiles(ontology, config, rng);
  return generate_cohort(ontology, std::move(profiles), config.size, config.seed);
}

CohortSplit split(const Cohort& cohort, SplitFractions fr, std::uint64_t seed) {
  const std::size_t n = cohort.records.size();
  if (n < 3) throw ContractViolation("cannot split a cohort of fewer than 3 records");
  const std::array<double, 3> f{fr.train, fr.validation, fr.test};
  for (double x : f) {
    if (!(x >= 0.0)) throw ContractViolation("split fractions must be non-negative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ContractViolation("split fractions must sum to 1");
  }

  // Global targets by largest remainder.
  std::array<std::size_t, 3> target{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double ideal = f[s] * static_cast<double>(n);
    target[s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
    frac[s] = ideal - static_cast<double>(target[s]);
    assigned += target[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (frac[s] > frac[best]) best = s;
    }
    ++target[best];
    frac[best] = -1.0;
    ++assigned;
  }

  // Per-label floors, then hand out each label's remainder to distinct splits
  // that still have global room.
  std::map<DiseaseId, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[cohort.records[i].label].push_back(i);
  Rng rng(derive_seed(seed, "split"));

  struct LabelPlan {
    std::vector<std::size_t> members;
    std::array<std::size_t, 3> count{};
    std::array<double, 3> frac{};
    std::size_t remainder = 0;
  };
  std::vector<LabelPlan> plans;
  std::array<std::size_t, 3> room = target;
  for (auto& [label, members] : by_label) {
    LabelPlan p;
    p.members = members;
    rng.shuffle(p.members);
    std::size_t used = 0;
    for (int s = 0; s < 3; ++s) {
      const double ideal = f[s] * static_cast<double>(p.members.size());
      p.count[s] = static_cast<std::size_t>(std::floor(ideal + 1e-9));
      p.frac[s] = ideal - static_cast<double>(p.count[s]);
      used += p.count[s];
      room[s] -= p.count[s];
    }
    p.remainder = p.members.size() - used;
    plans.push_back(std::move(p));
  }
  std::vector<std::size_t> order(plans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return plans[a].remainder > plans[b].remainder; });
  for (auto li : order) {
    auto& p = plans[li];
    std::array<bool, 3> taken{};
    for (std::size_t r = 0; r < p.remainder; ++r) {
      int best = -1;
      for (int s = 0; s < 3; ++s) {
        if (taken[s] || room[s] == 0) continue;
        if (best < 0 || p.frac[s] > p.frac[best] ||
            (p.frac[s] == p.frac[best] && room[s] > room[best])) {
          best = s;
        }
      }
      if (best < 0) {
        // Counts do not allow a one-per-split spread; fall back to any room.
        for (int s = 0; s < 3; ++s) {
          if (room[s] > 0) {
            best = s;
            break;
          }
        }
      }
      taken[best] = true;
      ++p.count[best];
      --room[best];
    }
  }

  std::array<std::vector<std::size_t>, 3> parts;
  for (const auto& p : plans) {
    std::size_t k = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t c = 0; c < p.count[s]; ++c) parts[s].push_back(p.members[k++]);
    }
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return {cohort.subset(parts[0]), cohort.subset(parts[1]), cohort.subset(parts[2])};
}

SymptomState answer_symptom_query(const PatientRecord& record, SymptomId symptom) {
  if (symptom.value >= record.oracle_symptoms.size()) {
    throw ContractViolation("symptom id " + std::to_string(symptom.value) + " out of range");
  }
  return record.oracle_symptoms[symptom.value] ? SymptomState::confirmed : SymptomState::denied;
}

bool answer_finding_query(const PatientRecord& record, const Atom& atom) {
  auto it = record.findings.find(atom.name);
  if (it == record.findings.end()) return atom.missing_answer;
  if (atom.kind == Atom::Kind::flag) return it->second != 0.0;
  return compare(it->second, atom.cmp, atom.constant);
}

std::vector<std::string> check_record(const PatientRecord& r, const Ontology& ontology) {
  std::vector<std::string> problems;
  const std::size_t M = ontology.size();
  if (r.oracle_symptoms.size() != M || r.explicit_denials.size() != M) {
    problems.push_back("record " + r.id + ": symptom vectors do not have length " +
                       std::to_string(M));
    return problems;
  }
  bool any_first = false;
  for (std::size_t j = 0; j < M; ++j) {
    if (r.oracle_symptoms[j] && r.explicit_denials[j]) {
      problems.push_back("record " + r.id + ": symptom " + ontology.node(SymptomId{j}).name +
                         " is both present and denied");
    }
    if (j < ontology.first_layer_count()) {
      any_first = any_first || r.oracle_symptoms[j];
    } else if (r.oracle_symptoms[j] && !r.oracle_symptoms[ontology.parent_of(SymptomId{j})->value]) {
      problems.push_back("record " + r.id + ": " + ontology.node(SymptomId{j}).name +
                         " present without its parent");
    }
  }
  if (!any_first) problems.push_back("record " + r.id + ": no first-layer symptom present");
  return problems;
}

Posterior bayes_posterior(std::span<const DiseaseProfile> profiles, const Ontology& ontology,
                          const Evidence& evidence) {
  const std::size_t F = ontology.first_layer_count();
  const std::size_t M = ontology.size();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  if (!evidence.symptoms.empty() && evidence.symptoms.size() != M) {
    throw ShapeError("evidence must cover all " + std::to_string(M) + " symptoms");
  }
  auto state = [&](std::size_t j) {
    return evidence.symptoms.empty() ? SymptomState::unknown : evidence.symptoms[j];
  };

  std::vector<double> logp(profiles.size(), neg_inf);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& p = profiles[k];
    // P(obs) and P(obs, no category present), factorized per category.
    double log_obs = 0.0;
    double log_none = 0.0;
    double log_all_absent = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const double pf = p.first_layer_probs[f];
      double present = pf;
      double absent = 1.0 - pf;
      for (auto c : ontology.children_of(SymptomId{f})) {
        const double q = p.child_cond_probs[c.value - F];
        switch (state(c.value)) {
          case SymptomState::confirmed:
            present *= q;
            absent = 0.0;
            break;
          case SymptomState::denied:
            present *= 1.0 - q;
            break;
          case SymptomState::unknown:
            break;
        }
      }
      double obs = 0.0, none = 0.0;
      switch (state(f)) {
        case SymptomState::confirmed:
          obs = present;
          break;
        case SymptomState::denied:
          obs = absent;
          none = absent;
          break;
        case SymptomState::unknown:
          obs = present + absent;
          none = absent;
          break;
      }
      log_obs += log_or_neg_inf(obs);
      log_none += log_or_neg_inf(none);
      log_all_absent += log_or_neg_inf(1.0 - pf);
    }
    if (log_obs == neg_inf) continue;
    const double ratio = std::exp(log_none - log_obs);
    if (ratio >= 1.0) continue;
    const double log_truncated = log_obs + std::log1p(-ratio);
    const double log_z = std::log1p(-std::exp(log_all_absent));
    double lp = std::log(p.prior) + log_truncated - log_z;

    if (evidence.history) {
      const auto& h = *evidence.history;
      if (h.size() != p.history_mean.size()) throw ShapeError("history dimension mismatch");
      double sq = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double diff = h[i] - p.history_mean[i];
        sq += diff * diff;
      }
      const double var = p.history_noise * p.history_noise;
      lp += -0.5 * sq / var - static_cast<double>(h.size()) * std::log(p.history_noise);
    }
    logp[k] = lp;
  }

  Posterior post;
  const double best = profiles.empty() ? neg_inf : *std::max_element(logp.begin(), logp.end());
  post.probabilities.assign(profiles.size(), 0.0);
  if (best == neg_inf || std::isnan(best)) {
    post.uniform_fallback = true;
    std::fill(post.probabilities.begin(), post.probabilities.end(),
              profiles.empty() ? 0.0 : 1.0 / static_cast<double>(profiles.size()));
    return post;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    post.probabilities[k] = std::exp(logp[k] - best);
    total += post.probabilities[k];
  }
  for (auto& x : post.probabilities) x /= total;
  return post;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::vector<std::size_t> set_bits(const BitVector& bits) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(i);
  }
  return out;
}

ojson profile_to_json(const DiseaseProfile& p) {
  ojson findings = ojson::object();
  for (const auto& [name, d] : p.finding_dists) findings[name] = {d.mean, d.stddev};
  return ojson{{"label", p.label},
               {"name", p.name},
               {"prior", p.prior},
               {"first_layer_probs", p.first_layer_probs},
               {"child_cond_probs", p.child_cond_probs},
               {"denial_prob", p.denial_prob},
               {"history_mean", p.history_mean},
               {"history_noise", p.history_noise},
               {"finding_dists", findings},
               {"finding_presence", p.finding_presence}};
}

}  // namespace

std::string serialize_cohort(const Cohort& c) {
  std::string out;
  ojson header{{"M", c.symptom_count},   {"F", c.first_layer_count}, {"D", c.disease_count()},
               {"d", c.history_dim},     {"seed", c.seed},            {"diseases", c.disease_names}};
  out += header.dump() + "\n";
  for (const auto& r : c.records) {
    ojson findings = ojson::object();
    for (const auto& [name, v] : r.findings) findings[name] = v;
    ojson rec{{"id", r.id},
              {"label", r.label},
              {"symptoms", set_bits(r.oracle_symptoms)},
              {"denials", set_bits(r.explicit_denials)},
              {"history", r.history},
              {"findings", findings}};
    out += rec.dump() + "\n";
  }
  return out;
}

std::string serialize_profiles(const std::vector<DiseaseProfile>& profiles) {
  ojson arr = ojson::array();
  for (const auto& p : profiles) arr.push_back(profile_to_json(p));
  return arr.dump(1) + "\n";
}

std::vector<DiseaseProfile> parse_profiles(std::string_view text) {
  std::vector<DiseaseProfile> out;
  try {
    auto arr = ojson::parse(text);
    for (const auto& j : arr) {
      DiseaseProfile p;
      p.label = j.at("label").get<std::size_t>();
      p.name = j.at("name").get<std::string>();
      p.prior = j.at("prior").get<double>();
      p.first_layer_probs = j.at("first_layer_probs").get<std::vector<double>>();
      p.child_cond_probs = j.at("child_cond_probs").get<std::vector<double>>();
      p.denial_prob = j.at("denial_prob").get<double>();
      p.history_mean = j.at("history_mean").get<std::vector<double>>();
      p.history_noise = j.at("history_noise").get<double>();
      for (const auto& [name, d] : j.at("finding_dists").items()) {
        p.finding_dists[name] = {d.at(0).get<double>(), d.at(1).get<double>()};
      }
      p.finding_presence = j.at("finding_presence").get<double>();
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed profiles document: ") + e.what());
  }
  return out;
}

std::filesystem::path profiles_path_for(const std::filesystem::path& cohort_path) {
  auto p = cohort_path;
  p.replace_extension(".profiles.json");
  return p;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  write_file(path, serialize_cohort(cohort));
  if (!cohort.profiles.empty()) {
    write_file(profiles_path_for(path), serialize_profiles(cohort.profiles));
  }
}

Cohort parse_cohort(std::string_view text, const Ontology* ontology,
                    std::vector<std::string>* warnings) {
  Cohort c;
  auto lines = split_lines(text);
  bool have_header = false;
  std::size_t D = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = trim(lines[ln]);
    if (line.empty()) continue;
    const std::string where = "cohort line " + std::to_string(ln + 1) + ": ";
    try {
      auto j = ojson::parse(line);
      if (!have_header) {
        c.symptom_count = j.at("M").get<std::size_t>();
        c.first_layer_count = j.at("F").get<std::size_t>();
        D = j.at("D").get<std::size_t>();
        c.history_dim = j.at("d").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("diseases")) {
          c.disease_names = j.at("diseases").get<std::vector<std::string>>();
        } else {
          for (std::size_t k = 0; k < D; ++k) c.disease_names.push_back("disease" + std::to_string(k));
        }
        if (c.disease_names.size() != D) throw FormatError(where + "disease name count differs from D");
        if (ontology && (ontology->size() != c.symptom_count ||
                         ontology->first_layer_count() != c.first_layer_count)) {
          throw FormatError(where + "header M/F do not match the ontology");
        }
        have_header = true;
        continue;
      }
      PatientRecord r;
      r.id = j.at("id").get<std::string>();
      r.label = j.at("label").get<std::size_t>();
      if (r.label >= D) throw FormatError(where + "label out of range");
      r.oracle_symptoms.assign(c.symptom_count, 0);
      r.explicit_denials.assign(c.symptom_count, 0);
      for (auto i : j.at("symptoms").get<std::vector<std::size_t>>()) {
        if (i >= c.symptom_count) throw FormatError(where + "symptom index out of range");
        r.oracle_symptoms[i] = 1;
      }
      for (auto i : j.at("denials").get<std::vector<std::size_t>>()) {
        if (i >= c.symptom_count) throw FormatError(where + "denial index out of range");
        r.explicit_denials[i] = 1;
      }
      r.history = j.at("history").get<std::vector<double>>();
      if (r.history.size() != c.history_dim) throw FormatError(where + "history has wrong length");
      for (const auto& [name, v] : j.at("findings").items()) r.findings[name] = v.get<double>();
      if (ontology) {
        for (auto& problem : check_record(r, *ontology)) {
          if (warnings) warnings->push_back(problem);
        }
      }
      c.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    }
  }
  if (!have_header) throw FormatError("cohort file has no header line");
  return c;
}

LoadedCohort load_cohort(const std::filesystem::path& path, const Ontology* ontology) {
  LoadedCohort out;
  out.cohort = parse_cohort(read_file(path), ontology, &out.warnings);
  auto ppath = profiles_path_for(path);
  if (std::filesystem::exists(ppath)) out.cohort.profiles = parse_profiles(read_file(ppath));
  return out;
}

}  // namespace ddx
