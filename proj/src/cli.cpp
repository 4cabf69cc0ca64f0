#include "ddx/cli.hpp"

#include <deque>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "ddx/config.hpp"
#include "ddx/dialogue.hpp"
#include "ddx/error.hpp"
#include "ddx/io.hpp"
#include "ddx/llm_channel.hpp"
#include "ddx/metrics.hpp"

namespace ddx {

namespace {

// A subcommand flag that overrides one config key.
struct Binding {
  CLI::App* command = nullptr;
  CLI::Option* option = nullptr;
  std::string key;
  std::string text;
};

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string run_log;

  std::string ontology;
  std::string cohort;
  std::string out;
  std::string policy;
  std::string screener;
  std::string variant = "policy_rollout";
  std::string split = "test";
  std::string curve;
  std::string transcripts;
  std::string errors;
  std::string labeler;
  std::string noise;
  std::string in_path;
  std::string format = "table";
  std::vector<std::string> procedures;
  std::vector<std::string> records;
  std::vector<std::string> files;
  std::string findings;
  std::string flags;
  bool lenient = false;
  bool interactive = false;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Context {
  ExperimentConfig config;
  Options opt;
  std::string command;
  std::ostream& out;
  std::ostream& err;
  std::istream& in;

  std::uint64_t seed() const { return config.get_uint("seed"); }
  std::size_t parallelism() const { return config.get_uint("parallelism"); }
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

Ontology load_ontology_from(const Context& c) {
  require(c.opt.ontology, "--ontology");
  return load_ontology(c.opt.ontology);
}

Cohort load_cohort_from(const Context& c, const Ontology& ontology) {
  require(c.opt.cohort, "--cohort");
  auto loaded = load_cohort(c.opt.cohort, &ontology);
  for (const auto& w : loaded.warnings) c.err << "warning: " << w << '\n';
  return std::move(loaded.cohort);
}

const std::vector<PatientRecord>& split_records(const CohortSplit& s, const std::string& name) {
  if (name == "train") return s.train.records;
  if (name == "validation") return s.validation.records;
  if (name == "test") return s.test.records;
  throw UsageError("unknown split '" + name + "' (expected train, validation or test)");
}

CohortSplit split_of(const Context& c, const Cohort& cohort) {
  return split(cohort, split_fractions(c.config), derive_seed(c.seed(), "split"));
}

ChannelFactory channel_factory(const Context& c) {
  const std::string kind = c.config.get_string("channel.kind");
  if (kind == "noisy") return noisy_channel_factory(noisy_channel_config(c.config));
  if (kind == "llm") {
    auto llm = llm_config_from_environment();
    llm.model = c.config.get_string("channel.llm_model");
    llm.timeout = std::chrono::milliseconds(c.config.get_uint("channel.llm_timeout_ms"));
    return [llm](std::uint64_t) { return std::make_unique<LlmChannel>(llm); };
  }
  return exact_channel_factory();
}

std::string channel_label(const Context& c) {
  const std::string kind = c.config.get_string("channel.kind");
  if (kind != "noisy") return kind;
  return "noisy(" + format_double(c.config.get_double("channel.p_neg_to_pos")) + "," +
         format_double(c.config.get_double("channel.p_pos_to_neg")) + ")";
}

struct LoadedPolicy {
  std::unique_ptr<ActorCritic> net;  // heap-held so the policy's pointer survives moves
  std::unique_ptr<InquiryPolicy> policy;
};

LoadedPolicy load_policy(const std::string& spec, const Ontology& ontology, std::size_t history_dim) {
  LoadedPolicy p;
  if (spec == "random") {
    p.policy = std::make_unique<RandomPolicy>();
    return p;
  }
  p.net = std::make_unique<ActorCritic>(load_actor_critic(spec));
  if (p.net->action_count() != ontology.size() ||
      p.net->observation_dim() != history_dim + 3 * ontology.size()) {
    throw ShapeError("policy " + spec + " does not match the ontology and cohort shape");
  }
  p.policy = std::make_unique<ActorCriticPolicy>(*p.net);
  return p;
}

void emit(const std::string& path, const std::string& text) {
  if (!path.empty()) write_file(path, text);
}

int cmd_gen_ontology(Context& c) {
  require(c.opt.out, "--out");
  const auto ontology =
      generate_synthetic_ontology(c.config.get_uint("ontology.first_layer"),
                                  c.config.get_uint("ontology.children_per_first"), c.seed());
  save_ontology(ontology, c.opt.out);
  c.out << "wrote " << ontology.size() << " symptoms (" << ontology.first_layer_count()
        << " categories) to " << c.opt.out << '\n';
  return 0;
}

int cmd_gen_cohort(Context& c) {
  require(c.opt.out, "--out");
  const auto ontology = load_ontology_from(c);
  Cohort cohort;
  if (!c.opt.labeler.empty()) {
    const auto graph = load_procedure(c.opt.labeler);
    cohort = generate_labeled_cohort(graph, ontology, labeled_cohort_config(c.config));
  } else {
    cohort = generate_cohort(ontology, cohort_config(c.config));
  }
  save_cohort(cohort, c.opt.out);
  c.out << "wrote " << cohort.records.size() << " records over " << cohort.disease_count()
        << " diseases to " << c.opt.out << '\n';
  return 0;
}

int cmd_train_policy(Context& c) {
  require(c.opt.out, "--out");
  const auto ontology = load_ontology_from(c);
  const auto cohort = load_cohort_from(c, ontology);
  const auto parts = split_of(c, cohort);
  std::string curve;
  auto result = train_policy(parts.train.records, ontology, env_config(c.config),
                             ppo_config(c.config), network_shape(c.config),
                             [&](const CurvePoint& p) { curve += to_json_line(p) + '\n'; });
  save_weights(result.policy, c.opt.out);
  emit(c.opt.curve, curve);
  c.out << "trained on " << result.steps << " steps; final mean return "
        << (result.curve.empty() ? 0.0 : result.curve.back().mean_return)
        << "; mask violations " << result.mask_violations << '\n';
  return result.mask_violations == 0 ? 0 : 1;
}

int cmd_train_screener(Context& c) {
  require(c.opt.out, "--out");
  const auto ontology = load_ontology_from(c);
  const auto cohort = load_cohort_from(c, ontology);
  const auto parts = split_of(c, cohort);
  const auto variant = parse_dataset_variant(c.opt.variant);
  LoadedPolicy policy;
  if (variant == DatasetVariant::policy_rollout) {
    require(c.opt.policy, "--policy");
    policy = load_policy(c.opt.policy, ontology, cohort.history_dim);
  }
  const auto env = env_config(c.config);
  const auto train = build_dataset(policy.policy.get(), parts.train.records, ontology, env,
                                   variant, derive_seed(c.seed(), "dataset:train"));
  const auto validation = build_dataset(policy.policy.get(), parts.validation.records, ontology,
                                        env, variant, derive_seed(c.seed(), "dataset:validation"));
  const auto fit =
      train_screener(train, validation, cohort.disease_count(), screener_config(c.config));
  save_weights(fit.classifier, c.opt.out);
  c.out << "screener (" << to_string(variant) << "): validation top-1 "
        << format_double(fit.validation_top1) << " at epoch " << fit.best_epoch << " of "
        << fit.epochs_run << '\n';
  return 0;
}

int cmd_eval_screening(Context& c) {
  const auto ontology = load_ontology_from(c);
  const auto cohort = load_cohort_from(c, ontology);
  const auto parts = split_of(c, cohort);
  const auto& records = split_records(parts, c.opt.split);
  if (records.empty()) throw ValidationError("split '" + c.opt.split + "' is empty");
  require(c.opt.screener, "--screener");
  const Mlp screener = load_mlp(c.opt.screener);
  const auto variant = parse_dataset_variant(c.opt.variant);
  const auto env = env_config(c.config);
  const std::uint64_t eval_seed = derive_seed(c.seed(), "dataset:" + c.opt.split);

  std::vector<Ranking> rankings(records.size());
  std::vector<DiseaseId> labels;
  for (const auto& r : records) labels.push_back(r.label);
  ScreeningMetrics m;
  m.cases = records.size();
  if (variant == DatasetVariant::policy_rollout) {
    require(c.opt.policy, "--policy");
    const auto policy = load_policy(c.opt.policy, ontology, cohort.history_dim);
    const auto channels = channel_factory(c);
    std::vector<Transcript> transcripts(records.size());
    std::vector<std::size_t> questions(records.size());
    parallel_for(records.size(), c.parallelism(), [&](std::size_t i) {
      const auto& record = records[i];
      Rng rng(derive_seed(eval_seed, record.id));
      auto channel = channels(derive_seed(c.seed(), "channel:" + record.id));
      RecordPatient patient(record, ontology);
      auto d = run_screening_dialogue(patient, *policy.policy, screener, ontology,
                                      cohort.disease_names, *channel, env, rng);
      rankings[i] = std::move(d.ranking);
      transcripts[i] = std::move(d.transcript);
      questions[i] = d.questions;
    });
    double total = 0.0;
    for (auto q : questions) total += static_cast<double>(q);
    m.mean_questions = total / static_cast<double>(records.size());
    emit(c.opt.transcripts, serialize_transcripts(transcripts));
  } else {
    const auto data = build_dataset(nullptr, records, ontology, env, variant, eval_seed);
    rankings = predict_rankings(screener, data);
  }
  const std::size_t D = cohort.disease_count();
  m.top1 = top_k_hit_rate(rankings, labels, 1);
  m.top3 = top_k_hit_rate(rankings, labels, std::min<std::size_t>(3, D));
  m.top5 = top_k_hit_rate(rankings, labels, std::min<std::size_t>(5, D));
  const std::string line =
      to_json_line(m, "screening/" + std::string(to_string(variant)) + "/" + c.opt.split + "/" +
                          channel_label(c));
  emit(c.opt.out, line + '\n');
  c.out << render_metrics_table(line);
  return 0;
}

int cmd_procedure_check(Context& c) {
  if (c.opt.files.empty()) throw UsageError("procedure-check needs at least one file");
  std::optional<Ontology> ontology;
  if (!c.opt.ontology.empty()) ontology = load_ontology(c.opt.ontology);
  Vocabulary vocabulary;
  vocabulary.ontology = ontology ? &*ontology : nullptr;
  vocabulary.strict = !c.opt.lenient;
  auto name_set = [](const std::string& text) {
    std::set<std::string> names;
    for (auto part : split(text, ',')) {
      if (!trim(part).empty()) names.emplace(trim(part));
    }
    return names;
  };
  if (!c.opt.findings.empty()) vocabulary.findings = name_set(c.opt.findings);
  if (!c.opt.flags.empty()) vocabulary.flags = name_set(c.opt.flags);

  bool failed = false;
  for (const auto& file : c.opt.files) {
    std::vector<Diagnostic> diagnostics;
    std::size_t nodes = 0;
    try {
      const auto graph = load_procedure(file);
      nodes = graph.nodes.size();
      diagnostics = validate(graph, vocabulary);
    } catch (const ProcedureParseError& e) {
      diagnostics = e.diagnostics();
    }
    for (const auto& d : diagnostics) c.err << d.format(file) << '\n';
    if (has_errors(diagnostics)) {
      failed = true;
    } else {
      c.out << file << ": ok (" << nodes << " nodes)\n";
    }
  }
  return failed ? 1 : 0;
}

int cmd_eval_differential(Context& c) {
  if (c.opt.procedures.size() != 1) throw UsageError("eval-differential needs exactly one --procedure");
  const auto ontology = load_ontology_from(c);
  const auto cohort = load_cohort_from(c, ontology);
  const auto graph = load_procedure(c.opt.procedures.front());
  const auto diagnostics = validate(graph, Vocabulary{&ontology, std::nullopt, std::nullopt, true});
  for (const auto& d : diagnostics) c.err << d.format(c.opt.procedures.front()) << '\n';
  if (has_errors(diagnostics)) return 1;
  const auto& records = cohort.records;
  if (records.empty()) throw ValidationError("cohort is empty");

  const auto channels = channel_factory(c);
  std::vector<Transcript> transcripts(records.size());
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), c.parallelism(), [&](std::size_t i) {
    auto channel = channels(derive_seed(c.seed(), "channel:" + records[i].id));
    auto d = run_differential_dialogue(records[i], graph, ontology, *channel);
    outcomes[i] = d.trace.outcome;
    transcripts[i] = std::move(d.transcript);
  });
  // std::vector<bool> has no contiguous storage to view as a span
  std::unique_ptr<bool[]> labels(new bool[records.size()]);
  for (std::size_t i = 0; i < records.size(); ++i) {
    labels[i] = records[i].label < cohort.disease_names.size() &&
                cohort.disease_names[records[i].label] == graph.disease;
  }
  const std::span<const bool> label_span(labels.get(), records.size());

  const auto metrics = differential_metrics(outcomes, label_span);
  const std::string line =
      to_json_line(metrics, "differential/" + graph.name + "/" + channel_label(c));
  emit(c.opt.out, line + '\n');
  emit(c.opt.transcripts, serialize_transcripts(transcripts));
  const auto report = build_error_report(transcripts, label_span);
  emit(c.opt.errors, render(report));
  c.out << render_metrics_table(line);
  return 0;
}

int cmd_consult(Context& c) {
  const auto ontology = load_ontology_from(c);
  const auto cohort = load_cohort_from(c, ontology);
  require(c.opt.policy, "--policy");
  require(c.opt.screener, "--screener");
  const auto policy = load_policy(c.opt.policy, ontology, cohort.history_dim);
  const Mlp screener = load_mlp(c.opt.screener);

  ConsultationSetup setup;
  setup.ontology = &ontology;
  setup.policy = policy.policy.get();
  setup.screener = &screener;
  setup.disease_names = cohort.disease_names;
  setup.env = env_config(c.config);
  setup.k_candidates = c.config.get_uint("consult.k_candidates");
  setup.seed = c.seed();
  auto add_procedure = [&](const std::string& path, const std::string& expected) {
    auto graph = load_procedure(path);
    if (!expected.empty() && graph.disease != expected) {
      throw ConfigError("procedure " + path + " is for '" + graph.disease + "', not '" + expected + "'");
    }
    const auto diagnostics = validate(graph, Vocabulary{&ontology, std::nullopt, std::nullopt, true});
    for (const auto& d : diagnostics) c.err << d.format(path) << '\n';
    if (has_errors(diagnostics)) throw ValidationError("procedure " + path + " does not validate");
    const std::string disease = graph.disease;
    setup.procedures[disease] = std::move(graph);
  };
  for (const auto& ref : c.config.procedures()) add_procedure(ref.path, ref.disease);
  for (const auto& path : c.opt.procedures) add_procedure(path, "");

  if (c.opt.interactive) {
    ConsolePatient patient(c.in, c.out);
    ExactChannel channel;
    Rng rng(derive_seed(c.seed(), "interactive"));
    auto consultation = run_full_consultation(patient, setup, channel, rng);
    c.out << consultation.transcript.turns.back().text << '\n';
    emit(c.opt.transcripts, serialize_transcripts(std::span(&consultation.transcript, 1)));
    emit(c.opt.out, to_json_line(consultation.result) + '\n');
    return 0;
  }

  std::vector<PatientRecord> records;
  if (c.opt.records.empty()) {
    records = split_of(c, cohort).test.records;
  } else {
    for (const auto& id : c.opt.records) {
      const auto* r = cohort.find(id);
      if (r == nullptr) throw ValidationError("no record '" + id + "' in the cohort");
      records.push_back(*r);
    }
  }
  const auto batch = batch_run(records, setup, channel_factory(c), c.parallelism());
  std::string results;
  std::vector<Transcript> transcripts;
  std::map<std::string, std::size_t> decisions;
  for (const auto& consultation : batch.consultations) {
    if (!consultation) continue;
    results += to_json_line(consultation->result) + '\n';
    transcripts.push_back(consultation->transcript);
    ++decisions[to_string(consultation->result.decision)];
  }
  emit(c.opt.out, results);
  emit(c.opt.transcripts, serialize_transcripts(transcripts));
  c.out << "consultations: " << transcripts.size() << '\n';
  for (const auto& [decision, count] : decisions) c.out << "  " << decision << ": " << count << '\n';
  for (const auto& e : batch.errors) c.err << "error: record " << e.record_id << ": " << e.message << '\n';
  return batch.errors.empty() ? 0 : 1;
}

int cmd_report(Context& c) {
  require(c.opt.in_path, "--in");
  const std::string text = read_file(c.opt.in_path);
  if (c.opt.format == "table") {
    c.out << render_metrics_table(text);
  } else {
    for (auto line : split_lines(text)) {
      if (trim(line).empty()) continue;
      try {
        c.out << Json::parse(line).dump() << '\n';
      } catch (const Json::exception& e) {
        throw FormatError(std::string("metrics file: ") + e.what());
      }
    }
  }
  return 0;
}

std::string run_log_header(const Context& c, const std::vector<std::string>& args) {
  Json header;
  header["artifact"] = "ddx";
  header["version"] = kArtifactVersion;
  header["command"] = c.command;
  header["args"] = args;
  header["seed"] = c.seed();
  header["config"] = c.config.resolved();
  return header.dump();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in) {
  CLI::App app{"Conversational diagnosis planning: screening policy, screener, decision procedures",
               "ddx"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  std::deque<Binding> bindings;
  auto bind = [&](CLI::App* command, const std::string& flag, const std::string& key,
                  const std::string& help) {
    bindings.push_back({command, nullptr, key, {}});
    bindings.back().option = command->add_option(flag, bindings.back().text, help);
  };

  app.add_option("--config", opt.config_path, "experiment config (JSON)");
  app.add_option("--set", opt.sets, "override a config key: key=value");
  app.add_option("--run-log", opt.run_log, "write the run-log header here instead of stderr");
  bind(&app, "--seed", "seed", "master seed");
  bind(&app, "--parallelism", "parallelism", "worker threads");

  auto* gen_ontology = app.add_subcommand("gen-ontology", "generate a synthetic symptom ontology");
  gen_ontology->add_option("--out", opt.out, "ontology file to write");
  bind(gen_ontology, "--first", "ontology.first_layer", "first-layer categories");
  bind(gen_ontology, "--children", "ontology.children_per_first", "children per category");

  auto* gen_cohort = app.add_subcommand("gen-cohort", "generate a synthetic patient cohort");
  gen_cohort->add_option("--ontology", opt.ontology, "ontology file");
  gen_cohort->add_option("--out", opt.out, "cohort file to write");
  gen_cohort->add_option("--labeler", opt.labeler, "label records by this procedure's verdict");
  bind(gen_cohort, "--diseases", "cohort.diseases", "number of diseases");
  bind(gen_cohort, "--size", "cohort.size", "number of records");
  bind(gen_cohort, "--history-dim", "cohort.history_dim", "history feature length");
  bind(gen_cohort, "--labeled-size", "labeled.size", "records in a procedure-labeled cohort");
  bind(gen_cohort, "--positive-fraction", "labeled.positive_fraction", "confirmed share");

  auto* train_pol = app.add_subcommand("train-policy", "train the inquiry policy with PPO");
  train_pol->add_option("--ontology", opt.ontology, "ontology file");
  train_pol->add_option("--cohort", opt.cohort, "cohort file");
  train_pol->add_option("--out", opt.out, "policy weights to write");
  train_pol->add_option("--curve", opt.curve, "learning curve (JSON lines)");
  bind(train_pol, "--budget", "env.budget", "questions per episode");
  bind(train_pol, "--steps", "ppo.total_steps", "training transitions");
  bind(train_pol, "--reward", "env.reward", "reward variant: P or PN");

  auto* train_scr = app.add_subcommand("train-screener", "train the disease screener");
  train_scr->add_option("--ontology", opt.ontology, "ontology file");
  train_scr->add_option("--cohort", opt.cohort, "cohort file");
  train_scr->add_option("--policy", opt.policy, "policy weights or 'random'");
  train_scr->add_option("--variant", opt.variant,
                        "policy_rollout, full_oracle, history_only or symptoms_only");
  train_scr->add_option("--out", opt.out, "screener weights to write");
  bind(train_scr, "--budget", "env.budget", "questions per episode");

  auto* eval_scr = app.add_subcommand("eval-screening", "evaluate screening Top-K on a split");
  eval_scr->add_option("--ontology", opt.ontology, "ontology file");
  eval_scr->add_option("--cohort", opt.cohort, "cohort file");
  eval_scr->add_option("--policy", opt.policy, "policy weights or 'random'");
  eval_scr->add_option("--screener", opt.screener, "screener weights");
  eval_scr->add_option("--variant", opt.variant, "dataset variant");
  eval_scr->add_option("--split", opt.split, "train, validation or test");
  eval_scr->add_option("--noise", opt.noise, "noisy channel rates: p_neg_to_pos,p_pos_to_neg");
  eval_scr->add_option("--transcripts", opt.transcripts, "dialogue transcripts to write");
  eval_scr->add_option("--out", opt.out, "metrics (JSON lines) to write");
  bind(eval_scr, "--budget", "env.budget", "questions per episode");

  auto* check = app.add_subcommand("procedure-check", "parse and validate decision procedures");
  check->add_option("files", opt.files, "procedure files")->required();
  check->add_option("--ontology", opt.ontology, "resolve symptom names against this ontology");
  check->add_option("--findings", opt.findings, "known finding names, comma separated");
  check->add_option("--flags", opt.flags, "known flag names, comma separated");
  check->add_flag("--lenient", opt.lenient, "report unresolved names as warnings");

  auto* eval_diff = app.add_subcommand("eval-differential", "evaluate a procedure on a cohort");
  eval_diff->add_option("--procedure", opt.procedures, "procedure file");
  eval_diff->add_option("--ontology", opt.ontology, "ontology file");
  eval_diff->add_option("--cohort", opt.cohort, "cohort file");
  eval_diff->add_option("--noise", opt.noise, "noisy channel rates: p_neg_to_pos,p_pos_to_neg");
  eval_diff->add_option("--transcripts", opt.transcripts, "dialogue transcripts to write");
  eval_diff->add_option("--errors", opt.errors, "error report to write");
  eval_diff->add_option("--out", opt.out, "metrics (JSON lines) to write");

  auto* consult = app.add_subcommand("consult", "run full simulated consultations");
  consult->add_option("--ontology", opt.ontology, "ontology file");
  consult->add_option("--cohort", opt.cohort, "cohort file");
  consult->add_option("--policy", opt.policy, "policy weights or 'random'");
  consult->add_option("--screener", opt.screener, "screener weights");
  consult->add_option("--procedure", opt.procedures, "procedure file (repeatable)");
  consult->add_option("--record", opt.records, "record id (repeatable; default: test split)");
  consult->add_option("--noise", opt.noise, "noisy channel rates: p_neg_to_pos,p_pos_to_neg");
  consult->add_flag("--interactive", opt.interactive, "answer as the patient on standard input");
  consult->add_option("--transcripts", opt.transcripts, "dialogue transcripts to write");
  consult->add_option("--out", opt.out, "consultation results (JSON lines) to write");
  bind(consult, "--k", "consult.k_candidates", "top-ranked diseases to examine");
  bind(consult, "--budget", "env.budget", "screening questions");

  auto* report = app.add_subcommand("report", "render a metrics file");
  report->add_option("--in", opt.in_path, "metrics file (JSON lines)");
  report->add_option("--format", opt.format, "table or jsonl")
      ->check(CLI::IsMember({"table", "jsonl"}));

  std::vector<std::string> argv_storage{"ddx"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Context c{ExperimentConfig{}, opt, chosen->get_name(), out, err, in};
  try {
    if (!opt.config_path.empty()) c.config = load_config(opt.config_path);
    for (const auto& s : opt.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      c.config.set(s.substr(0, eq), s.substr(eq + 1), Source::flag);
    }
    for (const auto& b : bindings) {
      if ((b.command == &app || b.command == chosen) && b.option->count() > 0) {
        c.config.set(b.key, b.text, Source::flag);
      }
    }
    if (!opt.noise.empty()) {
      const auto parts = split(opt.noise, ',');
      if (parts.size() != 2) throw UsageError("--noise expects two rates: p_neg_to_pos,p_pos_to_neg");
      c.config.set("channel.kind", "noisy", Source::flag);
      c.config.set("channel.p_neg_to_pos", trim(parts[0]), Source::flag);
      c.config.set("channel.p_pos_to_neg", trim(parts[1]), Source::flag);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chosen->help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    const std::string header = run_log_header(c, args);
    if (opt.run_log.empty()) {
      err << header << '\n';
    } else {
      write_file(opt.run_log, header + '\n');
    }
    const std::string& name = c.command;
    if (name == "gen-ontology") return cmd_gen_ontology(c);
    if (name == "gen-cohort") return cmd_gen_cohort(c);
    if (name == "train-policy") return cmd_train_policy(c);
    if (name == "train-screener") return cmd_train_screener(c);
    if (name == "eval-screening") return cmd_eval_screening(c);
    if (name == "procedure-check") return cmd_procedure_check(c);
    if (name == "eval-differential") return cmd_eval_differential(c);
    if (name == "consult") return cmd_consult(c);
    if (name == "report") return cmd_report(c);
    err << "error: unknown command " << name << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chosen->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ddx
