#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "ddx/dialogue.hpp"
#include "ddx/error.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

// Ranking fixed by the bias alone: disease `favourite` first, the rest in index order.
Mlp constant_screener(std::size_t input, std::size_t diseases, std::size_t favourite) {
  DenseLayer l;
  l.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(diseases), static_cast<Eigen::Index>(input));
  l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(diseases));
  l.bias(static_cast<Eigen::Index>(favourite)) = 1.0;
  return Mlp({l});
}

struct Screening {
  Ontology ontology = generate_synthetic_ontology(4, 3, 1);
  Cohort cohort;
  RandomPolicy policy;
  Mlp screener;
  EnvConfig env;

  Screening() {
    CohortConfig cfg;
    cfg.diseases = 3;
    cfg.size = 300;
    cfg.history_dim = 2;
    cfg.families = 0;
    cohort = generate_cohort(ontology, cfg);
    Rng rng(1);
    screener = Mlp({2 + 3 * ontology.size(), 3}, {Activation::identity}, rng);
    env.budget = 5;
  }
};

TEST(ScreeningDialogue, TurnLayout) {
  Screening f;
  ExactChannel channel;
  Rng rng(2);
  const auto& r = f.cohort.records[0];
  RecordPatient patient(r, f.ontology);
  auto d = run_screening_dialogue(patient, f.policy, f.screener, f.ontology,
                                  f.cohort.disease_names, channel, f.env, rng);
  const auto& t = d.transcript;
  EXPECT_EQ(t.turns.size(), 1 + 2 * d.questions + 1);
  EXPECT_LE(d.questions, f.env.budget);
  EXPECT_EQ(t.turns.front().kind, TurnKind::disclosure);
  EXPECT_EQ(t.turns.front().speaker, Speaker::patient);
  EXPECT_EQ(t.turns.back().kind, TurnKind::ranking);
  for (std::size_t i = 0; i < d.questions; ++i) {
    EXPECT_EQ(t.turns[1 + 2 * i].speaker, Speaker::doctor);
    EXPECT_EQ(t.turns[2 + 2 * i].speaker, Speaker::patient);
    EXPECT_EQ(t.turns[1 + 2 * i].ref, t.turns[2 + 2 * i].ref);
  }
  EXPECT_TRUE(check_transcript(t).empty());
  EXPECT_EQ(d.ranking.order.size(), 3u);
}

TEST(ScreeningDialogue, ExactChannelMatchesEnvironment) {
  Screening f;
  ExactChannel channel;
  for (const auto& r : f.cohort.records) {
    const std::uint64_t seed = derive_seed(17, r.id);
    Rng env_rng(seed), dlg_rng(seed);
    auto episode = run_episode(f.policy, r, f.ontology, f.env, env_rng);
    RecordPatient patient(r, f.ontology);
    auto d = run_screening_dialogue(patient, f.policy, f.screener, f.ontology,
                                    f.cohort.disease_names, channel, f.env, dlg_rng);
    ASSERT_EQ(d.observed_state.triplets, episode.final_state.triplets);
    ASSERT_EQ(d.observed_state.asked, episode.final_state.asked);
    ASSERT_EQ(d.questions, episode.actions.size());
    for (std::size_t i = 0; i < episode.actions.size(); ++i) {
      EXPECT_EQ(d.transcript.turns[1 + 2 * i].ref, f.ontology.node(episode.actions[i]).name);
    }
  }
}

TEST(ScreeningDialogue, TrajectoryIsRecorded) {
  Screening f;
  ExactChannel channel;
  Rng rng(3);
  RecordPatient patient(f.cohort.records[1], f.ontology);
  std::vector<ScreeningState> trajectory;
  auto d = run_screening_dialogue(patient, f.policy, f.screener, f.ontology,
                                  f.cohort.disease_names, channel, f.env, rng, &trajectory);
  ASSERT_EQ(trajectory.size(), d.questions + 1);
  EXPECT_EQ(trajectory.back().triplets, d.observed_state.triplets);
  for (std::size_t i = 0; i < trajectory.size(); ++i) EXPECT_EQ(trajectory[i].turn, i);
}

TEST(ScreeningDialogue, SaturatedNoiseFlipsConfirmations) {
  Screening f;
  NoisyChannel channel({0.0, 1.0, 1});
  for (std::size_t k = 0; k < 20; ++k) {
    Rng rng(k);
    RecordPatient patient(f.cohort.records[k], f.ontology);
    auto d = run_screening_dialogue(patient, f.policy, f.screener, f.ontology,
                                    f.cohort.disease_names, channel, f.env, rng);
    for (const auto& turn : d.transcript.turns) {
      if (turn.kind == TurnKind::answer) {
        EXPECT_NE(turn.value, "confirmed");
      }
    }
  }
}

TEST(ScreeningDialogue, ShapeChecks) {
  Screening f;
  ExactChannel channel;
  Rng rng(1);
  RecordPatient patient(f.cohort.records[0], f.ontology);
  std::vector<std::string> two{"a", "b"};
  EXPECT_THROW(run_screening_dialogue(patient, f.policy, f.screener, f.ontology, two, channel,
                                      f.env, rng),
               ShapeError);
  auto narrow = constant_screener(3, 3, 0);
  EXPECT_THROW(run_screening_dialogue(patient, f.policy, narrow, f.ontology,
                                      f.cohort.disease_names, channel, f.env, rng),
               ShapeError);
}

struct HeartFailure {
  ProcedureGraph graph = testing::heart_failure_procedure();
  Ontology ontology = testing::cardiac_ontology();
  Cohort cohort;
  RandomPolicy policy;
  Mlp screener;
  ConsultationSetup setup;

  explicit HeartFailure(std::size_t favourite = 1) {
    LabeledCohortConfig cfg;
    cfg.size = 60;
    cohort = generate_labeled_cohort(graph, ontology, cfg);
    screener = constant_screener(3 * ontology.size(), 2, favourite);
    setup.ontology = &ontology;
    setup.policy = &policy;
    setup.screener = &screener;
    setup.disease_names = cohort.disease_names;
    setup.procedures.emplace(graph.disease, graph);
    setup.env.budget = 3;
  }
};

TEST(DifferentialDialogue, QuestionsMatchTrace) {
  HeartFailure f;
  ExactChannel channel;
  for (const auto& r : f.cohort.records) {
    auto d = run_differential_dialogue(r, f.graph, f.ontology, channel);
    EXPECT_EQ(d.transcript.count(TurnKind::question), d.trace.questions_asked());
    EXPECT_EQ(d.transcript.turns.size(), 2 * d.trace.questions_asked() + 1);
    EXPECT_EQ(d.trace.outcome, r.label == 1 ? Outcome::confirm : Outcome::exclude);
    EXPECT_TRUE(check_transcript(d.transcript).empty());
  }
}

TEST(FullConsultation, ConfirmsOrExcludesTopCandidate) {
  HeartFailure f;
  ExactChannel channel;
  for (const auto& r : f.cohort.records) {
    Rng rng(derive_seed(1, r.id));
    RecordPatient patient(r, f.ontology);
    auto c = run_full_consultation(patient, f.setup, channel, rng);
    ASSERT_EQ(c.result.attempts.size(), 1u);
    EXPECT_EQ(c.result.ranking.front(), "heart_failure");
    if (r.label == 1) {
      EXPECT_EQ(c.result.decision, FinalDecision::confirm);
      EXPECT_EQ(c.result.confirmed_disease, "heart_failure");
    } else {
      EXPECT_EQ(c.result.decision, FinalDecision::exclude_all);
    }
    EXPECT_EQ(c.transcript.count(TurnKind::diagnosis), 1u);
    EXPECT_EQ(c.transcript.count(TurnKind::conclusion), 1u);
    EXPECT_EQ(c.transcript.count(TurnKind::question),
              c.result.screening_questions + c.result.differential_questions());
    EXPECT_TRUE(check_transcript(c.transcript).empty());
  }
}

TEST(FullConsultation, ScreeningOnlyWithoutProcedure) {
  HeartFailure f(0);
  ExactChannel channel;
  Rng rng(1);
  RecordPatient patient(f.cohort.records[0], f.ontology);
  auto c = run_full_consultation(patient, f.setup, channel, rng);
  EXPECT_EQ(c.result.decision, FinalDecision::screening_only);
  EXPECT_TRUE(c.result.attempts.empty());
  EXPECT_EQ(c.result.skipped, (std::vector<std::string>{"not_heart_failure"}));
  EXPECT_EQ(c.transcript.turns.back().kind, TurnKind::diagnosis);
  EXPECT_TRUE(check_transcript(c.transcript).empty());

  f.setup.k_candidates = 2;
  Rng rng2(1);
  auto c2 = run_full_consultation(patient, f.setup, channel, rng2);
  EXPECT_EQ(c2.result.attempts.size(), 1u);
  EXPECT_EQ(c2.result.attempts[0].disease, "heart_failure");
}

TEST(FullConsultation, SetupValidation) {
  HeartFailure f;
  auto bad = f.setup;
  bad.k_candidates = 0;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = f.setup;
  bad.screener = nullptr;
  EXPECT_THROW(validate(bad), ContractViolation);
  bad = f.setup;
  bad.procedures.emplace("other", f.graph);
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(BatchRun, OrderAndParallelismIndependence) {
  HeartFailure f;
  auto noisy = noisy_channel_factory({0.1, 0.1, 4});
  auto serial = batch_run(f.cohort.records, f.setup, noisy, 1);
  auto threaded = batch_run(f.cohort.records, f.setup, noisy, 4);
  ASSERT_EQ(serial.consultations.size(), f.cohort.records.size());
  EXPECT_TRUE(serial.errors.empty());
  for (std::size_t i = 0; i < f.cohort.records.size(); ++i) {
    ASSERT_TRUE(serial.consultations[i].has_value());
    EXPECT_EQ(serial.consultations[i]->result.record_id, f.cohort.records[i].id);
    EXPECT_EQ(serial.consultations[i]->result, threaded.consultations[i]->result);
    EXPECT_EQ(serial.consultations[i]->transcript, threaded.consultations[i]->transcript);
  }
  auto reversed = f.cohort.records;
  std::reverse(reversed.begin(), reversed.end());
  auto back = batch_run(reversed, f.setup, noisy, 1);
  for (std::size_t i = 0; i < reversed.size(); ++i) {
    EXPECT_EQ(back.consultations[i]->result, serial.consultations[reversed.size() - 1 - i]->result);
  }
  EXPECT_TRUE(batch_run({}, f.setup, noisy, 2).consultations.empty());
}

TEST(BatchRun, CollectsPerRecordErrors) {
  HeartFailure f;
  auto records = f.cohort.records;
  std::fill(records[2].oracle_symptoms.begin(), records[2].oracle_symptoms.end(), 0);
  auto out = batch_run(records, f.setup, exact_channel_factory(), 1);
  ASSERT_EQ(out.errors.size(), 1u);
  EXPECT_EQ(out.errors[0].index, 2u);
  EXPECT_FALSE(out.consultations[2].has_value());
  EXPECT_TRUE(out.consultations[3].has_value());
}

TEST(Transcripts, SerializeRoundTrip) {
  HeartFailure f;
  auto out = batch_run(f.cohort.records, f.setup, exact_channel_factory(), 1);
  std::vector<Transcript> ts;
  for (const auto& c : out.consultations) ts.push_back(c->transcript);
  const auto text = serialize_transcripts(ts);
  auto back = parse_transcripts(text);
  EXPECT_EQ(back, ts);
  EXPECT_EQ(serialize_transcripts(back), text);
  EXPECT_THROW(parse_transcripts("{\"consultation\":\"x\"}\n"), FormatError);
  for (const auto& c : out.consultations) {
    EXPECT_EQ(parse_consultation_result(to_json_line(c->result)), c->result);
  }
}

TEST(Transcripts, CheckFindsProblems) {
  Transcript t;
  t.add(Speaker::doctor, TurnKind::question, Phase::screening, "a", "A?", "");
  t.add(Speaker::doctor, TurnKind::question, Phase::screening, "b", "B?", "");
  EXPECT_FALSE(check_transcript(t).empty());
  Transcript two;
  two.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, "d", "", "confirm");
  two.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, "d", "", "confirm");
  EXPECT_FALSE(check_transcript(two).empty());
  Transcript wrong_ref;
  wrong_ref.add(Speaker::doctor, TurnKind::question, Phase::differential, "a", "A?", "");
  wrong_ref.add(Speaker::patient, TurnKind::answer, Phase::differential, "b", "Yes.", "yes");
  wrong_ref.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, "d", "", "confirm");
  EXPECT_FALSE(check_transcript(wrong_ref).empty());
}

TEST(ConsolePatient, ReadsAnswers) {
  auto o = testing::small_ontology();
  std::istringstream in("sneezing\ncough\nmaybe\ny\n?\nn\n");
  std::ostringstream out;
  ConsolePatient p(in, out);
  Rng rng(1);
  EXPECT_EQ(p.disclose(o, rng).value, 1u);
  EXPECT_EQ(p.answer_symptom(SymptomId{0}, "Q"), SymptomState::confirmed);
  EXPECT_EQ(p.answer_symptom(SymptomId{0}, "Q"), SymptomState::unknown);
  EXPECT_FALSE(p.answer_node(DecisionNode{}, "Q"));
  EXPECT_THROW(p.answer_symptom(SymptomId{0}, "Q"), ChannelError);
  EXPECT_NE(out.str().find("Please"), std::string::npos);
}

}  // namespace
}  // namespace ddx
