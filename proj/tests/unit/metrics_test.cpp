#include <gtest/gtest.h>

#include <algorithm>
#include <memory>

#include "ddx/channel.hpp"
#include "ddx/error.hpp"
#include "ddx/metrics.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

// std::vector<bool> has no contiguous storage to span over.
struct Flags {
  std::unique_ptr<bool[]> data;
  std::size_t size = 0;

  void push_back(bool b) {
    auto grown = std::make_unique<bool[]>(size + 1);
    std::copy(data.get(), data.get() + size, grown.get());
    grown[size++] = b;
    data = std::move(grown);
  }
  std::span<const bool> span() const { return {data.get(), size}; }
};

Flags flags(std::initializer_list<int> v) {
  Flags f;
  for (int x : v) f.push_back(x != 0);
  return f;
}

TEST(DifferentialMetrics, WorkedExample) {
  std::vector<Outcome> outcomes{Outcome::confirm, Outcome::confirm, Outcome::exclude,
                                Outcome::exclude};
  auto labels = flags({1, 0, 0, 0});
  auto m = differential_metrics(outcomes, labels.span());
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 0u);
  EXPECT_EQ(m.tn, 2u);
  EXPECT_DOUBLE_EQ(*m.precision, 0.5);
  EXPECT_DOUBLE_EQ(*m.recall, 1.0);
  EXPECT_DOUBLE_EQ(*m.f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.success_rate, 1.0);
}

TEST(DifferentialMetrics, FailureCountsAsNegative) {
  std::vector<Outcome> outcomes{Outcome::failure, Outcome::failure};
  auto labels = flags({1, 0});
  auto m = differential_metrics(outcomes, labels.span());
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_EQ(m.failures, 2u);
  EXPECT_EQ(m.success_rate, 0.0);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_FALSE(m.precision.has_value());
  EXPECT_EQ(*m.recall, 0.0);
  EXPECT_FALSE(m.f1.has_value());
  EXPECT_NE(to_json_line(m, "x").find("\"f1\":\"NA\""), std::string::npos);
}

TEST(DifferentialMetrics, Errors) {
  std::vector<Outcome> none;
  EXPECT_THROW(differential_metrics(none, {}), ContractViolation);
  std::vector<Outcome> one{Outcome::confirm};
  auto two = flags({1, 0});
  EXPECT_THROW(differential_metrics(one, two.span()), ShapeError);
}

TEST(DifferentialMetrics, MatchesIndependentRecount) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(50);
    std::vector<Outcome> outcomes;
    std::vector<bool> labels;
    Flags raw;
    for (std::size_t i = 0; i < n; ++i) {
      outcomes.push_back(static_cast<Outcome>(rng.index(3)));
      labels.push_back(rng.bernoulli(0.5));
      raw.push_back(labels.back());
    }
    const auto m = differential_metrics(outcomes, raw.span());
    const auto r = testing::recount(outcomes, labels);
    ASSERT_EQ(m.tp, r.tp);
    ASSERT_EQ(m.fp, r.fp);
    ASSERT_EQ(m.tn, r.tn);
    ASSERT_EQ(m.fn, r.fn);
    ASSERT_EQ(m.failures, r.failures);
    ASSERT_EQ(m.total(), n);
    EXPECT_DOUBLE_EQ(m.accuracy, double(r.tp + r.tn) / n);
    if (m.f1) {
      EXPECT_GE(*m.f1, std::min(*m.precision, *m.recall) - 1e-12);
      EXPECT_LE(*m.f1, std::max(*m.precision, *m.recall) + 1e-12);
    }
  }
}

Transcript differential(const std::string& id, std::vector<std::pair<std::string, bool>> path,
                        Outcome outcome) {
  Transcript t;
  t.consultation_id = id;
  t.record_id = id;
  for (const auto& [node, answer] : path) {
    t.add(Speaker::doctor, TurnKind::question, Phase::differential, node, node + "?", "");
    t.add(Speaker::patient, TurnKind::answer, Phase::differential, node, "...",
          answer ? "yes" : "no");
  }
  t.add(Speaker::doctor, TurnKind::diagnosis, Phase::differential, "d", "", to_string(outcome));
  return t;
}

TEST(ErrorReport, EmptyWhenAllCorrect) {
  std::vector<Transcript> ts{differential("a", {{"n1", true}}, Outcome::confirm),
                             differential("b", {{"n1", false}}, Outcome::exclude)};
  auto labels = flags({1, 0});
  auto r = build_error_report(ts, labels.span());
  EXPECT_EQ(r.total(), 0u);
  EXPECT_TRUE(r.groups.empty());
  EXPECT_NE(render(r).find("errors: 0"), std::string::npos);
}

TEST(ErrorReport, GroupsByExitEdge) {
  std::vector<Transcript> ts{
      differential("a", {{"n1", true}, {"n2", false}}, Outcome::exclude),
      differential("b", {{"n1", true}, {"n2", false}}, Outcome::exclude),
      differential("c", {{"n1", true}, {"n3", true}}, Outcome::confirm),
      differential("d", {}, Outcome::failure),
      differential("e", {{"n1", false}}, Outcome::exclude),
  };
  auto labels = flags({1, 1, 0, 1, 0});
  auto r = build_error_report(ts, labels.span());
  EXPECT_EQ(r.total(), 4u);
  EXPECT_EQ(r.false_negatives, 3u);
  EXPECT_EQ(r.false_positives, 1u);
  ASSERT_EQ(r.groups.size(), 3u);
  EXPECT_EQ(r.groups[0].count, 2u);
  EXPECT_EQ(r.groups[0].last_node, "n2");
  EXPECT_EQ(r.groups[0].edge, "no");
  EXPECT_EQ(r.node_counts.at("n1"), 3u);
  EXPECT_EQ(r.cases[3].outcome, Outcome::failure);
  EXPECT_TRUE(r.cases[3].path.empty());
  EXPECT_NE(render(r).find("(no question)"), std::string::npos);
}

TEST(ErrorReport, ReconcilesWithMetricsOnRealRuns) {
  auto g = testing::heart_failure_procedure();
  auto o = testing::cardiac_ontology();
  LabeledCohortConfig cfg;
  auto cohort = generate_labeled_cohort(g, o, cfg);
  NoisyChannel channel({0.15, 0.15, 5});
  std::vector<Transcript> ts;
  std::vector<Outcome> outcomes;
  Flags labels;
  for (const auto& r : cohort.records) {
    auto d = run_differential_dialogue(r, g, o, channel);
    EXPECT_TRUE(check_transcript(d.transcript).empty());
    EXPECT_EQ(transcript_outcome(d.transcript), d.trace.outcome);
    outcomes.push_back(d.trace.outcome);
    ts.push_back(std::move(d.transcript));
    labels.push_back(r.label == 1);
  }
  auto m = differential_metrics(outcomes, labels.span());
  auto report = build_error_report(ts, labels.span());
  EXPECT_EQ(report.false_negatives, m.fn);
  EXPECT_EQ(report.false_positives, m.fp);
  std::size_t grouped = 0;
  for (const auto& grp : report.groups) grouped += grp.count;
  EXPECT_EQ(grouped, report.total());
}

TEST(MetricsTable, RendersEveryField) {
  DifferentialMetrics m;
  m.tp = 3;
  m.tn = 1;
  m.accuracy = 1.0;
  m.success_rate = 1.0;
  m.precision = 1.0;
  const std::string line = to_json_line(m, "hf");
  const auto table = render_metrics_table(line + "\n");
  for (const char* key : {"label", "cases", "success_rate", "accuracy", "precision", "recall",
                          "f1", "tp", "fp", "tn", "fn", "failures"}) {
    EXPECT_NE(table.find(key), std::string::npos) << key;
  }
  EXPECT_NE(table.find("NA"), std::string::npos);
  EXPECT_THROW(render_metrics_table("{oops"), FormatError);
}

}  // namespace
}  // namespace ddx
