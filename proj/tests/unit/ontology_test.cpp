#include <gtest/gtest.h>

#include <set>
#include <string>

#include "ddx/error.hpp"
#include "ddx/ontology.hpp"
#include "oracles.hpp"

namespace ddx {
namespace {

TEST(Ontology, SingleFirstLayerNode) {
  auto o = parse_ontology("1\tfever\t-\n");
  EXPECT_EQ(o.first_layer_count(), 1u);
  EXPECT_EQ(o.size(), 1u);
}

TEST(Ontology, ReferenceScaleCounts) {
  std::string text = "# layer\tname\tparent\n";
  for (int i = 0; i < 28; ++i) text += "1\tcat" + std::to_string(i) + "\t-\n";
  for (int c = 0; c < 689; ++c) {
    text += "2\tsym" + std::to_string(c) + "\tcat" + std::to_string(c % 28) + "\n";
  }
  auto o = parse_ontology(text);
  EXPECT_EQ(o.first_layer_count(), 28u);
  EXPECT_EQ(o.size(), 717u);
}

TEST(Ontology, MissingParentIsRejected) {
  EXPECT_THROW(parse_ontology("1\tfever\t-\n2\tchills\tcough\n"), ValidationError);
}

TEST(Ontology, ChildBeforeParentIsRejected) {
  EXPECT_THROW(parse_ontology("2\tchills\tfever\n1\tfever\t-\n"), ValidationError);
}

TEST(Ontology, DuplicateNameIsRejected) {
  EXPECT_THROW(parse_ontology("1\tfever\t-\n1\tfever\t-\n"), ValidationError);
}

TEST(Ontology, SecondLayerCannotHaveChildren) {
  EXPECT_THROW(parse_ontology("1\tfever\t-\n2\tchills\tfever\n2\tshaking\tchills\n"),
               ValidationError);
}

TEST(Ontology, MalformedLineIsFormatError) {
  EXPECT_THROW(parse_ontology("1 fever -\n"), FormatError);
  EXPECT_THROW(parse_ontology("3\tfever\t-\n"), FormatError);
}

TEST(Ontology, IndicesAreFirstLayerFirstInFileOrder) {
  auto o = parse_ontology("1\ta\t-\n2\ta1\ta\n1\tb\t-\n2\tb1\tb\n2\ta2\ta\n");
  ASSERT_EQ(o.size(), 5u);
  EXPECT_EQ(o.node(SymptomId{0}).name, "a");
  EXPECT_EQ(o.node(SymptomId{1}).name, "b");
  EXPECT_EQ(o.node(SymptomId{2}).name, "a1");
  EXPECT_EQ(o.node(SymptomId{3}).name, "b1");
  EXPECT_EQ(o.node(SymptomId{4}).name, "a2");
}

TEST(Ontology, GeneratedCounts) {
  auto o = generate_synthetic_ontology(10, 5, 7);
  EXPECT_EQ(o.first_layer_count(), 10u);
  EXPECT_EQ(o.size(), 60u);
  auto tiny = generate_synthetic_ontology(1, 0, 0);
  EXPECT_EQ(tiny.first_layer_count(), 1u);
  EXPECT_EQ(tiny.size(), 1u);
}

TEST(Ontology, GeneratorIsDeterministicWithUniqueNames) {
  auto a = generate_synthetic_ontology(6, 4, 3);
  auto b = generate_synthetic_ontology(6, 4, 3);
  EXPECT_EQ(a, b);
  std::set<std::string> names;
  for (const auto& n : a.nodes()) names.insert(n.name);
  EXPECT_EQ(names.size(), a.size());
  EXPECT_EQ(a.node(SymptomId{0}).name, "cat0");
  EXPECT_EQ(a.node(SymptomId{6}).name, "sym0.0");
}

TEST(Ontology, ParentAndChildLinks) {
  auto o = testing::small_ontology();
  for (std::size_t j = 0; j < o.size(); ++j) {
    const SymptomId id{j};
    const auto parent = o.parent_of(id);
    if (o.is_first_layer(id)) {
      EXPECT_FALSE(parent.has_value());
      EXPECT_FALSE(o.children_of(id).empty());
    } else {
      ASSERT_TRUE(parent.has_value());
      EXPECT_TRUE(o.is_first_layer(*parent));
      EXPECT_TRUE(o.children_of(id).empty());
      const auto kids = o.children_of(*parent);
      EXPECT_NE(std::find(kids.begin(), kids.end(), id), kids.end());
    }
  }
}

TEST(Ontology, OutOfRangeIdThrows) {
  auto o = testing::small_ontology();
  EXPECT_THROW(o.parent_of(SymptomId{8}), ContractViolation);
  EXPECT_THROW(o.children_of(SymptomId{100}), ContractViolation);
}

TEST(Ontology, IdsAreDense) {
  auto o = generate_synthetic_ontology(4, 3, 1);
  for (std::size_t j = 0; j < o.size(); ++j) EXPECT_EQ(o.nodes()[j].id.value, j);
}

TEST(Ontology, SerializeRoundTrip) {
  for (auto o : {testing::small_ontology(), generate_synthetic_ontology(5, 2, 1),
                 testing::cardiac_ontology()}) {
    EXPECT_EQ(parse_ontology(serialize_ontology(o)), o);
  }
}

TEST(Ontology, FindByName) {
  auto o = testing::small_ontology();
  ASSERT_TRUE(o.find("chills").has_value());
  EXPECT_EQ(o.node(*o.find("chills")).name, "chills");
  EXPECT_FALSE(o.find("nausea").has_value());
}

}  // namespace
}  // namespace ddx
