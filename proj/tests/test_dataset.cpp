#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "irispad/dataset.hpp"
#include "irispad/error.hpp"
#include "test_support.hpp"

using namespace irispad;

namespace {

std::vector<SampleRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "/data", {.check_paths = false});
}

ErrorKind error_kind(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

// A manifest shaped like the published dataset summary.
std::vector<SampleRecord> table_shaped_manifest() {
  struct Row {
    PaiClass pai;
    int train, val, test;
  };
  const Row rows[] = {{PaiClass::BonaFide, 6694, 1062, 5773},
                      {PaiClass::Cadaver, 448, 531, 754},
                      {PaiClass::ContactLens, 3583, 900, 3244},
                      {PaiClass::Printed, 4090, 1896, 2305}};
  std::vector<SampleRecord> out;
  for (const auto& row : rows) {
    const std::pair<Split, int> parts[] = {
        {Split::Train, row.train}, {Split::Val, row.val}, {Split::Test, row.test}};
    for (auto [split, n] : parts) {
      for (int i = 0; i < n; ++i) {
        out.push_back({std::string(to_string(row.pai)) + "_" + std::string(to_string(split)) +
                           "_" + std::to_string(i),
                       "x.png", row.pai, "s", split});
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("load_manifest happy path") {
  const auto records = parse(
      "id,path,pai,sensor,split\n"
      "a,img/a.png,bonafide,LG4000,train\n"
      "b,/abs/b.png,contact,AD100,val\n"
      "c,img/c.pgm,cadaver,IriTech,test\n");
  REQUIRE(records.size() == 3);
  CHECK(records[0].path == std::filesystem::path("/data/img/a.png"));
  CHECK(records[1].path == std::filesystem::path("/abs/b.png"));
  CHECK(records[1].pai == PaiClass::ContactLens);
  CHECK(records[2].split == Split::Test);
  CHECK(records[2].sensor == "IriTech");
}

TEST_CASE("load_manifest rejects bad input") {
  CHECK(error_kind("id,path,pai,sensor,split\na,x,bonafide,s,train\na,y,printed,s,test\n") ==
        ErrorKind::duplicate_id);
  try {
    parse("id,path,pai,sensor,split\ndup,x,bonafide,s,train\ndup,y,printed,s,test\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("dup") != std::string::npos);
  }
  CHECK(error_kind("id,path,pai,sensor,split\na,x,alien,s,train\n") == ErrorKind::unknown_class);
  CHECK(error_kind("id,path,class,sensor,split\n") == ErrorKind::parse);
  CHECK(error_kind("id,path,pai,sensor,split\na,x,bonafide,train\n") == ErrorKind::parse);
  CHECK(error_kind("id,path,pai,sensor,split\na,x,bonafide,s,holdout\n") == ErrorKind::parse);
  try {
    parse("id,path,pai,sensor,split\na,x,bonafide,s,train\nb,x,bonafide,s\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("manifest save/load keeps records and checks paths") {
  const auto dir = irispad::test::scratch_dir("dataset_manifest");
  std::filesystem::create_directories(dir / "train" / "bonafide");
  std::ofstream(dir / "train" / "bonafide" / "a.png") << "x";
  std::vector<SampleRecord> records = {
      {"a", dir / "train" / "bonafide" / "a.png", PaiClass::BonaFide, "synthetic", Split::Train}};
  save_manifest(dir / "manifest.csv", records);
  CHECK(load_manifest(dir / "manifest.csv") == records);

  std::ifstream in(dir / "manifest.csv");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == "id,path,pai,sensor,split\na,train/bonafide/a.png,bonafide,synthetic,train\n");

  records.push_back({"b", dir / "nope.png", PaiClass::Printed, "synthetic", Split::Test});
  save_manifest(dir / "broken.csv", records);
  CHECK_THROWS_AS(load_manifest(dir / "broken.csv"), Error);
}

TEST_CASE("class_weights") {
  for (const auto& [label, w] : class_weights({{0, 25}, {1, 25}, {2, 25}, {3, 25}})) {
    CHECK(w == 1.0);
  }
  const auto w = class_weights({{0, 20}, {1, 40}, {2, 60}});
  CHECK(w.at(0) == 2.0);
  CHECK(w.at(1) == 1.0);
  CHECK(w.at(2) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(class_weight_fractions({{0, 20}, {1, 40}, {2, 60}}).at(2) == Fraction(2, 3));

  CHECK_THROWS_AS(class_weights({{0, 10}, {1, 0}}), Error);
  CHECK_THROWS_AS(class_weights({}), Error);
}

TEST_CASE("published class weights as a fixture") {
  // Cadaver, Live, Pattern, Printed as printed in the source; the counts that
  // produced them are not published, so only their format is checked.
  const double published[] = {4.4162, 0.5787, 1.0133, 0.9443};
  for (double w : published) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.4f", w);
    CHECK(std::stod(buf) == w);
  }
  // the rarest class carries the largest weight
  CHECK(published[0] > published[2]);
  CHECK(published[2] > published[3]);
  CHECK(published[3] > published[1]);
}

TEST_CASE("class weight identity holds exactly") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    LabelCounts counts;
    const int n_classes = 2 + static_cast<int>(gen() % 5);
    std::size_t total = 0;
    for (int c = 0; c < n_classes; ++c) {
      counts[c] = 1 + gen() % 10000;
      total += counts[c];
    }
    Fraction sum;
    for (const auto& [label, w] : class_weight_fractions(counts)) {
      sum = sum + w * Fraction(static_cast<Fraction::Int>(counts[label]));
    }
    CHECK(sum == Fraction(static_cast<Fraction::Int>(total)));
  }
}

TEST_CASE("groupings") {
  const auto two = make_grouping(Protocol::two_class);
  CHECK(two.label_of(PaiClass::Cadaver) == 1);
  CHECK(two.label_of(PaiClass::BonaFide) == 0);

  const auto four = make_grouping(Protocol::four_class);
  CHECK(four.label_of(PaiClass::Cadaver) == 3);
  CHECK(four.label_of(PaiClass::ElectronicDisplay) == 2);
  CHECK(four.representative(2) == PaiClass::Printed);

  for (auto protocol : {Protocol::two_class, Protocol::three_class, Protocol::four_class}) {
    const auto g = make_grouping(protocol);
    std::set<int> used;
    for (auto pai : kAllPaiClasses) {
      REQUIRE(g.label_of(pai).has_value());
      used.insert(*g.label_of(pai));
    }
    CHECK(static_cast<int>(used.size()) == g.n_classes);
    CHECK(*used.begin() == 0);
    CHECK(*used.rbegin() == g.n_classes - 1);
    CHECK(g.bona_fide_label() == 0);
    CHECK(static_cast<int>(g.label_names.size()) == g.n_classes);
  }
}

TEST_CASE("compact_grouping drops empty labels") {
  const auto four = make_grouping(Protocol::four_class);
  const auto g = compact_grouping(four, {{0, 10}, {1, 0}, {2, 5}, {3, 7}});
  CHECK(g.n_classes == 3);
  CHECK(g.label_of(PaiClass::ContactLens) == std::nullopt);
  CHECK(g.label_of(PaiClass::Printed) == 1);
  CHECK(g.label_of(PaiClass::Cadaver) == 2);
  CHECK(g.label_names == std::vector<std::string>{"bonafide", "printed", "cadaver"});
}

TEST_CASE("leave-one-out splits") {
  const auto records = table_shaped_manifest();
  // per-split row counts; their sums differ from the printed totals
  REQUIRE(records.size() == 31280u);

  const auto contact = leave_one_out_splits(records, PaiClass::ContactLens);
  for (const auto& r : contact.train) CHECK(r.pai != PaiClass::ContactLens);
  for (const auto& r : contact.val) CHECK(r.pai != PaiClass::ContactLens);

  const auto cadaver = leave_one_out_splits(records, PaiClass::Cadaver);
  CHECK(cadaver.unknown_test.size() == (448u + 531u + 754u) + 5773u);
  CHECK(cadaver.train.size() == 6694u + 3583u + 4090u);

  CHECK_THROWS_AS(leave_one_out_splits(records, PaiClass::BonaFide), Error);
  CHECK_THROWS_AS(leave_one_out_splits(records, PaiClass::Prosthetic), Error);
}

TEST_CASE("splits partition the manifest") {
  const auto records = table_shaped_manifest();
  const auto train = filter_split(records, Split::Train);
  const auto val = filter_split(records, Split::Val);
  const auto test = filter_split(records, Split::Test);
  CHECK(train.size() + val.size() + test.size() == records.size());
  CHECK(train.size() == 6694u + 448u + 3583u + 4090u);
  CHECK(val.size() == 1062u + 531u + 900u + 1896u);
  CHECK(test.size() == 5773u + 754u + 3244u + 2305u);
}
