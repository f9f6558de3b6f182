#include <doctest.h>

#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "chair/error.hpp"
#include "chair/vocab.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace chair;
using chair_test::fixture;

namespace {

CategorySet lexicon(const std::string& text) {
  std::istringstream in(text);
  return parse_synonym_lexicon(in, "test.txt");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

HierarchyNode leaf(std::string name) { return {std::move(name), {}}; }

// random vocabulary over a dozen names, so merges collide often
CategorySet random_vocab(std::mt19937_64& rng) {
  std::vector<std::string> names;
  for (int i = 0; i < 12; ++i) names.push_back("n" + std::to_string(i));
  std::vector<std::string> cats;
  for (const auto& n : names) {
    if (chair_test::coin(rng, 0.35)) cats.push_back(n);
  }
  if (cats.empty()) cats.push_back(names[chair_test::uniform(rng, 0, names.size() - 1)]);
  std::map<std::string, std::string> f2c;
  for (const auto& n : names) {
    if (std::find(cats.begin(), cats.end(), n) != cats.end()) continue;
    if (chair_test::coin(rng)) f2c[n] = chair_test::pick(rng, cats);
  }
  return CategorySet::create(cats, f2c, VocabSource::CocoSynonyms);
}

}  // namespace

TEST_SUITE("vocab") {

TEST_CASE("lexicon line maps synonyms to the coarse category") {
  auto v = lexicon("dog, puppy, chihuahua, poodle\n");
  CHECK(v.categories() == std::vector<std::string>{"dog"});
  CHECK(v.coarse_of("puppy") == "dog");
  CHECK(v.coarse_of("chihuahua") == "dog");
  CHECK(v.coarse_of("poodle") == "dog");
  CHECK(v.coarse_of("dog") == "dog");
  CHECK(v.source() == VocabSource::CocoSynonyms);
}

TEST_CASE("lone category maps to itself") {
  auto v = lexicon("dog\n");
  CHECK(v.size() == 1);
  CHECK(v.fine_to_coarse().size() == 1);
  CHECK(v.coarse_of("dog") == "dog");
}

TEST_CASE("comments, blank lines and case are normalized") {
  auto v = lexicon("# header\n\n  Hot   Dog , Frankfurter,  # trailing\nDINING table,table\n");
  CHECK(v.categories() == std::vector<std::string>{"hot dog", "dining table"});
  CHECK(v.coarse_of("frankfurter") == "hot dog");
  CHECK(v.coarse_of("table") == "dining table");
  CHECK_FALSE(v.coarse_of("Frankfurter"));
}

TEST_CASE("empty coarse name is a parse error with its line number") {
  try {
    lexicon("dog, puppy\n, kitten\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("test.txt:2") != std::string::npos);
  }
}

TEST_CASE("synonym under two categories is a conflict naming both") {
  try {
    lexicon("dog, puppy\ncat, puppy\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Conflict);
    const std::string msg = e.what();
    CHECK(msg.find("dog") != std::string::npos);
    CHECK(msg.find("cat") != std::string::npos);
  }
}

TEST_CASE("repeating a mapping to the same category is harmless") {
  auto v = lexicon("dog, puppy\ndog, pup, puppy\n");
  CHECK(v.size() == 1);
  CHECK(v.coarse_of("pup") == "dog");
}

TEST_CASE("bundled lexicon has 80 categories") {
  const auto& v = chair_test::coco_vocab();
  CHECK(v.size() == 80);
  for (const char* w : {"puppy", "chihuahua", "poodle"}) CHECK(v.coarse_of(w) == "dog");
  CHECK(v.contains_category("dining table"));
  CHECK(v.contains_category("hot dog"));
  CHECK(v.contains_category("person"));
}

TEST_CASE("missing lexicon file is an io error") {
  CHECK(code_of([] { load_synonym_lexicon("/nonexistent/lexicon.txt"); }) == ErrorCode::Io);
}

TEST_CASE("create rejects inconsistent vocabularies") {
  CHECK(code_of([] { CategorySet::create({"dog"}, {{"puppy", "cat"}}, VocabSource::Merged); }) ==
        ErrorCode::Structure);
  CHECK(code_of([] { CategorySet::create({"dog", "dog"}, {}, VocabSource::Merged); }) ==
        ErrorCode::Structure);
  CHECK(code_of([] { CategorySet::create({"Dog"}, {}, VocabSource::Merged); }) ==
        ErrorCode::Structure);
  CHECK(code_of([] {
          CategorySet::create({"dog", "cat"}, {{"dog", "cat"}}, VocabSource::Merged);
        }) == ErrorCode::Structure);
}

TEST_CASE("two-rule coarsening on the small fixture tree") {
  auto tree = load_hierarchy(fixture("hierarchy/simple.json"));
  auto built = build_coarse_categories(tree);
  CHECK(as_set(built.vocab.categories()) == std::set<std::string>{"animal", "fork"});
  CHECK(built.vocab.coarse_of("dog") == "animal");
  CHECK(built.vocab.coarse_of("cat") == "animal");
  CHECK(built.vocab.coarse_of("fork") == "fork");
  CHECK(built.vocab.coarse_of("animal") == "animal");
  CHECK_FALSE(built.vocab.coarse_of("entity"));
  CHECK(built.warnings.empty());
  CHECK(built.vocab.source() == VocabSource::OpenImagesHierarchy);
}

TEST_CASE("flat hierarchy keeps every class") {
  HierarchyNode root{"entity", {leaf("a"), leaf("b"), leaf("c")}};
  auto built = build_coarse_categories(root);
  CHECK(built.vocab.categories() == std::vector<std::string>{"a", "b", "c"});
  for (const char* n : {"a", "b", "c"}) CHECK(built.vocab.coarse_of(n) == n);
}

TEST_CASE("root with no children yields an empty vocabulary") {
  auto built = build_coarse_categories(leaf("entity"));
  CHECK(built.vocab.empty());
}

TEST_CASE("class that is its own ancestor is a structure error") {
  HierarchyNode loop{"entity", {{"a", {{"b", {leaf("a")}}}}}};
  CHECK(code_of([&] { build_coarse_categories(loop); }) == ErrorCode::Structure);
  HierarchyNode back_to_root{"entity", {{"a", {leaf("entity")}}}};
  CHECK(code_of([&] { build_coarse_categories(back_to_root); }) == ErrorCode::Structure);
}

TEST_CASE("class first seen at top level but not isolated is an orphan") {
  HierarchyNode root{"entity", {leaf("x"), {"a", {leaf("x"), leaf("y")}}}};
  try {
    build_coarse_categories(root);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Mapping);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("label-name hierarchy with descriptions, parts and a repeated class") {
  auto tree = load_hierarchy(fixture("hierarchy/oi_shape.json"),
                             fixture("hierarchy/oi_shape_descriptions.csv"));
  auto built = build_coarse_categories(tree);
  CHECK(built.vocab.categories() ==
        std::vector<std::string>{"animal", "mammal", "camera", "food", "fruit"});
  CHECK(built.vocab.coarse_of("dog") == "animal");
  CHECK(built.vocab.coarse_of("horse") == "mammal");
  CHECK(built.vocab.coarse_of("tomato") == "food");
  CHECK(built.vocab.coarse_of("cake") == "food");
  CHECK_FALSE(built.vocab.coarse_of("human face"));
  REQUIRE(built.warnings.size() == 1);
  CHECK(built.warnings[0].find("tomato") != std::string::npos);
}

TEST_CASE("label-name hierarchy without descriptions keeps the label ids") {
  auto tree = load_hierarchy(fixture("hierarchy/oi_shape.json"));
  auto built = build_coarse_categories(tree);
  CHECK(built.vocab.contains_category("/m/0jbk"));
  CHECK(built.vocab.coarse_of("/m/0bt9lr") == "/m/0jbk");
}

TEST_CASE("coarsening matches the brute-force tree walk on random trees") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 500; ++trial) {
    auto tree = chair_test::random_tree(rng, 50);
    auto built = build_coarse_categories(tree.to_node());
    auto expected = chair_test::oracle::coarsen(tree);
    REQUIRE(as_set(built.vocab.categories()) == expected.categories);
    REQUIRE(built.vocab.fine_to_coarse() == expected.fine_to_coarse);
    REQUIRE(built.warnings.empty());
  }
}

TEST_CASE("coarse mapping is idempotent") {
  std::mt19937_64 rng(7);
  std::vector<CategorySet> vocabs = {chair_test::coco_vocab()};
  for (int i = 0; i < 50; ++i) {
    vocabs.push_back(build_coarse_categories(chair_test::random_tree(rng).to_node()).vocab);
  }
  for (const auto& v : vocabs) {
    for (const auto& [fine, coarse] : v.fine_to_coarse()) {
      REQUIRE(v.coarse_of(coarse) == coarse);
    }
  }
}

TEST_CASE("merge with an empty vocabulary is the identity") {
  const auto& x = chair_test::coco_vocab();
  auto m = merge(x, CategorySet{});
  CHECK(m.vocab.categories() == x.categories());
  CHECK(m.vocab.fine_to_coarse() == x.fine_to_coarse());
  CHECK(m.vocab.source() == VocabSource::Merged);
  CHECK(m.warnings.empty());
  auto m2 = merge(CategorySet{}, x);
  CHECK(m2.vocab.categories() == x.categories());
  CHECK(m2.vocab.fine_to_coarse() == x.fine_to_coarse());
}

TEST_CASE("merge conflict keeps the left mapping and warns once") {
  auto a = CategorySet::create({"dog"}, {}, VocabSource::CocoSynonyms);
  auto b = CategorySet::create({"animal"}, {{"dog", "animal"}}, VocabSource::OpenImagesHierarchy);
  auto m = merge(a, b);
  CHECK(m.vocab.coarse_of("dog") == "dog");
  CHECK(m.vocab.coarse_of("animal") == "animal");
  CHECK(m.warnings.size() == 1);
}

TEST_CASE("right category mapped elsewhere by the left is folded") {
  auto a = CategorySet::create({"person"}, {{"man", "person"}}, VocabSource::CocoSynonyms);
  auto b = CategorySet::create({"man"}, {{"boy", "man"}}, VocabSource::OpenImagesHierarchy);
  auto m = merge(a, b);
  CHECK(m.vocab.categories() == std::vector<std::string>{"person"});
  CHECK(m.vocab.coarse_of("boy") == "person");
  CHECK(m.warnings.size() == 1);
}

TEST_CASE("merged size is bounded by the sum") {
  auto oi = build_coarse_categories(load_hierarchy(fixture("hierarchy/oi_shape.json"),
                                                   fixture("hierarchy/oi_shape_descriptions.csv")));
  auto m = merge(chair_test::coco_vocab(), oi.vocab);
  CHECK(m.vocab.size() <= chair_test::coco_vocab().size() + oi.vocab.size());
  CHECK(m.vocab.coarse_of("puppy") == "dog");
  CHECK(m.vocab.coarse_of("mammal") == "mammal");
}

TEST_CASE("merge is associative on category sets") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    auto a = random_vocab(rng), b = random_vocab(rng), c = random_vocab(rng);
    auto left = merge(merge(a, b).vocab, c).vocab;
    auto right = merge(a, merge(b, c).vocab).vocab;
    REQUIRE(as_set(left.categories()) == as_set(right.categories()));
  }
}

TEST_CASE("vocabulary JSON round trip") {
  const auto& v = chair_test::coco_vocab();
  auto back = category_set_from_json(to_json(v));
  CHECK(back == v);
  auto j = to_json(v);
  CHECK(j["source"] == "coco_synonyms");
  CHECK(j["categories"].size() == 80);
  CHECK(j["fine_to_coarse"]["puppy"] == "dog");

  auto simple = build_coarse_categories(load_hierarchy(fixture("hierarchy/simple.json"))).vocab;
  CHECK(category_set_from_json(to_json(simple)) == simple);
}

TEST_CASE("malformed vocabulary JSON") {
  CHECK(code_of([] { category_set_from_json(nlohmann::json::array()); }) == ErrorCode::Format);
  CHECK(code_of([] {
          category_set_from_json({{"categories", {"dog"}}, {"fine_to_coarse", {{"puppy", "cat"}}}});
        }) == ErrorCode::Structure);
}

}  // TEST_SUITE
