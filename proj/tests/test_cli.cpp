#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "chair/cli.hpp"
#include "test_support.hpp"

using chair_test::fixture;
using chair_test::TempDir;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = chair::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::vector<std::string> coco_score_args() {
  return {"score",
          "--dataset", "coco",
          "--annotations", fixture("three_image/captions.json").string(),
          "--split-file", fixture("three_image/split.json").string(),
          "--instances", fixture("three_image/instances.json").string(),
          "--predictions", fixture("three_image/predictions.json").string()};
}

template <class... T>
std::vector<std::string> plus(std::vector<std::string> v, T... extra) {
  (v.push_back(extra), ...);
  return v;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("score on the coco fixture") {
  auto r = run(coco_score_args());
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["chair_i"].get<double>() == doctest::Approx(20.0));
  CHECK(j["chair_s"].get<double>() == doctest::Approx(33.3));
  CHECK(j["metadata"]["tool"] == "chair-tool");
  CHECK(j["per_image"].size() == 3);
  CHECK(r.err.find("warning") == std::string::npos);
}

TEST_CASE("score without instances warns and uses references") {
  auto args = coco_score_args();
  args.erase(args.begin() + 7, args.begin() + 9);
  auto r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning:") != std::string::npos);
  CHECK(json::parse(r.out)["chair_i"].get<double>() == doctest::Approx(20.0));
}

TEST_CASE("score on generic records, csv and output file") {
  TempDir dir;
  auto out = dir.file("report.csv");
  auto r = run({"score", "--dataset", "generic", "--annotations",
                fixture("three_image/records.json").string(), "--format", "csv", "-o", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  auto csv = chair_test::slurp(out);
  CHECK(csv.find("20.0") != std::string::npos);
  CHECK(csv.find("33.3") != std::string::npos);
}

TEST_CASE("score output is byte-identical across runs and worker counts") {
  auto a = run(plus(coco_score_args(), "--workers", "1"));
  auto b = run(plus(coco_score_args(), "--workers", "4"));
  auto c = run(coco_score_args());
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
}

TEST_CASE("missing predictions and allow-missing") {
  TempDir dir;
  auto preds = dir.write("p.json", R"([{"image_id": 1, "caption": "a dog catches a frisbee"}])");
  auto args = coco_score_args();
  args.back() = preds.string();
  auto r = run(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("\nerror: missing_predictions: 2 record(s)") != std::string::npos);
  auto ok = run(plus(args, "--allow-missing"));
  REQUIRE(ok.code == 0);
  auto j = json::parse(ok.out);
  CHECK(j["n_skipped"] == 2);
  CHECK(j["chair_s"].get<double>() == doctest::Approx(100.0));
}

TEST_CASE("prediction for an unknown image is an integrity error") {
  TempDir dir;
  auto preds = dir.write("p.json", R"([{"image_id": 1, "caption": "a"}, {"image_id": 77, "caption": "b"},
                                       {"image_id": 2, "caption": "c"}, {"image_id": 3, "caption": "d"}])");
  auto args = coco_score_args();
  args.back() = preds.string();
  auto r = run(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("integrity_error") != std::string::npos);
  CHECK(r.err.find("77") != std::string::npos);
}

TEST_CASE("exit codes and single-line errors") {
  auto unknown = run({"score", "--bogus"});
  CHECK(unknown.code == 1);
  CHECK(first_line(unknown.err).rfind("error: usage_error:", 0) == 0);

  CHECK(run({}).code == 1);

  auto io = run({"score", "--dataset", "generic", "--annotations", "/nonexistent/records.json"});
  CHECK(io.code == 2);
  CHECK(io.err.rfind("error: io_error:", 0) == 0);
  CHECK(std::count(io.err.begin(), io.err.end(), '\n') == 1);

  TempDir dir;
  auto broken = dir.write("broken.json", "[{");
  auto parse = run({"score", "--dataset", "generic", "--annotations", broken.string()});
  CHECK(parse.code == 1);
  CHECK(parse.err.rfind("error: parse_error:", 0) == 0);

  auto cfg = run({"score", "--dataset", "coco"});
  CHECK(cfg.code == 1);
  CHECK(cfg.err.rfind("error: config_error:", 0) == 0);

  auto version = run({"--version"});
  CHECK(version.code == 0);
  CHECK(version.out.find(chair::cli::kVersion) != std::string::npos);
}

TEST_CASE("compare two report files") {
  auto r = run({"compare", "--baseline", fixture("reports/baseline.json").string(), "--candidate",
                fixture("reports/candidate.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("relative CHAIR_s reduction: 17.4%") != std::string::npos);
  auto j = json::parse(r.out);
  CHECK(j["relative_reduction_chair_s"].get<double>() == doctest::Approx(17.4));
  CHECK(j["delta_chair_s"].get<double>() == doctest::Approx(-1.9));
}

TEST_CASE("compare two prediction files") {
  auto args = coco_score_args();
  args[0] = "compare";
  args.pop_back();
  args.pop_back();
  args = plus(args, "--baseline-predictions", fixture("three_image/predictions.json").string(),
              "--candidate-predictions", fixture("three_image/predictions_faithful.json").string());
  auto r = run(args);
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["relative_reduction_chair_s"].get<double>() == doctest::Approx(100.0));
  CHECK(j.contains("fewer_objects_per_caption"));
  CHECK(r.err.find("relative CHAIR_s reduction: 100.0%") != std::string::npos);
}

TEST_CASE("compare needs inputs") {
  CHECK(run({"compare", "--baseline", fixture("reports/baseline.json").string()}).code == 1);
}

TEST_CASE("build-vocab from the lexicon and from a hierarchy") {
  auto lex = run({"build-vocab", "--synonyms", (chair_test::data_dir() / "coco_synonyms.txt").string()});
  REQUIRE(lex.code == 0);
  CHECK(lex.err.find("80 categories") != std::string::npos);
  auto j = json::parse(lex.out);
  CHECK(j["categories"].size() == 80);
  CHECK(j["fine_to_coarse"]["poodle"] == "dog");

  auto tree = run({"build-vocab", "--hierarchy", fixture("hierarchy/simple.json").string()});
  REQUIRE(tree.code == 0);
  CHECK(tree.err.find("2 categories") != std::string::npos);

  auto both = run({"build-vocab", "--synonyms", (chair_test::data_dir() / "coco_synonyms.txt").string(),
                   "--hierarchy", fixture("hierarchy/oi_shape.json").string(),
                   "--class-descriptions", fixture("hierarchy/oi_shape_descriptions.csv").string()});
  REQUIRE(both.code == 0);
  CHECK(json::parse(both.out)["source"] == "merged");

  CHECK(run({"build-vocab"}).code == 1);
}

TEST_CASE("vocabulary JSON feeds back into scoring") {
  TempDir dir;
  auto vocab = dir.file("vocab.json");
  REQUIRE(run({"build-vocab", "--synonyms", (chair_test::data_dir() / "coco_synonyms.txt").string(), "-o",
               vocab.string()}).code == 0);
  auto r = run(plus(coco_score_args(), "--vocab", vocab.string()));
  REQUIRE(r.code == 0);
  CHECK(r.out == run(coco_score_args()).out);
}

TEST_CASE("extract-objects") {
  auto r = run({"extract-objects", "-c", "a hot dog on a dining table"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  REQUIRE(j["mentions"].size() == 2);
  CHECK(j["mentions"][0]["category"] == "hot dog");
  CHECK(j["mentions"][0]["token_span"] == json::array({1, 2}));
  CHECK(j["mentions"][1]["category"] == "dining table");
  CHECK(j["mentions"][1]["byte_span"] == json::array({15, 27}));
}

TEST_CASE("default data directory comes from the environment") {
  TempDir dir;
  dir.write("coco_synonyms.txt", "frisbee\n");
  ::setenv("CHAIR_DATA_DIR", dir.path().c_str(), 1);
  auto r = run({"extract-objects", "-c", "a dog catches a frisbee"});
  ::unsetenv("CHAIR_DATA_DIR");
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  REQUIRE(j["mentions"].size() == 1);
  CHECK(j["mentions"][0]["category"] == "frisbee");
}

TEST_CASE("nocaps scoring with domain slices") {
  TempDir dir;
  auto ann = dir.write("nocaps.json", R"({"images": [
      {"id": 0, "domain": "in-domain"}, {"id": 1, "domain": "out-domain"}],
      "annotations": [{"image_id": 0, "caption": "a dog"}, {"image_id": 1, "caption": "a cat"}]})");
  auto preds = dir.write("p.json", R"([{"image_id": 0, "caption": "a dog and a cat"},
                                       {"image_id": 1, "caption": "a cat"}])");
  std::vector<std::string> base = {"score", "--dataset", "nocaps", "--annotations", ann.string(),
                                   "--predictions", preds.string()};
  auto no_vocab = run(base);
  CHECK(no_vocab.code == 1);
  CHECK(no_vocab.err.find("config_error") != std::string::npos);

  auto with_lexicon = plus(base, "--synonyms", (chair_test::data_dir() / "coco_synonyms.txt").string());
  auto all = run(with_lexicon);
  REQUIRE(all.code == 0);
  CHECK(json::parse(all.out)["chair_s"].get<double>() == doctest::Approx(50.0));
  auto out = run(plus(with_lexicon, "--slice", "out"));
  REQUIRE(out.code == 0);
  auto j = json::parse(out.out);
  CHECK(j["chair_s"].get<double>() == doctest::Approx(0.0));
  CHECK(j["slice"] == "out-domain");
  CHECK(j["n_sentences"] == 1);
}

TEST_CASE("mask subcommand") {
  TempDir dir;
  auto out = dir.file("masked.jsonl");
  std::vector<std::string> args = {"mask", "--dataset", "coco",
                                   "--annotations", fixture("three_image/captions.json").string(),
                                   "--split-file", fixture("three_image/split.json").string(),
                                   "-o", out.string()};
  auto r = run(args);
  REQUIRE(r.code == 0);
  auto text = chair_test::slurp(out);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  auto summary_at = r.err.find("mask summary: ");
  REQUIRE(summary_at != std::string::npos);
  auto summary = json::parse(first_line(r.err.substr(summary_at + 14)));
  CHECK(summary["n_masked_units"] == 5);
  CHECK(summary["n_examples"] == 4);

  auto std1 = run(plus(args, "--mode", "standard", "--seed", "3"));
  auto text1 = chair_test::slurp(out);
  auto std2 = run(plus(args, "--mode", "standard", "--seed", "3", "--workers", "3"));
  CHECK(std1.code == 0);
  CHECK(text1 == chair_test::slurp(out));

  auto bad = run(plus(args, "--mode", "standard", "--rate", "1.5"));
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error: config_error:", 0) == 0);
}

}  // TEST_SUITE
