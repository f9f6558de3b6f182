#include "chair/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "chair/chair.hpp"
#include "chair/error.hpp"
#include "chair/ingest.hpp"
#include "chair/masking.hpp"
#include "chair/textnorm.hpp"
#include "chair/vocab.hpp"

#ifndef CHAIR_DEFAULT_DATA_DIR
#define CHAIR_DEFAULT_DATA_DIR "data"
#endif

namespace chair::cli {

namespace {

namespace fs = std::filesystem;

struct VocabOptions {
  std::string vocab;
  std::string synonyms;
  std::string hierarchy;
  std::string class_descriptions;
};

struct DatasetOptions {
  std::string dataset = "coco";
  std::string annotations;
  std::string split_file;
  std::string split = "test";
  std::string instances;
};

struct ScoreFlags {
  std::string predictions;
  bool jsonl = false;
  std::string gt_policy;
  std::string slice;
  bool allow_missing = false;
  int workers = 0;
};

struct RunConfig {
  VocabOptions vocab;
  DatasetOptions data;
  ScoreFlags score;
  std::string format = "json";
  std::string output;

  // build-vocab
  // extract-objects
  std::vector<std::string> captions;
  // compare
  std::string baseline;
  std::string candidate;
  std::string baseline_predictions;
  std::string candidate_predictions;
  // mask
  std::string mode = "objmlm";
  double rate = 0.15;
  std::string mask_token = "[MASK]";
  std::uint64_t seed = 0;
  bool restrict_to_image_objects = false;
};

class Session {
 public:
  Session(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  void warn(const std::string& message) { err_ << "warning: " << message << '\n'; }
  void info(const std::string& message) { err_ << message << '\n'; }

  void emit(const std::string& text, const std::string& output) {
    if (output.empty()) {
      out_ << text;
      return;
    }
    std::ofstream file(output, std::ios::binary | std::ios::trunc);
    if (!file) throw Error(ErrorCode::Io, "cannot write " + output);
    file << text;
    if (!file) throw Error(ErrorCode::Io, "write failed for " + output);
  }

  std::ostream& out() { return out_; }

 private:
  std::ostream& out_;
  std::ostream& err_;
};

fs::path data_dir() {
  if (const char* env = std::getenv("CHAIR_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return CHAIR_DEFAULT_DATA_DIR;
}

CategorySet resolve_vocab(const VocabOptions& opts, const std::string& dataset, Session& session) {
  if (!opts.vocab.empty()) {
    if (!opts.synonyms.empty() || !opts.hierarchy.empty()) {
      session.warn("--vocab given; --synonyms/--hierarchy ignored");
    }
    return load_vocab_json(opts.vocab);
  }
  std::optional<CategorySet> lexicon;
  std::optional<CategorySet> coarse;
  if (!opts.synonyms.empty()) lexicon = load_synonym_lexicon(opts.synonyms);
  if (!opts.hierarchy.empty()) {
    std::optional<fs::path> descriptions;
    if (!opts.class_descriptions.empty()) descriptions = opts.class_descriptions;
    auto built = build_coarse_categories(load_hierarchy(opts.hierarchy, descriptions));
    for (const auto& w : built.warnings) session.warn(w);
    coarse = std::move(built.vocab);
  }
  if (lexicon && coarse) {
    auto merged = merge(*lexicon, *coarse);
    for (const auto& w : merged.warnings) session.warn(w);
    return std::move(merged.vocab);
  }
  if (lexicon) return std::move(*lexicon);
  if (coarse) return std::move(*coarse);
  if (dataset == "nocaps") {
    throw Error(ErrorCode::Config, "nocaps needs a vocabulary: --hierarchy, --vocab or --synonyms");
  }
  return load_synonym_lexicon(data_dir() / "coco_synonyms.txt");
}

GroundTruthPolicy resolve_policy(const RunConfig& cfg, Session& session) {
  const bool has_instances = !cfg.data.instances.empty();
  if (!cfg.score.gt_policy.empty()) {
    auto policy = parse_policy(cfg.score.gt_policy);
    if (!policy) throw Error(ErrorCode::Config, "unknown --gt-policy '" + cfg.score.gt_policy + "'");
    if (*policy == GroundTruthPolicy::ReferencesOnly && has_instances) {
      session.warn("--instances given but --gt-policy is references; instance labels ignored");
    }
    return *policy;
  }
  if (cfg.data.dataset == "nocaps") {
    if (has_instances) {
      session.warn("--instances given with the nocaps default policy (references); pass "
                   "--gt-policy union to use them");
    }
    return GroundTruthPolicy::ReferencesOnly;
  }
  if (cfg.data.dataset == "coco" && !has_instances) {
    session.warn("no --instances for coco; union policy falls back to reference captions only");
  }
  return GroundTruthPolicy::Union;
}

std::vector<CaptionRecord> load_dataset(const RunConfig& cfg, const CategorySet& vocab,
                                        Session& session) {
  const auto& d = cfg.data;
  std::vector<CaptionRecord> records;
  if (d.dataset == "coco") {
    if (d.split_file.empty()) throw Error(ErrorCode::Config, "coco needs --split-file");
    auto split = parse_split(d.split);
    if (!split) throw Error(ErrorCode::Config, "unknown --split '" + d.split + "'");
    records = load_coco_captions(d.annotations, d.split_file, *split);
  } else if (d.dataset == "nocaps") {
    if (d.annotations.empty()) throw Error(ErrorCode::Config, "nocaps needs --annotations");
    records = load_nocaps(d.annotations);
  } else if (d.dataset == "generic") {
    if (d.annotations.empty()) throw Error(ErrorCode::Config, "generic needs --annotations");
    records = load_generic_records(d.annotations, &vocab);
  } else {
    throw Error(ErrorCode::Config, "unknown --dataset '" + d.dataset + "'");
  }
  if (!d.instances.empty()) {
    std::vector<std::string> warnings;
    auto instances = load_instances(d.instances, vocab, &warnings);
    for (const auto& w : warnings) session.warn(w);
    attach_instances(records, instances);
  }
  return records;
}

void attach(std::vector<CaptionRecord>& records, const std::string& predictions, bool jsonl,
            Session& session) {
  if (predictions.empty()) return;
  auto join = attach_predictions(records, load_predictions(predictions, jsonl));
  if (!join.records_without_prediction.empty()) {
    session.warn(std::to_string(join.records_without_prediction.size()) +
                 " image(s) have no prediction in " + predictions);
  }
}

ScoreOptions score_options(const RunConfig& cfg, Session& session) {
  ScoreOptions opts;
  opts.policy = resolve_policy(cfg, session);
  opts.allow_missing = cfg.score.allow_missing;
  opts.workers = cfg.score.workers;
  if (!cfg.score.slice.empty()) {
    opts.slice = parse_domain_tag(cfg.score.slice);
    if (!opts.slice) throw Error(ErrorCode::Config, "unknown --slice '" + cfg.score.slice + "'");
  }
  return opts;
}

nlohmann::json with_metadata(nlohmann::json doc) {
  doc["metadata"] = {{"tool", "chair-tool"}, {"version", kVersion}};
  return doc;
}

// ---------------------------------------------------------------------------

void cmd_build_vocab(const RunConfig& cfg, Session& session) {
  if (cfg.vocab.synonyms.empty() && cfg.vocab.hierarchy.empty()) {
    throw Error(ErrorCode::Config, "build-vocab needs --synonyms and/or --hierarchy");
  }
  const auto vocab = resolve_vocab(cfg.vocab, "generic", session);
  session.info("built vocabulary: " + std::to_string(vocab.size()) + " categories, " +
               std::to_string(vocab.fine_to_coarse().size()) + " surface forms");
  session.emit(to_json(vocab).dump(2) + "\n", cfg.output);
}

void cmd_extract(const RunConfig& cfg, Session& session, std::istream& in) {
  const auto vocab = resolve_vocab(cfg.vocab, cfg.data.dataset, session);
  const ObjectMatcher matcher(vocab);
  std::vector<std::string> captions = cfg.captions;
  if (captions.empty()) {
    std::string line;
    while (std::getline(in, line)) captions.push_back(line);
  }
  std::string text;
  for (const auto& caption : captions) {
    nlohmann::json mentions = nlohmann::json::array();
    for (const auto& m : matcher.extract(caption)) {
      mentions.push_back({
          {"category", m.category},
          {"surface", m.surface},
          {"token_span", {m.first_token, m.last_token}},
          {"n_tokens", m.n_tokens},
          {"byte_span", {m.begin, m.end}},
      });
    }
    nlohmann::json doc = {{"caption", caption}, {"mentions", std::move(mentions)}};
    text += captions.size() == 1 ? doc.dump(2) : doc.dump();
    text += '\n';
  }
  session.emit(text, cfg.output);
}

ChairReport score_with(const RunConfig& cfg, const std::string& predictions,
                       const CategorySet& vocab, const ObjectMatcher& matcher, Session& session) {
  auto records = load_dataset(cfg, vocab, session);
  attach(records, predictions, cfg.score.jsonl, session);
  auto report = score_corpus(records, matcher, score_options(cfg, session));
  if (report.n_skipped > 0) {
    session.warn(std::to_string(report.n_skipped) + " record(s) without prediction excluded");
  }
  if (report.zero_object_corpus) {
    session.warn("no vocabulary object found in any prediction; CHAIR_i is 0 by convention");
  }
  return report;
}

void cmd_score(const RunConfig& cfg, Session& session) {
  const auto vocab = resolve_vocab(cfg.vocab, cfg.data.dataset, session);
  const ObjectMatcher matcher(vocab);
  const auto report = score_with(cfg, cfg.score.predictions, vocab, matcher, session);
  if (cfg.format == "csv") {
    session.emit(to_csv(report), cfg.output);
  } else {
    session.emit(with_metadata(to_json(report)).dump(2) + "\n", cfg.output);
  }
}

void cmd_compare(const RunConfig& cfg, Session& session) {
  ChairSummary base;
  ChairSummary cand;
  if (!cfg.baseline.empty() || !cfg.candidate.empty()) {
    if (cfg.baseline.empty() || cfg.candidate.empty()) {
      throw Error(ErrorCode::Config, "compare needs both --baseline and --candidate");
    }
    base = summary_from_json(read_json(cfg.baseline));
    cand = summary_from_json(read_json(cfg.candidate));
  } else if (!cfg.baseline_predictions.empty() && !cfg.candidate_predictions.empty()) {
    const auto vocab = resolve_vocab(cfg.vocab, cfg.data.dataset, session);
    const ObjectMatcher matcher(vocab);
    base = summarize(score_with(cfg, cfg.baseline_predictions, vocab, matcher, session));
    cand = summarize(score_with(cfg, cfg.candidate_predictions, vocab, matcher, session));
  } else {
    throw Error(ErrorCode::Config,
                "compare needs --baseline/--candidate reports or "
                "--baseline-predictions/--candidate-predictions");
  }
  const auto cmp = compare(base, cand);
  for (const auto& note : cmp.notes) session.warn(note);
  auto doc = to_json(cmp);
  if (base.mean_objects_per_caption && cand.mean_objects_per_caption) {
    doc["fewer_objects_per_caption"] = *base.mean_objects_per_caption - *cand.mean_objects_per_caption;
  }
  if (cmp.relative_reduction_chair_s) {
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(1);
    line << "relative CHAIR_s reduction: " << round_tenth(*cmp.relative_reduction_chair_s) << "%";
    session.info(line.str());
  }
  session.emit(with_metadata(std::move(doc)).dump(2) + "\n", cfg.output);
}

void cmd_mask(const RunConfig& cfg, Session& session) {
  MaskingConfig mcfg;
  auto mode = parse_mask_mode(cfg.mode);
  if (!mode) throw Error(ErrorCode::Config, "unknown --mode '" + cfg.mode + "'");
  mcfg.mode = *mode;
  mcfg.mlm_rate = cfg.rate;
  mcfg.mask_token = cfg.mask_token;
  mcfg.seed = cfg.seed;
  mcfg.restrict_to_image_objects = cfg.restrict_to_image_objects;
  mcfg.validate();
  if (mcfg.mode == MaskMode::StandardMLM && mcfg.restrict_to_image_objects) {
    session.warn("--restrict-to-image-objects has no effect in standard mode");
  }

  const auto vocab = resolve_vocab(cfg.vocab, cfg.data.dataset, session);
  const ObjectMatcher matcher(vocab);
  const auto records = load_dataset(cfg, vocab, session);
  const auto examples = mask_corpus(records, matcher, mcfg, cfg.score.workers);
  std::ostringstream body;
  write_jsonl(body, examples);
  session.emit(body.str(), cfg.output);
  const auto summary = summarize(examples);
  nlohmann::json s = {
      {"n_examples", summary.n_examples},
      {"n_masked_units", summary.n_masked_units},
      {"units_per_example", summary.units_per_example},
  };
  session.info("mask summary: " + s.dump());
}

void add_vocab_options(CLI::App* app, VocabOptions& v) {
  app->add_option("--vocab", v.vocab, "Prebuilt vocabulary JSON");
  app->add_option("--synonyms", v.synonyms, "Synonym lexicon file");
  app->add_option("--hierarchy", v.hierarchy, "Class hierarchy JSON");
  app->add_option("--class-descriptions", v.class_descriptions,
                  "LabelName,DisplayName CSV for hierarchy labels");
}

void add_dataset_options(CLI::App* app, DatasetOptions& d) {
  app->add_option("--dataset", d.dataset, "coco | nocaps | generic")
      ->check(CLI::IsMember({"coco", "nocaps", "generic"}));
  app->add_option("--annotations", d.annotations,
                  "Caption annotations (COCO captions, NoCaps JSON or generic records)");
  app->add_option("--split-file", d.split_file, "Karpathy split JSON (coco)");
  app->add_option("--split", d.split, "train | val | test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  app->add_option("--instances", d.instances, "COCO instances JSON");
}

void add_score_options(CLI::App* app, ScoreFlags& s) {
  app->add_option("--gt-policy", s.gt_policy, "references | instances | union")
      ->check(CLI::IsMember({"references", "instances", "union"}));
  app->add_option("--slice", s.slice, "Restrict to a domain slice: in | near | out")
      ->check(CLI::IsMember({"in", "near", "out", "in-domain", "near-domain", "out-domain"}));
  app->add_flag("--allow-missing", s.allow_missing,
                "Exclude images without a prediction instead of failing");
  app->add_option("--workers", s.workers, "Parallel workers (default: all cores)")
      ->check(CLI::NonNegativeNumber);
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::Io ? 2 : 1; }

std::string one_line(std::string text) {
  for (auto& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Object hallucination metrics (CHAIR) and object-masked corpora", "chair-tool"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build-vocab", "Build a vocabulary JSON from a lexicon and/or hierarchy");
  add_vocab_options(build, cfg.vocab);
  build->add_option("--output,-o", cfg.output, "Write to file instead of stdout");

  auto* extract = app.add_subcommand("extract-objects", "Show the object mentions found in captions");
  add_vocab_options(extract, cfg.vocab);
  extract->add_option("--dataset", cfg.data.dataset, "Selects the default vocabulary")
      ->check(CLI::IsMember({"coco", "nocaps", "generic"}));
  extract->add_option("--caption,-c", cfg.captions, "Caption text (default: one per stdin line)");
  extract->add_option("--output,-o", cfg.output, "Write to file instead of stdout");

  auto* score = app.add_subcommand("score", "Compute CHAIR_i / CHAIR_s for a prediction file");
  add_vocab_options(score, cfg.vocab);
  add_dataset_options(score, cfg.data);
  add_score_options(score, cfg.score);
  score->add_option("--predictions", cfg.score.predictions, "Predictions JSON");
  score->add_flag("--jsonl", cfg.score.jsonl, "Predictions are JSON lines");
  score->add_option("--format", cfg.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  score->add_option("--output,-o", cfg.output, "Write to file instead of stdout");

  auto* cmp = app.add_subcommand("compare", "Compare a baseline and a candidate");
  add_vocab_options(cmp, cfg.vocab);
  add_dataset_options(cmp, cfg.data);
  add_score_options(cmp, cfg.score);
  cmp->add_option("--baseline", cfg.baseline, "Baseline report JSON");
  cmp->add_option("--candidate", cfg.candidate, "Candidate report JSON");
  cmp->add_option("--baseline-predictions", cfg.baseline_predictions, "Baseline predictions JSON");
  cmp->add_option("--candidate-predictions", cfg.candidate_predictions, "Candidate predictions JSON");
  cmp->add_flag("--jsonl", cfg.score.jsonl, "Predictions are JSON lines");
  cmp->add_option("--output,-o", cfg.output, "Write to file instead of stdout");

  auto* mask = app.add_subcommand("mask", "Emit an object-masked (or standard MLM) corpus");
  add_vocab_options(mask, cfg.vocab);
  add_dataset_options(mask, cfg.data);
  mask->add_option("--mode", cfg.mode, "objmlm | standard")->check(CLI::IsMember({"objmlm", "standard"}));
  mask->add_option("--rate", cfg.rate, "Masking rate for standard mode");
  mask->add_option("--mask-token", cfg.mask_token, "Mask token");
  mask->add_option("--seed", cfg.seed, "Random seed");
  mask->add_flag("--restrict-to-image-objects", cfg.restrict_to_image_objects,
                 "Only mask objects present in the image's ground truth");
  mask->add_option("--workers", cfg.score.workers, "Parallel workers (default: all cores)")
      ->check(CLI::NonNegativeNumber);
  mask->add_option("--output,-o", cfg.output, "Write JSON lines to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage_error: " << one_line(e.what()) << '\n';
    err << app.help();
    return 1;
  }

  Session session(out, err);
  try {
    if (*build) cmd_build_vocab(cfg, session);
    else if (*extract) cmd_extract(cfg, session, std::cin);
    else if (*score) cmd_score(cfg, session);
    else if (*cmp) cmd_compare(cfg, session);
    else if (*mask) cmd_mask(cfg, session);
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: format_error: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal_error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("chair-tool");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace chair::cli
