// Command line front end for the TM prompting pipeline.
//
//   tmprompt synth --out DIR
//   tmprompt ingest --src a.en --tgt a.de --out tm.store
//   tmprompt index --store tm.store --out tm.index
//   tmprompt train --store tm.store --out toy.model
//   tmprompt train-aligner --store tm.store --out align.m1
//   tmprompt retrieve --store tm.store --index tm.index --input q.txt
//   tmprompt translate --model toy.model --store ... --input in.txt
//   tmprompt eval --model toy.model --store ... --test-src t.en --test-ref t.de

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tmprompt/tmprompt.hpp"

namespace fs = std::filesystem;
using namespace tmprompt;

namespace {

// JSON-lines diagnostics on stderr.
class Logger {
 public:
  void set_command(std::string c) { command_ = std::move(c); }
  void set_verbose(bool v) { verbose_ = v; }

  void info(const std::string& event, nlohmann::ordered_json fields = {}) {
    emit("info", event, std::move(fields));
  }
  void debug(const std::string& event, nlohmann::ordered_json fields = {}) {
    if (verbose_) emit("debug", event, std::move(fields));
  }
  void error(const std::string& message) {
    emit("error", "failed", {{"message", message}});
  }

 private:
  void emit(const char* level, const std::string& event,
            nlohmann::ordered_json fields) {
    nlohmann::ordered_json j;
    j["level"] = level;
    j["cmd"] = command_;
    j["event"] = event;
    if (fields.is_object()) {
      for (auto& [k, v] : fields.items()) j[k] = v;
    }
    std::cerr << j.dump() << '\n';
  }

  std::string command_ = "tmprompt";
  bool verbose_ = false;
};

Logger logger;

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

std::vector<Tokens> read_tokenized(const std::string& path,
                                   const std::string& lang) {
  std::vector<Tokens> out;
  for (const auto& line : detail::read_lines(path)) {
    out.push_back(tokenize(line, lang));
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<Tokens>& lines) {
  io::save_file(path, [&](std::ostream& out) {
    for (const auto& l : lines) out << join(l) << '\n';
  });
}

// Writes to `path`, or to stdout when it is empty or "-".
template <class Writer>
void write_output(const std::string& path, Writer&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
  } else {
    io::save_file(path, write);
  }
}

// Bad flags or flag combinations; exit code 2 like parse errors.
struct UsageError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

TmStore load_store_logged(const std::string& path) {
  Stopwatch t;
  auto store = load_store(path);
  logger.debug("store loaded", {{"path", path},
                                {"entries", store.size()},
                                {"ms", t.ms()}});
  return store;
}

// Retrieval results from a cache file, or computed against store + index.
RetrievalList obtain_retrievals(const RunConfig& cfg, const TmStore& store,
                                const std::vector<Tokens>& inputs) {
  if (!cfg.retrievals.empty()) {
    auto r = load_retrievals(cfg.retrievals);
    logger.debug("retrievals replayed", {{"path", cfg.retrievals}});
    return r;
  }
  require(cfg.index, "--index");
  Stopwatch t;
  const auto index = load_index(cfg.index);
  std::vector<Query> queries;
  for (const auto& x : inputs) queries.push_back(Query::from_tokens(x));
  auto r = retrieve_batch(index, store, queries, cfg.candidates, cfg.jobs);
  logger.debug("retrieved", {{"queries", queries.size()}, {"ms", t.ms()}});
  return r;
}

struct Options {
  RunConfig cfg;
  // stage-specific
  std::string out;
  std::string src_file, tgt_file, tsv_file;
  std::string src_lang = "en", tgt_lang = "de";
  std::string input;
  std::string report, sentences, buckets_out, retrievals_out;
  int em_iters = 5;
  double add_k = 0.1;
  bool plain_mixture = false;
  std::optional<double> jump;
  bool verbose = false;
  SyntheticOptions synth;
};

int cmd_synth(const Options& o) {
  SyntheticOptions s = o.synth;
  s.seed = o.cfg.seed;
  s.source_lang = o.src_lang;
  s.target_lang = o.tgt_lang;
  const auto corpus = make_synthetic_corpus(s);
  fs::create_directories(o.out);
  std::vector<Tokens> src, tgt;
  for (const auto& e : corpus.train.entries()) {
    src.push_back(e.source_tokens);
    tgt.push_back(e.target_tokens);
  }
  const fs::path dir(o.out);
  write_lines((dir / ("train." + s.source_lang)).string(), src);
  write_lines((dir / ("train." + s.target_lang)).string(), tgt);
  write_lines((dir / ("test." + s.source_lang)).string(), corpus.test_source);
  write_lines((dir / ("test." + s.target_lang)).string(),
              corpus.test_reference);
  logger.info("wrote corpus", {{"dir", o.out},
                               {"train", src.size()},
                               {"test", corpus.test_source.size()}});
  return 0;
}

int cmd_ingest(const Options& o) {
  require(o.out, "--out");
  IngestResult r;
  if (!o.tsv_file.empty()) {
    r = ingest_tsv(o.tsv_file, o.src_lang, o.tgt_lang);
  } else {
    require(o.src_file, "--src");
    require(o.tgt_file, "--tgt");
    r = ingest_corpus(o.src_file, o.tgt_file, o.src_lang, o.tgt_lang);
  }
  save_store(r.store, o.out);
  logger.info("ingested", {{"entries", r.store.size()},
                           {"skipped", r.skipped},
                           {"out", o.out}});
  return 0;
}

int cmd_index(const Options& o) {
  require(o.cfg.store, "--store");
  require(o.out, "--out");
  const auto store = load_store_logged(o.cfg.store);
  Stopwatch t;
  const auto index = build_index(store);
  save_index(index, o.out);
  logger.info("indexed", {{"entries", index.entry_count()},
                          {"terms", index.term_count()},
                          {"ms", t.ms()}});
  return 0;
}

int cmd_train(const Options& o) {
  require(o.cfg.store, "--store");
  require(o.out, "--out");
  const auto store = load_store_logged(o.cfg.store);
  ConjunctionTable conj = ConjunctionTable::defaults();
  if (!o.cfg.conjunctions.empty()) conj.load_overrides(o.cfg.conjunctions);
  ToyOptions opt;
  opt.em_iterations = o.em_iters;
  opt.add_k = o.add_k;
  opt.params = o.plain_mixture ? ToyParams::plain(o.cfg.lambda) : ToyParams{};
  opt.params.lambda = o.cfg.lambda;
  if (o.jump) opt.params.jump = *o.jump;
  opt.extra_tokens = template_vocabulary(store.target_lang(), conj);
  Stopwatch t;
  const auto model = train_toy(store, opt);
  save_toy(model, o.out);
  logger.info("trained", {{"vocabulary", model.vocabulary().size()},
                          {"em_iterations", o.em_iters},
                          {"ms", t.ms()}});
  return 0;
}

int cmd_train_aligner(const Options& o) {
  require(o.cfg.store, "--store");
  require(o.out, "--out");
  const auto store = load_store_logged(o.cfg.store);
  Model1Trace trace;
  Stopwatch t;
  const auto table = train_model1(store, o.em_iters, &trace);
  save_model1(table, o.out);
  for (std::size_t i = 0; i < trace.log_likelihood.size(); ++i) {
    logger.debug("em iteration", {{"iteration", i + 1},
                                  {"log_likelihood", trace.log_likelihood[i]}});
  }
  logger.info("trained aligner", {{"source_words", table.row_count()},
                                  {"ms", t.ms()}});
  return 0;
}

int cmd_retrieve(const Options& o) {
  require(o.cfg.store, "--store");
  require(o.input, "--input");
  const auto store = load_store_logged(o.cfg.store);
  const auto inputs = read_tokenized(o.input, store.source_lang());
  const auto results = obtain_retrievals(o.cfg, store, inputs);
  if (!o.retrievals_out.empty()) save_retrievals(results, o.retrievals_out);
  write_output(o.out, [&](std::ostream& out) {
    out << "query\tentry\tfms\tsource\ttarget\n";
    char buf[32];
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (!r) {
        out << i << "\t-\t-\t-\t-\n";
        continue;
      }
      std::snprintf(buf, sizeof buf, "%.6f", r->fms);
      const auto& e = store.at(r->entry_id);
      out << i << '\t' << r->entry_id << '\t' << buf << '\t'
          << join(e.source_tokens) << '\t' << join(e.target_tokens) << '\n';
    }
  });
  logger.info("retrieved", {{"queries", results.size()}});
  return 0;
}

int cmd_translate(const Options& o) {
  require(o.cfg.model, "--model");
  require(o.input, "--input");
  const auto& cfg = o.cfg;
  TmStore store(o.src_lang, o.tgt_lang);
  if (!cfg.no_tm) {
    require(cfg.store, "--store");
    store = load_store_logged(cfg.store);
  }
  const auto inputs = read_tokenized(o.input, store.source_lang());
  const auto model = load_toy(cfg.model);
  std::optional<Model1Table> aligner;
  if (!cfg.aligner.empty()) aligner = load_model1(cfg.aligner);
  const Model1Table* align = aligner ? &*aligner : &model.lexical_table();

  auto opt = cfg.experiment_options(store.source_lang(), store.target_lang());
  RetrievalList retrievals;
  std::optional<TemplateKind> kind;
  if (!cfg.no_tm) {
    kind = cfg.template_kind();
    retrievals = obtain_retrievals(cfg, store, inputs);
    if (!o.retrievals_out.empty()) save_retrievals(retrievals, o.retrievals_out);
  }
  Stopwatch t;
  const auto logs =
      translate_all(model, store, inputs, retrievals, kind, opt, align);
  std::size_t failed = 0, with_tm = 0;
  for (const auto& l : logs) {
    failed += !l.error.empty();
    with_tm += l.used_tm;
    if (!l.error.empty()) {
      logger.info("sentence failed", {{"id", l.id}, {"message", l.error}});
    }
  }
  write_output(o.out, [&](std::ostream& out) {
    for (const auto& l : logs) out << join(l.output) << '\n';
  });
  if (!o.sentences.empty()) {
    io::save_file(o.sentences, [&](std::ostream& out) {
      for (const auto& l : logs) out << sentence_json(l).dump() << '\n';
    });
  }
  logger.info("translated", {{"sentences", logs.size()},
                             {"with_tm", with_tm},
                             {"failed", failed},
                             {"ms", t.ms()}});
  return failed ? 1 : 0;
}

int cmd_eval(const Options& o) {
  const auto& cfg = o.cfg;
  require(cfg.model, "--model");
  require(cfg.test_source, "--test-src");
  require(cfg.test_reference, "--test-ref");
  TmStore store(o.src_lang, o.tgt_lang);
  if (!cfg.self_tm) {
    require(cfg.store, "--store");
    store = load_store_logged(cfg.store);
  }
  TestSet test{read_tokenized(cfg.test_source, store.source_lang()),
               read_tokenized(cfg.test_reference, store.target_lang())};
  const auto model = load_toy(cfg.model);
  std::optional<Model1Table> aligner;
  if (!cfg.aligner.empty()) aligner = load_model1(cfg.aligner);
  const Model1Table* align = aligner ? &*aligner : &model.lexical_table();
  auto opt = cfg.experiment_options(store.source_lang(), store.target_lang());

  RetrievalList retrievals;
  if (cfg.self_tm) {
    retrievals = retrieve_for_test(TmIndex{}, store, test, opt);
  } else {
    retrievals = obtain_retrievals(cfg, store, test.sources);
  }
  if (!o.retrievals_out.empty()) save_retrievals(retrievals, o.retrievals_out);

  Stopwatch t;
  const auto report = run_experiment(model, store, test, retrievals, opt, align);
  logger.info("decoded", {{"sentences", test.sources.size()},
                          {"systems", report.systems.size()},
                          {"ms", t.ms()}});

  std::vector<BucketTable> tables;
  for (const auto& spec : cfg.bucket_specs()) {
    std::vector<double> keys;
    if (spec.kind == BucketSpec::Kind::Fms) {
      keys = report.fms;
    } else {
      for (auto l : report.lengths) keys.push_back(static_cast<double>(l));
    }
    tables.push_back(bucket_eval(report.system_names(), report.outputs(),
                                 test.references, keys, spec));
  }

  auto print_all = [&](std::ostream& out) {
    print_report(out, report);
    for (const auto& b : tables) {
      out << '\n';
      print_bucket_table(out, b);
    }
  };
  write_output(o.out, print_all);
  if (!o.report.empty()) {
    io::save_file(o.report, [&](std::ostream& out) {
      auto j = report_json(report);
      auto arr = nlohmann::ordered_json::array();
      for (const auto& b : tables) arr.push_back(bucket_json(b));
      j["buckets"] = std::move(arr);
      out << j.dump(2) << '\n';
    });
  }
  if (!o.sentences.empty()) {
    io::save_file(o.sentences,
                  [&](std::ostream& out) { write_sentence_logs(out, report); });
  }
  for (const auto& f : report.failures()) logger.info("sentence failed", {{"message", f}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Translation-memory prompting for a toy NMT model"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "INI/TOML config file; flags override it");
  Options o;
  RunConfig& cfg = o.cfg;
  app.add_flag("-v,--verbose", o.verbose, "Debug-level logs on stderr");
  app.add_option("--seed", cfg.seed, "Seed for randomized steps")
      ->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "Worker threads")->capture_default_str();

  auto add_langs = [&](CLI::App* c) {
    c->add_option("--src-lang", o.src_lang, "Source language code")
        ->capture_default_str();
    c->add_option("--tgt-lang", o.tgt_lang, "Target language code")
        ->capture_default_str();
  };
  auto add_decoding = [&](CLI::App* c) {
    c->add_option("--model", cfg.model, "Toy model file");
    c->add_option("--store", cfg.store, "TM store file");
    c->add_option("--index", cfg.index, "TM index file");
    c->add_option("--retrievals", cfg.retrievals,
                  "Replay cached retrieval results instead of searching");
    c->add_option("--save-retrievals", o.retrievals_out,
                  "Write the retrieval results used to this file");
    c->add_option("--aligner", cfg.aligner,
                  "Model 1 table for fragment extraction (default: the "
                  "model's lexical table)");
    c->add_option("--beam", cfg.beam, "Beam width")->capture_default_str();
    c->add_option("--max-len", cfg.max_len,
                  "Max generated tokens after the prompt (0: 2*|input|+10)")
        ->capture_default_str();
    c->add_option("--alpha", cfg.alpha, "Length penalty exponent")
        ->capture_default_str();
    c->add_option("--candidates", cfg.candidates,
                  "Candidates reranked by FMS")
        ->capture_default_str();
    c->add_option("--fms-threshold", cfg.fms_threshold,
                  "Decode without TM when FMS is below this value");
    c->add_option("--conjunctions", cfg.conjunctions,
                  "Conjunction table overrides (lang = word comma)");
    c->add_option("--src-stop-words", cfg.source_stop_words,
                  "Source stop-word list for fragments");
    c->add_option("--tgt-stop-words", cfg.target_stop_words,
                  "Target stop-word list for fragments");
    c->add_option("--sentences", o.sentences,
                  "Per-sentence JSON lines output");
    c->add_option("-o,--out", o.out, "Output file (default stdout)");
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic parallel corpus");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--train-pairs", o.synth.train_pairs)->capture_default_str();
  synth->add_option("--test-pairs", o.synth.test_pairs)->capture_default_str();
  synth->add_option("--vocab", o.synth.vocab_size)->capture_default_str();
  synth->add_option("--prototypes", o.synth.prototypes)->capture_default_str();
  synth->add_option("--edit-min", o.synth.test_edit_ratio_min,
                    "Min fraction of words changed in test sentences")
      ->capture_default_str();
  synth->add_option("--edit-max", o.synth.test_edit_ratio_max,
                    "Max fraction of words changed in test sentences")
      ->capture_default_str();
  synth->add_flag("--final-punct", o.synth.final_punct,
                  "End every sentence with '.'");
  add_langs(synth);

  auto* ingest = app.add_subcommand("ingest", "Build a TM store from a parallel corpus");
  ingest->add_option("--src", o.src_file, "Source side, one sentence per line");
  ingest->add_option("--tgt", o.tgt_file, "Target side, line-aligned");
  ingest->add_option("--tsv", o.tsv_file, "Single file: source TAB target");
  ingest->add_option("-o,--out", o.out, "Store file")->required();
  add_langs(ingest);

  auto* index = app.add_subcommand("index", "Build the inverted index of a store");
  index->add_option("--store", cfg.store, "TM store file")->required();
  index->add_option("-o,--out", o.out, "Index file")->required();

  auto* train = app.add_subcommand("train", "Train the toy translation model");
  train->add_option("--store", cfg.store, "TM store file")->required();
  train->add_option("-o,--out", o.out, "Model file")->required();
  train->add_option("--em-iters", o.em_iters)->capture_default_str();
  train->add_option("--add-k", o.add_k)->capture_default_str();
  train->add_option("--lambda", cfg.lambda, "Target-side weight")
      ->capture_default_str();
  train->add_option("--jump", o.jump,
                    "Jump prior strength, 0 turns it off (default 3)")
      ->check(CLI::NonNegativeNumber);
  train->add_flag("--plain", o.plain_mixture,
                  "Plain linear LM/lexical mixture without coverage or copy");
  train->add_option("--conjunctions", cfg.conjunctions,
                    "Conjunction table overrides (lang = word comma)");

  auto* align = app.add_subcommand("train-aligner", "Train a Model 1 alignment table");
  align->add_option("--store", cfg.store, "TM store file")->required();
  align->add_option("-o,--out", o.out, "Table file")->required();
  align->add_option("--em-iters", o.em_iters)->capture_default_str();

  auto* retrieve = app.add_subcommand("retrieve", "Best TM match per input line");
  retrieve->add_option("--store", cfg.store, "TM store file")->required();
  retrieve->add_option("--index", cfg.index, "TM index file");
  retrieve->add_option("--retrievals", cfg.retrievals, "Replay a cache file");
  retrieve->add_option("--input", o.input, "Queries, one per line")->required();
  retrieve->add_option("--candidates", cfg.candidates)->capture_default_str();
  retrieve->add_option("--save-retrievals", o.retrievals_out,
                       "Write a cache for translate/eval");
  retrieve->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* translate = app.add_subcommand("translate", "Translate input lines");
  add_decoding(translate);
  add_langs(translate);
  translate->add_option("--input", o.input, "Input sentences")->required();
  translate->add_option("--template", cfg.template_name,
                        "directly|comma|semicolon|conjunction|parenthesis|fragment")
      ->capture_default_str();
  translate->add_flag("--no-tm", cfg.no_tm, "Plain decoding without TM");

  auto* eval = app.add_subcommand("eval", "Compare templates against no TM");
  add_decoding(eval);
  add_langs(eval);
  eval->add_option("--test-src", cfg.test_source, "Test source lines");
  eval->add_option("--test-ref", cfg.test_reference, "Test reference lines");
  eval->add_option("--templates", cfg.template_names,
                   "Templates to run (default: all six)")
      ->delimiter(',');
  eval->add_option("--buckets", cfg.buckets,
                   "fms:0,0.2,... or length[:0,10,...]; repeatable");
  eval->add_flag("--self-tm", cfg.self_tm,
                 "Use each test pair as its own TM (length study)");
  eval->add_option("--report", o.report, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto* sub = app.get_subcommands().front();
  logger.set_command(sub->get_name());
  logger.set_verbose(o.verbose);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    logger.error(e.what());
    return 2;
  }
  try {
    const auto& name = sub->get_name();
    if (name == "synth") return cmd_synth(o);
    if (name == "ingest") return cmd_ingest(o);
    if (name == "index") return cmd_index(o);
    if (name == "train") return cmd_train(o);
    if (name == "train-aligner") return cmd_train_aligner(o);
    if (name == "retrieve") return cmd_retrieve(o);
    if (name == "translate") return cmd_translate(o);
    if (name == "eval") return cmd_eval(o);
  } catch (const UsageError& e) {
    logger.error(e.what());
    return 2;
  } catch (const std::exception& e) {
    logger.error(e.what());
    return 1;
  }
  return 1;
}
