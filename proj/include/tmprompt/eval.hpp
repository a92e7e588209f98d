#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tmprompt/bleu.hpp"
#include "tmprompt/decoder.hpp"
#include "tmprompt/error.hpp"
#include "tmprompt/fragment.hpp"
#include "tmprompt/model1.hpp"
#include "tmprompt/parallel.hpp"
#include "tmprompt/retrieval.hpp"
#include "tmprompt/templates.hpp"
#include "tmprompt/tm_store.hpp"
#include "tmprompt/tokenize.hpp"

namespace tmprompt {

// ---------------------------------------------------------------- buckets

/// Bucket boundaries over FMS or input length. Bucket i is [b_i, b_{i+1});
/// the last bucket also takes its upper boundary so that exact matches
/// (FMS 1.0) are not lost. A length spec with no boundaries is resolved
/// against the data into buckets of `width` tokens.
struct BucketSpec {
  enum class Kind { Fms, Length };

  Kind kind = Kind::Fms;
  std::vector<double> boundaries;
  std::size_t width = 10;

  static BucketSpec fms_quintiles() {
    return BucketSpec{Kind::Fms, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}, 10};
  }

  static BucketSpec lengths(std::size_t max_length, std::size_t width = 10) {
    if (width == 0) throw InvalidArgument("bucket width must be positive");
    BucketSpec spec{Kind::Length, {}, width};
    const std::size_t top = (max_length / width + 1) * width;
    for (std::size_t b = 0; b <= top; b += width) {
      spec.boundaries.push_back(static_cast<double>(b));
    }
    return spec;
  }

  /// "fms:0,0.2,...", "length:0,10,20" or "length" (width-10 buckets).
  static BucketSpec parse(std::string_view text) {
    BucketSpec spec;
    const auto colon = text.find(':');
    const auto kind = text.substr(0, colon);
    if (kind == "fms") {
      spec.kind = Kind::Fms;
    } else if (kind == "length") {
      spec.kind = Kind::Length;
    } else {
      throw InvalidArgument("bucket kind must be 'fms' or 'length', got '" +
                            std::string(kind) + "'");
    }
    if (colon == std::string_view::npos) {
      if (spec.kind == Kind::Fms) spec.boundaries = fms_quintiles().boundaries;
      return spec;
    }
    auto rest = text.substr(colon + 1);
    while (true) {
      const auto comma = rest.find(',');
      spec.boundaries.push_back(
          io::parse_number<double>(rest.substr(0, comma), "bucket boundary"));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    spec.validate();
    return spec;
  }

  void validate() const {
    if (boundaries.empty() && kind == Kind::Length) return;
    if (boundaries.size() < 2) {
      throw InvalidArgument("bucket spec needs at least two boundaries");
    }
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
      if (!(boundaries[i] > boundaries[i - 1])) {
        throw InvalidArgument("bucket boundaries must be strictly ascending");
      }
    }
  }

  std::size_t count() const {
    return boundaries.empty() ? 0 : boundaries.size() - 1;
  }

  std::optional<std::size_t> bucket_of(double v) const {
    if (boundaries.size() < 2 || v < boundaries.front() ||
        v > boundaries.back()) {
      return std::nullopt;
    }
    if (v == boundaries.back()) return count() - 1;
    const auto it =
        std::upper_bound(boundaries.begin(), boundaries.end(), v);
    return static_cast<std::size_t>(it - boundaries.begin()) - 1;
  }

  std::string label(std::size_t i) const {
    std::ostringstream out;
    out << '[' << boundaries[i] << ", " << boundaries[i + 1]
        << (i + 1 == count() ? ']' : ')');
    return out.str();
  }

  std::string kind_name() const { return kind == Kind::Fms ? "fms" : "length"; }
};

struct BucketRow {
  std::string label;
  std::size_t count = 0;
  std::vector<std::optional<double>> bleu;  // per system; absent if empty
};

struct BucketTable {
  std::string kind;
  std::vector<std::string> systems;
  std::vector<BucketRow> rows;
  std::size_t outside = 0;  // sentences whose key falls in no bucket
};

/// Per-bucket corpus BLEU for each system. `keys[i]` is the bucketing value
/// of sentence i (its FMS or its length).
inline BucketTable bucket_eval(const std::vector<std::string>& systems,
                               const std::vector<std::vector<Tokens>>& outputs,
                               const std::vector<Tokens>& references,
                               const std::vector<double>& keys,
                               BucketSpec spec) {
  if (systems.size() != outputs.size()) {
    throw InvalidArgument("one output list per system required");
  }
  if (keys.size() != references.size()) {
    throw InvalidArgument("one bucket key per sentence required");
  }
  for (const auto& o : outputs) {
    if (o.size() != references.size()) {
      throw InvalidArgument("system output count differs from references");
    }
  }
  if (spec.boundaries.empty()) {
    double top = 0.0;
    for (double k : keys) top = std::max(top, k);
    spec = BucketSpec::lengths(static_cast<std::size_t>(top), spec.width);
  }
  spec.validate();

  BucketTable table;
  table.kind = spec.kind_name();
  table.systems = systems;
  std::vector<std::vector<std::size_t>> members(spec.count());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (auto b = spec.bucket_of(keys[i])) {
      members[*b].push_back(i);
    } else {
      ++table.outside;
    }
  }
  for (std::size_t b = 0; b < spec.count(); ++b) {
    BucketRow row;
    row.label = spec.label(b);
    row.count = members[b].size();
    for (std::size_t s = 0; s < systems.size(); ++s) {
      if (members[b].empty()) {
        row.bleu.emplace_back();
        continue;
      }
      std::vector<Tokens> hyp, ref;
      for (auto i : members[b]) {
        hyp.push_back(outputs[s][i]);
        ref.push_back(references[i]);
      }
      row.bleu.push_back(corpus_bleu(hyp, ref).bleu);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// Left-aligned first column, right-aligned others.
inline void print_aligned(std::ostream& out,
                          const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      width[c] = std::max(width[c], r[c].size());
    }
  }
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        out << "  " << std::right << std::setw(static_cast<int>(width[c]))
            << r[c];
      }
    }
    out << std::left << '\n';
  }
}

}  // namespace detail

inline void print_bucket_table(std::ostream& out, const BucketTable& t) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{t.kind, "n"};
  head.insert(head.end(), t.systems.begin(), t.systems.end());
  rows.push_back(std::move(head));
  for (const auto& r : t.rows) {
    std::vector<std::string> line{r.label, std::to_string(r.count)};
    for (const auto& b : r.bleu) line.push_back(b ? detail::fixed(*b) : "-");
    rows.push_back(std::move(line));
  }
  detail::print_aligned(out, rows);
  if (t.outside) out << "outside all buckets: " << t.outside << '\n';
}

inline nlohmann::ordered_json bucket_json(const BucketTable& t) {
  nlohmann::ordered_json j;
  j["kind"] = t.kind;
  j["systems"] = t.systems;
  j["outside"] = t.outside;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json row;
    row["bucket"] = r.label;
    row["count"] = r.count;
    nlohmann::ordered_json bleu;
    for (std::size_t s = 0; s < t.systems.size(); ++s) {
      if (r.bleu[s]) bleu[t.systems[s]] = *r.bleu[s];
    }
    row["bleu"] = bleu.is_null() ? nlohmann::ordered_json::object() : bleu;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

// ------------------------------------------------------------- experiment

inline constexpr std::string_view kBaselineName = "no-tm";

struct ExperimentOptions {
  bool baseline = true;
  std::vector<TemplateKind> templates{kAllTemplates.begin(),
                                      kAllTemplates.end()};
  std::size_t beam_width = 5;
  double alpha = 0.6;
  std::size_t max_free_len = 0;  // 0: 2 * |input| + 10 generated tokens
  std::size_t candidates = kDefaultCandidates;
  std::optional<double> fms_threshold;  // below it, fall back to no TM
  bool self_tm = false;                 // the test pair is its own TM
  std::size_t jobs = 1;
  std::string source_lang = "en";
  std::string target_lang = "de";
  ConjunctionTable conjunctions = ConjunctionTable::defaults();
  StopWords source_stop;
  StopWords target_stop;

  void validate() const {
    if (!baseline && templates.empty()) {
      throw InvalidArgument("nothing to evaluate: no baseline, no templates");
    }
    if (beam_width == 0) throw InvalidArgument("beam width must be positive");
    if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
    if (candidates == 0) throw InvalidArgument("candidates must be positive");
    if (fms_threshold && !(*fms_threshold >= 0.0 && *fms_threshold <= 1.0)) {
      throw InvalidArgument("FMS threshold must be in [0, 1]");
    }
    if (jobs == 0) throw InvalidArgument("jobs must be positive");
    for (auto k : templates) {
      if (k == TemplateKind::Conjunction) {
        (void)conjunctions.at(source_lang);
        (void)conjunctions.at(target_lang);
      }
    }
  }

  std::size_t step_limit(std::size_t prefix, std::size_t input) const {
    return prefix + (max_free_len ? max_free_len : 2 * input + 10);
  }
};

struct TestSet {
  std::vector<Tokens> sources;
  std::vector<Tokens> references;
};

struct SentenceLog {
  std::size_t id = 0;
  std::string system;
  std::optional<EntryId> tm_id;
  double fms = 0.0;
  std::size_t length = 0;
  bool used_tm = false;
  Tokens encoder;
  Tokens prefix;
  Tokens output;
  double bleu = 0.0;  // smoothed sentence BLEU
  std::string error;
};

struct SystemResult {
  std::string name;
  BleuReport bleu;
  std::size_t tm_used = 0;
  std::size_t failures = 0;
};

struct ExperimentReport {
  std::vector<SystemResult> systems;
  std::vector<std::vector<SentenceLog>> logs;  // [system][sentence]
  std::vector<double> fms;                     // per sentence, 0 if no TM
  std::vector<std::size_t> lengths;            // input length in tokens

  std::vector<std::string> system_names() const {
    std::vector<std::string> out;
    for (const auto& s : systems) out.push_back(s.name);
    return out;
  }

  std::vector<std::vector<Tokens>> outputs() const {
    std::vector<std::vector<Tokens>> out;
    for (const auto& sys : logs) {
      auto& o = out.emplace_back();
      for (const auto& l : sys) o.push_back(l.output);
    }
    return out;
  }

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& sys : logs) {
      for (const auto& l : sys) {
        if (!l.error.empty()) {
          out.push_back("sentence " + std::to_string(l.id) + " [" + l.system +
                        "]: " + l.error);
        }
      }
    }
    return out;
  }
};

/// Retrieval for every test input, or the test pairs themselves in
/// self-TM mode (FMS 1).
inline RetrievalList retrieve_for_test(const TmIndex& index,
                                       const TmStore& store,
                                       const TestSet& test,
                                       const ExperimentOptions& opt) {
  if (opt.self_tm) {
    RetrievalList out;
    for (std::size_t i = 0; i < test.sources.size(); ++i) {
      out.push_back(RetrievalResult{i, 1.0, 1, 0.0});
    }
    return out;
  }
  std::vector<Query> queries;
  queries.reserve(test.sources.size());
  for (const auto& s : test.sources) queries.push_back(Query::from_tokens(s));
  return retrieve_batch(index, store, queries, opt.candidates, opt.jobs);
}

namespace detail {

// TM pair for sentence i, or nulls when there is none or it is gated off.
struct TmPair {
  const Tokens* source = nullptr;
  const Tokens* target = nullptr;
};

inline TmPair tm_pair(const std::optional<RetrievalResult>& r,
                      const TmStore& store, const TestSet* self,
                      const ExperimentOptions& opt) {
  if (!r || (opt.fms_threshold && r->fms < *opt.fms_threshold)) return {};
  if (self) return {&self->sources[r->entry_id], &self->references[r->entry_id]};
  return {&store.at(r->entry_id).source_tokens,
          &store.at(r->entry_id).target_tokens};
}

inline void check_retrievals(const RetrievalList& retrievals, std::size_t n,
                             std::size_t limit) {
  if (retrievals.size() != n) {
    throw InvalidArgument("one retrieval result per input sentence required (" +
                          std::to_string(retrievals.size()) + " for " +
                          std::to_string(n) + " inputs)");
  }
  for (const auto& r : retrievals) {
    if (r && r->entry_id >= limit) {
      throw InvalidArgument("retrieval refers to entry " +
                            std::to_string(r->entry_id) + " out of range");
    }
  }
}

// Decodes one sentence, with `kind` applied to `tm` when both are given
// and a prompt can be built; otherwise without TM. `plain` caches the
// no-TM decode so that several systems falling back share it.
template <TranslationModel M>
void decode_sentence(const M& model, const Tokens& x, const TmPair& tm,
                     std::optional<TemplateKind> kind,
                     const ExperimentOptions& opt, const Model1Table* aligner,
                     std::optional<std::pair<Tokens, std::string>>& plain,
                     SentenceLog& log) {
  log.length = x.size();
  std::optional<PromptedPair> prompt;
  if (kind && tm.source) {
    try {
      if (is_sentence_level(*kind)) {
        prompt = apply_sentence_template(*kind, *tm.source, *tm.target, x,
                                         opt.source_lang, opt.target_lang,
                                         opt.conjunctions);
      } else {
        auto frags = build_fragment_tm(x, *tm.source, *tm.target, *aligner,
                                       opt.source_stop, opt.target_stop);
        if (!frags.empty()) {
          prompt = apply_fragment_template(frags.source_fragments,
                                           frags.target_fragments, x);
        }
      }
    } catch (const std::exception& e) {
      log.error = e.what();
      return;
    }
  }
  if (prompt) {
    log.used_tm = true;
    log.encoder = prompt->encoder_tokens;
    log.prefix = prompt->forced_prefix;
    try {
      BeamOptions b{opt.beam_width,
                    opt.step_limit(prompt->forced_prefix.size(), x.size()),
                    opt.alpha};
      log.output =
          strip_prompt(forced_beam_search(model, *prompt, b), &*prompt);
    } catch (const std::exception& e) {
      log.error = e.what();
    }
    return;
  }
  log.encoder = x;
  if (!plain) {
    plain.emplace();
    try {
      BeamOptions b{opt.beam_width, opt.step_limit(0, x.size()), opt.alpha};
      plain->first = beam_search(model, x, b).translation;
    } catch (const std::exception& e) {
      plain->second = e.what();
    }
  }
  log.output = plain->first;
  log.error = plain->second;
}

}  // namespace detail

/// Translates `sources` with one configuration: `kind` empty means no TM.
/// `retrievals[i]` is the TM match of input i in `store`.
template <TranslationModel M>
std::vector<SentenceLog> translate_all(const M& model, const TmStore& store,
                                       const std::vector<Tokens>& sources,
                                       const RetrievalList& retrievals,
                                       std::optional<TemplateKind> kind,
                                       const ExperimentOptions& opt,
                                       const Model1Table* aligner = nullptr) {
  opt.validate();
  if (kind == TemplateKind::Fragment && !aligner) {
    throw InvalidArgument("fragment template requires an alignment table");
  }
  if (kind) detail::check_retrievals(retrievals, sources.size(), store.size());
  std::vector<SentenceLog> out(sources.size());
  const std::string name = kind ? std::string(to_string(*kind))
                                : std::string(kBaselineName);
  parallel_for(sources.size(), opt.jobs, [&](std::size_t, std::size_t i) {
    auto& log = out[i];
    log.id = i;
    log.system = name;
    detail::TmPair tm;
    if (kind) {
      const auto& r = retrievals[i];
      log.tm_id = r ? std::optional<EntryId>(r->entry_id) : std::nullopt;
      log.fms = r ? r->fms : 0.0;
      tm = detail::tm_pair(r, store, nullptr, opt);
    }
    std::optional<std::pair<Tokens, std::string>> plain;
    detail::decode_sentence(model, sources[i], tm, kind, opt, aligner, plain,
                            log);
  });
  return out;
}

/// Decodes every test sentence without TM and with each template, then
/// scores. `retrievals[i]` is the TM match of sentence i (entry ids index
/// `store`, or the test set itself in self-TM mode). `aligner` (t(f|e),
/// target given source) is needed only for the fragment template.
/// A sentence whose prompt cannot be built (no TM, TM below the threshold,
/// no shared fragment) is decoded without TM; a sentence whose decode
/// throws gets an empty output and an error entry.
template <TranslationModel M>
ExperimentReport run_experiment(const M& model, const TmStore& store,
                                const TestSet& test,
                                const RetrievalList& retrievals,
                                const ExperimentOptions& opt,
                                const Model1Table* aligner = nullptr) {
  opt.validate();
  const std::size_t n = test.sources.size();
  if (test.references.size() != n) {
    throw InvalidArgument("test set has " + std::to_string(n) +
                          " sources but " +
                          std::to_string(test.references.size()) +
                          " references");
  }
  detail::check_retrievals(retrievals, n, opt.self_tm ? n : store.size());
  const bool wants_fragment =
      std::find(opt.templates.begin(), opt.templates.end(),
                TemplateKind::Fragment) != opt.templates.end();
  if (wants_fragment && !aligner) {
    throw InvalidArgument("fragment template requires an alignment table");
  }

  ExperimentReport report;
  std::vector<std::optional<TemplateKind>> kinds;
  if (opt.baseline) kinds.emplace_back();
  for (auto k : opt.templates) kinds.emplace_back(k);
  for (const auto& k : kinds) {
    report.systems.push_back(
        {k ? std::string(to_string(*k)) : std::string(kBaselineName), {}, 0, 0});
  }
  const std::size_t systems = kinds.size();
  report.logs.assign(systems, std::vector<SentenceLog>(n));
  report.fms.resize(n);
  report.lengths.resize(n);

  parallel_for(n, opt.jobs, [&](std::size_t, std::size_t i) {
    const auto& r = retrievals[i];
    report.fms[i] = r ? r->fms : 0.0;
    report.lengths[i] = test.sources[i].size();
    const auto tm =
        detail::tm_pair(r, store, opt.self_tm ? &test : nullptr, opt);
    std::optional<std::pair<Tokens, std::string>> plain;
    for (std::size_t s = 0; s < systems; ++s) {
      SentenceLog& log = report.logs[s][i];
      log.id = i;
      log.system = report.systems[s].name;
      log.tm_id = r ? std::optional<EntryId>(r->entry_id) : std::nullopt;
      log.fms = report.fms[i];
      detail::decode_sentence(model, test.sources[i], tm, kinds[s], opt,
                              aligner, plain, log);
      log.bleu = sentence_bleu(log.output, test.references[i]);
    }
  });

  for (std::size_t s = 0; s < systems; ++s) {
    std::vector<Tokens> hyp;
    hyp.reserve(n);
    for (const auto& l : report.logs[s]) {
      hyp.push_back(l.output);
      report.systems[s].tm_used += l.used_tm;
      report.systems[s].failures += !l.error.empty();
    }
    report.systems[s].bleu = corpus_bleu(hyp, test.references);
  }
  return report;
}

/// Retrieves and runs in one call.
template <TranslationModel M>
ExperimentReport run_experiment(const M& model, const TmStore& store,
                                const TmIndex& index, const TestSet& test,
                                const ExperimentOptions& opt,
                                const Model1Table* aligner = nullptr) {
  opt.validate();
  return run_experiment(model, store, test,
                        retrieve_for_test(index, store, test, opt), opt,
                        aligner);
}

inline void print_report(std::ostream& out, const ExperimentReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"system", "BLEU", "1-gram", "2-gram", "3-gram", "4-gram",
                  "BP", "hyp/ref", "with TM", "failed"});
  for (const auto& s : report.systems) {
    std::vector<std::string> r{s.name, detail::fixed(s.bleu.bleu)};
    for (double p : s.bleu.precisions) r.push_back(detail::fixed(100.0 * p, 1));
    r.push_back(detail::fixed(s.bleu.brevity_penalty, 3));
    r.push_back(std::to_string(s.bleu.hyp_length) + "/" +
                std::to_string(s.bleu.ref_length));
    r.push_back(std::to_string(s.tm_used));
    r.push_back(std::to_string(s.failures));
    rows.push_back(std::move(r));
  }
  detail::print_aligned(out, rows);
  const auto failures = report.failures();
  if (!failures.empty()) {
    out << "failures (" << failures.size() << "):\n";
    for (const auto& f : failures) out << "  " << f << '\n';
  }
}

inline nlohmann::ordered_json sentence_json(const SentenceLog& l) {
  nlohmann::ordered_json j;
  j["id"] = l.id;
  j["system"] = l.system;
  j["tm_id"] = l.tm_id ? nlohmann::ordered_json(*l.tm_id)
                       : nlohmann::ordered_json(nullptr);
  j["fms"] = l.fms;
  j["length"] = l.length;
  j["used_tm"] = l.used_tm;
  j["encoder"] = join(l.encoder);
  j["prefix"] = join(l.prefix);
  j["output"] = join(l.output);
  j["bleu"] = l.bleu;
  if (!l.error.empty()) j["error"] = l.error;
  return j;
}

/// One JSON object per line, sentences in input order, systems in report
/// order within a sentence.
inline void write_sentence_logs(std::ostream& out,
                                const ExperimentReport& report) {
  const std::size_t n = report.fms.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& sys : report.logs) out << sentence_json(sys[i]).dump() << '\n';
  }
}

inline nlohmann::ordered_json report_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["sentences"] = report.fms.size();
  auto systems = nlohmann::ordered_json::array();
  for (const auto& s : report.systems) {
    nlohmann::ordered_json o;
    o["system"] = s.name;
    o["bleu"] = s.bleu.bleu;
    o["precisions"] = s.bleu.precisions;
    o["brevity_penalty"] = s.bleu.brevity_penalty;
    o["hyp_length"] = s.bleu.hyp_length;
    o["ref_length"] = s.bleu.ref_length;
    o["with_tm"] = s.tm_used;
    o["failures"] = s.failures;
    systems.push_back(std::move(o));
  }
  j["systems"] = std::move(systems);
  return j;
}

}  // namespace tmprompt
