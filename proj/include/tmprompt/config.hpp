#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tmprompt/error.hpp"
#include "tmprompt/eval.hpp"
#include "tmprompt/fragment.hpp"
#include "tmprompt/templates.hpp"

namespace tmprompt {

/// Everything a pipeline run reads. Filled from a config file and command
/// line flags, then validated once before any stage touches data.
struct RunConfig {
  // paths
  std::string store;
  std::string index;
  std::string model;
  std::string aligner;
  std::string test_source;
  std::string test_reference;
  std::string retrievals;  // cached retrieval results to replay
  std::string conjunctions;
  std::string source_stop_words;
  std::string target_stop_words;

  // decoding
  std::string template_name = "parenthesis";
  std::vector<std::string> template_names;  // eval; empty means all six
  bool no_tm = false;
  std::size_t beam = 5;
  std::size_t max_len = 0;  // generated tokens; 0 means 2 * |input| + 10
  double alpha = 0.6;
  double lambda = 0.5;
  std::size_t candidates = kDefaultCandidates;
  std::optional<double> fms_threshold;
  bool self_tm = false;
  std::vector<std::string> buckets;
  std::size_t jobs = 1;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument naming the offending setting.
  void validate() const {
    if (beam == 0) throw InvalidArgument("--beam must be at least 1");
    if (!(alpha >= 0.0)) throw InvalidArgument("--alpha must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
      throw InvalidArgument("--lambda must be in [0, 1]");
    }
    if (candidates == 0) throw InvalidArgument("--candidates must be >= 1");
    if (jobs == 0) throw InvalidArgument("--jobs must be >= 1");
    if (fms_threshold && !(*fms_threshold >= 0.0 && *fms_threshold <= 1.0)) {
      throw InvalidArgument("--fms-threshold must be in [0, 1]");
    }
    if (!parse_template(template_name)) {
      throw InvalidArgument("unknown --template '" + template_name + "'");
    }
    for (const auto& t : template_names) {
      if (!parse_template(t)) {
        throw InvalidArgument("unknown template '" + t + "' in --templates");
      }
    }
    for (const auto& b : buckets) (void)BucketSpec::parse(b);
    if (self_tm && !retrievals.empty()) {
      throw InvalidArgument("--self-tm and --retrievals are exclusive");
    }
    if (self_tm && fms_threshold) {
      throw InvalidArgument("--fms-threshold has no effect with --self-tm");
    }
  }

  TemplateKind template_kind() const { return *parse_template(template_name); }

  std::vector<TemplateKind> template_kinds() const {
    if (template_names.empty()) {
      return {kAllTemplates.begin(), kAllTemplates.end()};
    }
    std::vector<TemplateKind> out;
    for (const auto& t : template_names) out.push_back(*parse_template(t));
    return out;
  }

  std::vector<BucketSpec> bucket_specs() const {
    std::vector<BucketSpec> out;
    for (const auto& b : buckets) out.push_back(BucketSpec::parse(b));
    return out;
  }

  /// Loads the optional conjunction and stop-word files.
  ExperimentOptions experiment_options(const std::string& source_lang,
                                       const std::string& target_lang) const {
    ExperimentOptions opt;
    opt.baseline = true;
    opt.templates = template_kinds();
    opt.beam_width = beam;
    opt.alpha = alpha;
    opt.max_free_len = max_len;
    opt.candidates = candidates;
    opt.fms_threshold = fms_threshold;
    opt.self_tm = self_tm;
    opt.jobs = jobs;
    opt.source_lang = source_lang;
    opt.target_lang = target_lang;
    if (!conjunctions.empty()) opt.conjunctions.load_overrides(conjunctions);
    opt.source_stop = source_stop_words.empty()
                          ? StopWords::builtin(source_lang)
                          : StopWords::from_file(source_stop_words);
    opt.target_stop = target_stop_words.empty()
                          ? StopWords::builtin(target_lang)
                          : StopWords::from_file(target_stop_words);
    return opt;
  }
};

}  // namespace tmprompt
