// Builds every prompt for one input/TM pair and prints the encoder side
// and the forced decoder prefix.

#include <iostream>

#include "tmprompt/tmprompt.hpp"

using namespace tmprompt;

int main() {
  const Tokens input = tokenize("She gave us a full account of the traffic accident .");
  const Tokens src_tm = tokenize("She gave the police a full account of the incident .");
  const Tokens tgt_tm = tokenize(
      "Sie gab der Polizei einen voll@@ ständigen Bericht über den Vorfall .");

  std::cout << "FMS " << fms(normalize_for_retrieval(input),
                             normalize_for_retrieval(src_tm))
            << "\n\n";

  // A small dictionary standing in for a trained alignment table.
  Model1Table dict;
  const std::pair<const char*, const char*> links[] = {
      {"She", "Sie"},     {"gave", "gab"},         {"the", "der"},
      {"the", "den"},     {"police", "Polizei"},   {"a", "einen"},
      {"full", "voll@@"}, {"full", "ständigen"},   {"account", "Bericht"},
      {"of", "über"},     {"incident", "Vorfall"}, {".", "."}};
  for (const auto& [e, f] : links) dict.set(std::string_view(e), f, 0.5);

  std::vector<PromptedPair> prompts;
  for (auto kind : kSentenceTemplates) {
    prompts.push_back(
        apply_sentence_template(kind, src_tm, tgt_tm, input, "en", "de"));
  }
  const auto frags = build_fragment_tm(input, src_tm, tgt_tm, dict,
                                       StopWords::builtin("en"),
                                       StopWords::builtin("de"));
  prompts.push_back(apply_fragment_template(frags.source_fragments,
                                            frags.target_fragments, input));

  for (const auto& p : prompts) {
    std::cout << to_string(p.kind) << "\n  encoder: " << join(p.encoder_tokens)
              << "\n  prefix:  " << join(p.forced_prefix) << "\n";
  }
}
