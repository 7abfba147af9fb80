#include "mnmt/translator.hpp"

#include "mnmt/common.hpp"

namespace mnmt::pipeline {

corpus::Sentence translate_sentence(const Translator& t, const corpus::Sentence& source, const TranslateOptions& options) {
  if (source.empty()) return {};
  if (t.model == nullptr || t.source_vocab == nullptr || t.target_vocab == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "translator is missing the model or vocabularies");
  }
  oov::Substitution sub{source, {}, std::vector<bool>(source.size(), false)};
  if (t.oov_table != nullptr) sub = oov::substitute_source(source, *t.oov_table, *t.source_vocab);
  const corpus::Ids ids = corpus::encode(sub.tokens, *t.source_vocab);

  std::vector<nmt::Hypothesis> ranked;
  switch (options.mode) {
    case Mode::Baseline:
      ranked = nmt::beam_search(*t.model, ids, options.beam);
      break;
    case Mode::Lexical: {
      if (t.lexicon == nullptr) throw Error(ErrorCode::InvalidArgument, "lexical mode needs a dictionary");
      const memory::LexicalHook hook(*t.lexicon, sub.tokens, *t.target_vocab, options.beta);
      ranked = nmt::beam_search(*t.model, ids, options.beam, std::cref(hook));
      break;
    }
    case Mode::Memory: {
      if (t.global == nullptr || t.attention == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "memory mode needs a global memory and memory attention");
      }
      const nmt::EncoderStates enc = nmt::encode(*t.model, ids);
      memory::LocalMemory local =
          memory::build_local_memory(sub.tokens, enc.annotations, *t.global, *t.target_vocab, sub.substituted);
      if (t.oov_table != nullptr) {
        local = oov::inject_oov_memory(std::move(local), sub.record, *t.oov_table, enc.annotations, *t.target_vocab);
      }
      const memory::MemoryHook hook(*t.model, *t.attention, std::move(local), options.beta);
      ranked = nmt::beam_search(*t.model, ids, options.beam, std::cref(hook));
      break;
    }
  }
  const corpus::Sentence out = corpus::decode(nmt::best_tokens(ranked), *t.target_vocab);
  return oov::redirect_output(out, sub.record);
}

std::vector<corpus::Sentence> translate_all(const Translator& t, const std::vector<corpus::Sentence>& sources,
                                            const TranslateOptions& options) {
  std::vector<corpus::Sentence> out(sources.size());
  const std::size_t threads = options.threads == 0 ? default_threads() : options.threads;
  parallel_for(sources.size(), threads, [&](std::size_t i) { out[i] = translate_sentence(t, sources[i], options); });
  return out;
}

}  // namespace mnmt::pipeline
