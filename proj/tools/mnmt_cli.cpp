#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mnmt/aligner.hpp"
#include "mnmt/checkpoint.hpp"
#include "mnmt/common.hpp"
#include "mnmt/config.hpp"
#include "mnmt/eval.hpp"
#include "mnmt/memory_train.hpp"
#include "mnmt/synthetic.hpp"
#include "mnmt/train.hpp"
#include "mnmt/translator.hpp"

using namespace mnmt;
namespace fs = std::filesystem;

namespace {

// Every option is registered as a string so that values from --config and from the
// command line go through the same typed accessors of Config.
struct Command {
  CLI::App* app;
  std::vector<std::string> keys;
  std::map<std::string, std::string> storage;
  std::map<std::string, bool> switches;
  std::string config_path;

  void option(const std::string& key, const std::string& help) {
    keys.push_back(key);
    app->add_option("--" + key, storage[key], help);
  }
  void flag(const std::string& key, const std::string& help) {
    keys.push_back(key);
    app->add_flag("--" + key, switches[key], help);
  }

  Config resolve() const {
    Config c = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& key : keys) {
      if (app->count("--" + key) == 0) continue;
      if (switches.count(key)) {
        c.set(key, switches.at(key) ? "true" : "false");
      } else {
        c.set(key, storage.at(key));
      }
    }
    return c;
  }
};

std::string required(const Config& c, const std::string& key) {
  if (!c.has(key)) throw ConfigError("missing required setting --" + key);
  return c.text(key, "");
}

// The output location is not an input, so it stays out of the config hash.
std::string header(const Config& c) {
  Config hashed;
  for (const auto& [k, v] : c.values()) {
    if (k != "output") hashed.set(k, v);
  }
  return artifact_header(hashed.canonical(), c.integer("seed", 1));
}

void require_exists(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::Io, "input does not exist: " + p.string());
}

corpus::ParallelCorpus load_corpus(const std::string& prefix) {
  require_exists(prefix + ".src");
  require_exists(prefix + ".tgt");
  return corpus::ParallelCorpus::load(prefix);
}

corpus::Vocabulary load_vocab(const std::string& path) {
  require_exists(path);
  return corpus::Vocabulary::load(path);
}

nmt::Model load_model(const std::string& path) {
  require_exists(path);
  return nmt::Model::from_parameters(num::from_named(num::load_checkpoint(path)));
}

void save_params(const fs::path& path, const num::ParameterSet& ps, const std::string& head) {
  num::save_checkpoint(path, num::to_named(ps), head);
}

std::vector<std::size_t> parse_boundaries(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("bad bin boundary '" + item + "'");
    }
  }
  if (out.size() != 3) throw ConfigError("--boundaries needs exactly three comma-separated values");
  return out;
}

std::vector<corpus::Sentence> side(const corpus::ParallelCorpus& c, bool source) {
  std::vector<corpus::Sentence> out;
  for (const auto& p : c.pairs()) out.push_back(source ? p.source : p.target);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

// ---- subcommands ---------------------------------------------------------------------

void build_vocab(const Config& c) {
  const auto corpus = load_corpus(required(c, "corpus"));
  const std::string side_name = c.text("side", "source");
  if (side_name != "source" && side_name != "target") throw ConfigError("--side must be source or target");
  const auto vocab = corpus::build_vocab(corpus, side_name == "source" ? corpus::Side::Source : corpus::Side::Target,
                                         c.integer("max-size", 1000));
  vocab.save(required(c, "output"), header(c));
}

void align_cmd(const Config& c) {
  const auto corpus = load_corpus(required(c, "corpus"));
  const auto run = align::align_corpus(corpus, c.integer("iterations", 5));
  run.dictionary.save(required(c, "output"), header(c));
  for (const auto* r : {&run.forward, &run.reverse}) {
    std::fprintf(stderr, "%s log-likelihood:", r == &run.forward ? "forward" : "reverse");
    for (double ll : r->log_likelihood) std::fprintf(stderr, " %.6f", ll);
    std::fprintf(stderr, "\n");
  }
}

void build_memory(const Config& c) {
  const std::string path = required(c, "dictionary");
  require_exists(path);
  const auto dict = align::TranslationDictionary::load(path);
  memory::build_global_memory(dict, c.integer("k", 2)).save(required(c, "output"), header(c));
}

void train_cmd(const Config& c) {
  const auto train = load_corpus(required(c, "corpus"));
  const auto sv = load_vocab(required(c, "source-vocab"));
  const auto tv = load_vocab(required(c, "target-vocab"));
  corpus::ParallelCorpus dev;
  if (c.has("dev")) dev = load_corpus(c.text("dev", ""));
  nmt::ModelConfig mc;
  mc.source_vocab = sv.size();
  mc.target_vocab = tv.size();
  mc.embed_dim = c.integer("embed-dim", mc.embed_dim);
  mc.hidden_dim = c.integer("hidden-dim", mc.hidden_dim);
  mc.attention_dim = c.integer("attention-dim", mc.attention_dim);
  mc.readout_dim = c.integer("readout-dim", mc.readout_dim);
  mc.maxout_pool = c.integer("maxout-pool", mc.maxout_pool);
  mc.init_scale = c.real("init-scale", mc.init_scale);
  nmt::TrainConfig tc;
  tc.batch_size = c.integer("batch", tc.batch_size);
  tc.epochs = c.integer("epochs", tc.epochs);
  tc.clip_norm = c.real("clip", tc.clip_norm);
  tc.rho = c.real("rho", tc.rho);
  tc.epsilon = c.real("epsilon", tc.epsilon);
  tc.seed = c.integer("seed", 1);
  tc.threads = c.integer("threads", 0);
  const auto result = nmt::train_nmt(nmt::encode_corpus(train, sv, tv), nmt::encode_corpus(dev, sv, tv), mc, tc,
                                     [](const nmt::EpochReport& r) {
                                       std::fprintf(stderr, "epoch %zu train %.4f dev-ppl %.4f\n", r.epoch,
                                                    r.train_loss, r.dev_perplexity);
                                     });
  save_params(required(c, "output"), result.model.params(), header(c));
}

void train_memory(const Config& c) {
  const auto train = load_corpus(required(c, "corpus"));
  corpus::ParallelCorpus dev;
  if (c.has("dev")) dev = load_corpus(c.text("dev", ""));
  const auto model = load_model(required(c, "model"));
  const auto sv = load_vocab(required(c, "source-vocab"));
  const auto tv = load_vocab(required(c, "target-vocab"));
  const std::string mem = required(c, "memory");
  require_exists(mem);
  const auto global = memory::GlobalMemory::load(mem);
  memory::MemoryTrainConfig mc;
  mc.epochs = c.integer("epochs", mc.epochs);
  mc.batch_size = c.integer("batch", mc.batch_size);
  mc.rho = c.real("rho", mc.rho);
  mc.epsilon = c.real("epsilon", mc.epsilon);
  mc.clip_norm = c.real("clip", mc.clip_norm);
  mc.seed = c.integer("seed", 1);
  mc.attention_dim = c.integer("attention-dim", mc.attention_dim);
  mc.threads = c.integer("threads", 0);
  mc.patience = c.integer("patience", mc.patience);
  const auto result = memory::train_memory_attention(
      train, dev, model, sv, tv, global, memory::MemoryVariant::parse(c.text("variant", "sy_xy")), mc,
      [](const memory::MemoryEpochReport& r) {
        std::fprintf(stderr, "epoch %zu train-ce %.4f dev-ce %.4f trained %zu skipped %zu\n", r.epoch, r.train_ce,
                     r.dev_ce, r.trained_steps, r.skipped_steps);
      });
  save_params(required(c, "output"), result.attention.params(), header(c));
}

void translate_cmd(const Config& c) {
  const std::string input = required(c, "input");
  require_exists(input);
  const auto sources = corpus::read_sentences(input);
  const auto model = load_model(required(c, "model"));
  const auto sv = load_vocab(required(c, "source-vocab"));
  const auto tv = load_vocab(required(c, "target-vocab"));

  pipeline::Translator t;
  t.model = &model;
  t.source_vocab = &sv;
  t.target_vocab = &tv;
  pipeline::TranslateOptions opt;
  opt.beta = c.real("beta", opt.beta);
  opt.beam.beam = c.integer("beam", opt.beam.beam);
  opt.threads = c.integer("threads", 0);
  memory::check_beta(opt.beta);

  std::optional<memory::GlobalMemory> global;
  std::optional<memory::MemoryAttention> attention;
  std::optional<align::TranslationDictionary> lexicon;
  std::optional<oov::OovDictionary> table;
  if (c.flag("no-memory", false)) {
    opt.mode = pipeline::Mode::Baseline;
  } else if (c.flag("lexical", false)) {
    opt.mode = pipeline::Mode::Lexical;
    const std::string path = required(c, "dictionary");
    require_exists(path);
    lexicon = align::TranslationDictionary::load(path);
    t.lexicon = &*lexicon;
  } else {
    opt.mode = pipeline::Mode::Memory;
    const std::string mem = required(c, "memory");
    const std::string att = required(c, "memory-model");
    require_exists(mem);
    require_exists(att);
    global = memory::GlobalMemory::load(mem);
    attention = memory::MemoryAttention::from_parameters(num::from_named(num::load_checkpoint(att)),
                                                         model.config().embed_dim);
    if (c.has("variant") && memory::MemoryVariant::parse(c.text("variant", "")) != attention->variant()) {
      throw Error(ErrorCode::InvalidArgument, "--variant " + c.text("variant", "") + " does not match the trained " +
                                                  attention->variant().name() + " memory attention");
    }
    t.global = &*global;
    t.attention = &*attention;
  }
  if (c.has("oov-table")) {
    const std::string path = c.text("oov-table", "");
    require_exists(path);
    table = oov::OovDictionary::load(path);
    table->validate(sv, tv);
    t.oov_table = &*table;
  }
  const auto outputs = pipeline::translate_all(t, sources, opt);
  const std::string out = c.text("output", "-");
  if (out == "-") {
    for (const auto& s : outputs) std::cout << corpus::join(s) << '\n';
  } else {
    corpus::write_sentences(out, outputs, header(c));
  }
}

void evaluate_cmd(const Config& c) {
  const std::string hyp_path = required(c, "hypotheses");
  require_exists(hyp_path);
  const auto hyps = corpus::read_sentences(hyp_path);
  std::vector<std::vector<corpus::Sentence>> refs(hyps.size());
  std::stringstream ss(required(c, "references"));
  std::string ref_path;
  while (std::getline(ss, ref_path, ',')) {
    require_exists(ref_path);
    const auto r = corpus::read_sentences(ref_path);
    if (r.size() != hyps.size()) {
      throw Error(ErrorCode::LengthMismatch, ref_path + " has " + std::to_string(r.size()) + " lines, hypotheses have " +
                                                 std::to_string(hyps.size()));
    }
    for (std::size_t i = 0; i < r.size(); ++i) refs[i].push_back(r[i]);
  }
  std::string report = header(c) + "\n" + eval::format_bleu(eval::bleu(hyps, refs));
  if (c.has("oov-annotations")) {
    const std::string path = c.text("oov-annotations", "");
    require_exists(path);
    report += eval::format_recall(eval::oov_recall(hyps, eval::load_oov_annotations(path)));
  }
  write_text(c.text("output", "-"), report);
}

void analyze_freq(const Config& c) {
  const auto test = load_corpus(required(c, "test"));
  const auto train = load_corpus(required(c, "train"));
  const std::string base_path = required(c, "baseline"), mem_path = required(c, "mnmt");
  require_exists(base_path);
  require_exists(mem_path);
  const auto sources = side(test, true);
  std::vector<std::vector<corpus::Sentence>> refs;
  for (const auto& p : test.pairs()) refs.push_back({p.target});
  std::array<std::size_t, 3> bounds{};
  if (c.has("boundaries")) {
    const auto b = parse_boundaries(c.text("boundaries", ""));
    std::copy(b.begin(), b.end(), bounds.begin());
  } else {
    bounds = eval::default_boundaries(sources, train.source_counts());
  }
  const auto base =
      eval::frequency_analysis(corpus::read_sentences(base_path), refs, sources, train.source_counts(), bounds);
  const auto mem =
      eval::frequency_analysis(corpus::read_sentences(mem_path), refs, sources, train.source_counts(), bounds);
  std::ostringstream out;
  out << header(c) << "\nbin\tmin_freq_range\tcount\trecall_baseline\trecall_mnmt\n";
  std::size_t lo = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    out << b + 1 << '\t' << lo << '-' << (b < 3 ? std::to_string(bounds[b]) : std::string("inf")) << '\t'
        << base.bins[b].sentences << '\t' << base.bins[b].recall() << '\t' << mem.bins[b].recall() << '\n';
    if (b < 3) lo = bounds[b] + 1;
  }
  write_text(c.text("output", "-"), out.str());
}

void make_synthetic(const Config& c) {
  const std::string kind = required(c, "kind");
  const fs::path out = required(c, "output");
  const std::uint64_t seed = c.integer("seed", 1);
  const std::string head = header(c);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  auto save_gold = [&](const synthetic::GoldTable& gold) {
    std::ofstream g(out.string() + ".gold");
    if (!g) throw Error(ErrorCode::Io, "cannot write " + out.string() + ".gold");
    g << head << '\n';
    for (const auto& [s, t] : gold) g << s << '\t' << t << '\n';
  };
  if (kind == "cipher") {
    const auto data = synthetic::make_cipher(c.integer("pairs", 500), c.integer("vocab", 80), seed,
                                             c.integer("min-length", 3), c.integer("max-length", 8));
    data.corpus.save(out, head);
    save_gold(data.gold);
  } else if (kind == "copy") {
    synthetic::make_copy(c.integer("pairs", 1000), c.integer("vocab", 20), seed, c.integer("min-length", 3),
                         c.integer("max-length", 8))
        .save(out, head);
  } else if (kind == "lowres" || kind == "oov") {
    synthetic::LowResourceConfig lc;
    lc.train_pairs = c.integer("pairs", lc.train_pairs);
    lc.dev_pairs = c.integer("dev-pairs", lc.dev_pairs);
    lc.test_pairs = c.integer("test-pairs", lc.test_pairs);
    lc.vocab = c.integer("vocab", lc.vocab);
    lc.tail_fraction = c.real("tail-fraction", lc.tail_fraction);
    lc.tail_mass = c.real("tail-mass", lc.tail_mass);
    lc.zipf_exponent = c.real("zipf", lc.zipf_exponent);
    lc.seed = seed;
    const auto data = synthetic::make_low_resource(lc);
    if (kind == "lowres") {
      data.train.save(out.string() + ".train", head);
      data.dev.save(out.string() + ".dev", head);
      data.test.save(out.string() + ".test", head);
      save_gold(data.lexicon.gold);
    } else {
      const auto suite = synthetic::make_oov_suite(data.lexicon, c.integer("sentences", 60), seed + 1);
      suite.test.save(out, head);
      suite.table.save(out.string() + ".oov", head);
      eval::save_oov_annotations(out.string() + ".ann", suite.annotations, head);
    }
  } else {
    throw ConfigError("--kind must be one of cipher, copy, lowres, oov");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-augmented neural machine translation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::vector<std::unique_ptr<Command>> commands;
  std::map<CLI::App*, std::function<void(const Config&)>> handlers;
  auto add = [&](const std::string& name, const std::string& help, std::function<void(const Config&)> fn,
                 std::initializer_list<std::pair<const char*, const char*>> options,
                 std::initializer_list<std::pair<const char*, const char*>> flags = {}) {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, help);
    cmd->app->add_option("--config", cmd->config_path, "key = value file; flags override it");
    cmd->option("seed", "random seed, recorded in every artifact header");
    for (const auto& [key, h] : options) cmd->option(key, h);
    for (const auto& [key, h] : flags) cmd->flag(key, h);
    handlers[cmd->app] = std::move(fn);
    commands.push_back(std::move(cmd));
  };

  add("build-vocab", "build a source or target vocabulary", build_vocab,
      {{"corpus", "corpus prefix (.src/.tgt)"}, {"side", "source or target"}, {"max-size", "vocabulary cap"},
       {"output", "vocabulary file"}});
  add("align", "IBM Model 1 both ways, intersect, extract a dictionary", align_cmd,
      {{"corpus", "corpus prefix"}, {"iterations", "EM iterations"}, {"output", "dictionary file"}});
  add("build-memory", "keep the top-k translations per source word", build_memory,
      {{"dictionary", "dictionary file"}, {"k", "translations per source word"}, {"output", "global memory file"}});
  add("train", "train the attention NMT model", train_cmd,
      {{"corpus", "training corpus prefix"},
       {"dev", "dev corpus prefix"},
       {"source-vocab", "source vocabulary"},
       {"target-vocab", "target vocabulary"},
       {"embed-dim", "embedding size"},
       {"hidden-dim", "GRU state size"},
       {"attention-dim", "attention MLP width"},
       {"readout-dim", "maxout output size"},
       {"maxout-pool", "maxout pool size"},
       {"init-scale", "uniform init half-width"},
       {"batch", "minibatch size"},
       {"epochs", "training epochs"},
       {"clip", "global gradient norm bound"},
       {"rho", "AdaDelta decay"},
       {"epsilon", "AdaDelta epsilon"},
       {"threads", "worker threads (0: all cores)"},
       {"output", "model checkpoint"}});
  add("train-memory", "train the memory attention with the model frozen", train_memory,
      {{"corpus", "training corpus prefix"},
       {"dev", "dev corpus prefix"},
       {"model", "model checkpoint"},
       {"source-vocab", "source vocabulary"},
       {"target-vocab", "target vocabulary"},
       {"memory", "global memory file"},
       {"variant", "s_y, s_xy, sy_y or sy_xy"},
       {"attention-dim", "memory attention width"},
       {"batch", "minibatch size"},
       {"epochs", "maximum epochs"},
       {"patience", "epochs without dev improvement before stopping"},
       {"clip", "global gradient norm bound"},
       {"rho", "AdaDelta decay"},
       {"epsilon", "AdaDelta epsilon"},
       {"threads", "worker threads"},
       {"output", "memory attention checkpoint"}});
  add("translate", "decode a file of source sentences", translate_cmd,
      {{"input", "source sentences, one per line"},
       {"output", "output file ('-' for stdout)"},
       {"model", "model checkpoint"},
       {"source-vocab", "source vocabulary"},
       {"target-vocab", "target vocabulary"},
       {"memory", "global memory file"},
       {"memory-model", "memory attention checkpoint"},
       {"variant", "expected memory attention variant"},
       {"dictionary", "dictionary for --lexical"},
       {"oov-table", "OOV similar-word table"},
       {"beta", "memory interpolation weight in [0,1]"},
       {"beam", "beam width"},
       {"threads", "worker threads"}},
      {{"no-memory", "plain NMT decoding"}, {"lexical", "attention-weighted dictionary instead of memory attention"}});
  add("evaluate", "corpus BLEU and optional OOV recall", evaluate_cmd,
      {{"hypotheses", "system output"},
       {"references", "comma-separated reference files"},
       {"oov-annotations", "OOV annotation file"},
       {"output", "report file ('-' for stdout)"}});
  add("analyze-freq", "recall by minimum source-word training frequency", analyze_freq,
      {{"test", "test corpus prefix"},
       {"train", "training corpus prefix"},
       {"baseline", "baseline output"},
       {"mnmt", "memory-augmented output"},
       {"boundaries", "three comma-separated upper bounds (default: quartiles)"},
       {"output", "report file ('-' for stdout)"}});
  add("make-synthetic", "generate cipher, copy, low-resource or OOV corpora", make_synthetic,
      {{"kind", "cipher, copy, lowres or oov"},
       {"output", "output prefix"},
       {"pairs", "number of (training) pairs"},
       {"dev-pairs", "lowres dev pairs"},
       {"test-pairs", "lowres test pairs"},
       {"vocab", "vocabulary size per side"},
       {"min-length", "shortest sentence"},
       {"max-length", "longest sentence"},
       {"tail-fraction", "share of rare tail words"},
       {"tail-mass", "probability of drawing a tail word"},
       {"zipf", "Zipf exponent"},
       {"sentences", "OOV suite size"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (const auto& cmd : commands) {
      if (cmd->app->parsed()) handlers.at(cmd->app)(cmd->resolve());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "mnmt: config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "mnmt: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mnmt: %s\n", e.what());
    return 1;
  }
  return 0;
}
