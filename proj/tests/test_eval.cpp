#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mnmt/common.hpp"
#include "mnmt/eval.hpp"

using namespace mnmt;
using namespace mnmt::eval;
using corpus::tokenize;

namespace {

std::vector<Sentence> lines(std::initializer_list<const char*> ls) {
  std::vector<Sentence> out;
  for (const char* l : ls) out.push_back(tokenize(l));
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("BLEU identity, clipping and zero overlap") {
    const auto refs = lines({"the cat sat on the mat", "a dog ran in the park today"});
    CHECK(bleu(refs, refs).bleu == doctest::Approx(1.0));

    const BleuReport clipped = bleu(lines({"the the the"}), lines({"the cat"}));
    CHECK(clipped.precisions[0] == doctest::Approx(1.0 / 3.0));
    CHECK(clipped.matches[0] == 1);
    CHECK(clipped.totals[0] == 3);

    CHECK(bleu(lines({"x y z w"}), lines({"a b c d"})).bleu == 0.0);
  }

  TEST_CASE("BLEU is case-insensitive and applies the brevity penalty") {
    CHECK(bleu(std::vector<Sentence>{{"The", "Cat", "Sat", "Down"}}, lines({"the cat sat down"})).bleu ==
          doctest::Approx(1.0));
    const BleuReport short_hyp = bleu(lines({"a b c d"}), lines({"a b c d e f"}));
    CHECK(short_hyp.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)));
    CHECK(short_hyp.bleu == doctest::Approx(std::exp(-0.5)));
    CHECK(bleu(lines({"a b c d e f g"}), lines({"a b c d e f"})).brevity_penalty == 1.0);
  }

  TEST_CASE("multiple references: max clipping and closest length") {
    std::vector<std::vector<Sentence>> refs{lines({"a b c d e f g h", "a b c d x"})};
    const BleuReport r = bleu(lines({"a b c d x"}), refs);
    CHECK(r.reference_length == 5);
    CHECK(r.bleu == doctest::Approx(1.0));
  }

  TEST_CASE("BLEU invariants") {
    auto hyp = lines({"the cat sat on the mat", "a dog ran in the park", "birds fly over the hills now"});
    const auto ref = lines({"the cat sat on a mat", "the dog ran in the park", "birds fly over the green hills"});
    const double base = bleu(hyp, ref).bleu;

    auto hyp_perm = std::vector<Sentence>{hyp[2], hyp[0], hyp[1]};
    auto ref_perm = std::vector<Sentence>{ref[2], ref[0], ref[1]};
    CHECK(bleu(hyp_perm, ref_perm).bleu == doctest::Approx(base).epsilon(1e-14));

    double prev = base;
    for (auto& s : hyp) {
      for (auto& w : s) {
        w = "junk";
        const double now = bleu(hyp, ref).bleu;
        CHECK(now <= prev + 1e-15);
        prev = now;
      }
    }
    CHECK_THROWS_AS(bleu(lines({"a"}), lines({"a", "b"})), Error);
  }

  TEST_CASE("sentence BLEU is smoothed") {
    const double s = sentence_bleu(tokenize("a b x"), {tokenize("a b c")});
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }

  TEST_CASE("OOV recall") {
    std::vector<OovAnnotation> ann;
    for (std::size_t i = 0; i < 5; ++i) ann.push_back({i, "o" + std::to_string(i), "g" + std::to_string(i), OovSubset::TInv});
    const auto all = lines({"g0", "x g1", "g2 y", "g3", "g4"});
    CHECK(oov_recall(all, ann).t_inv.recall() == 1.0);
    const auto none = lines({"a", "b", "c", "d", "e"});
    CHECK(oov_recall(none, ann).overall.recall() == 0.0);
    const auto two = lines({"g0", "b", "g2", "d", "e"});
    CHECK(oov_recall(two, ann).overall.recall() == doctest::Approx(0.4));

    ann[1].subset = OovSubset::TOov;
    const RecallReport r = oov_recall(all, ann);
    CHECK(r.t_inv.total + r.t_oov.total == r.overall.total);
    CHECK(r.t_oov.total == 1);
    CHECK_THROWS_AS(oov_recall(all, {}), Error);

    const auto path = std::filesystem::temp_directory_path() / "mnmt_ann.tsv";
    save_oov_annotations(path, ann, artifact_header("", 0));
    const auto back = load_oov_annotations(path);
    REQUIRE(back.size() == 5);
    CHECK(back[1].subset == OovSubset::TOov);
    CHECK(back[3].gold_translation == "g3");
  }

  TEST_CASE("frequency bins on a hand-built micro-suite") {
    corpus::FrequencyTable counts;
    counts.add("common", 10);
    counts.add("mid", 4);
    counts.add("rare", 1);
    const auto sources = lines({"common zero", "rare common", "mid common", "common"});
    const auto outputs = lines({"a b x", "a b b", "c d", "e"});
    std::vector<std::vector<Sentence>> refs;
    for (const auto& r : lines({"a b c", "a a b", "c d", "e f g h"})) refs.push_back({r});

    CHECK(min_training_frequency(sources[0], counts) == 0);
    const FrequencyBins fb = frequency_analysis(outputs, refs, sources, counts, {0, 1, 5});
    CHECK(fb.assignment == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(fb.bins[0].recall() == doctest::Approx(2.0 / 3.0));
    CHECK(fb.bins[1].recall() == doctest::Approx(2.0 / 3.0));
    CHECK(fb.bins[2].recall() == doctest::Approx(1.0));
    CHECK(fb.bins[3].recall() == doctest::Approx(0.25));

    CHECK(default_boundaries(sources, counts) == std::array<std::size_t, 3>{0, 1, 4});
    CHECK_THROWS_AS(frequency_analysis(outputs, refs, sources, counts, {3, 1, 5}), Error);
  }
}
