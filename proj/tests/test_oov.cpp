#include <doctest.h>

#include <filesystem>
#include <set>

#include "mnmt/common.hpp"
#include "mnmt/oov.hpp"

using namespace mnmt;
using namespace mnmt::oov;

namespace {

corpus::Vocabulary vocab(std::initializer_list<const char*> words) {
  corpus::Vocabulary v;
  for (const char* w : words) v.add(w);
  return v;
}

}  // namespace

TEST_SUITE("oov") {
  TEST_CASE("source substitution") {
    const auto sv = vocab({"gene", "cell", "the"});
    OovDictionary dict;
    dict.add({"染色体", "chromosome", {"gene", "cell"}, {}});

    const Substitution a = substitute_source({"染色体"}, dict, sv);
    CHECK(a.tokens == corpus::Sentence{"gene"});
    REQUIRE(a.record.entries.size() == 1);
    CHECK(a.record.entries[0].borrowed == "gene");
    CHECK(a.record.entries[0].oov == "染色体");
    CHECK(a.substituted == std::vector<bool>{true});

    const Substitution b = substitute_source({"gene", "染色体"}, dict, sv);
    CHECK(b.tokens == corpus::Sentence{"gene", "cell"});

    const Substitution c = substitute_source({"the", "cell"}, dict, sv);
    CHECK(c.tokens == corpus::Sentence{"the", "cell"});
    CHECK(c.record.empty());

    // Repeated OOVs reuse the same borrowed word.
    const Substitution d = substitute_source({"染色体", "the", "染色体"}, dict, sv);
    CHECK(d.tokens == corpus::Sentence{"gene", "the", "gene"});

    // No usable candidate: the OOV stays and nothing is recorded.
    const Substitution e = substitute_source({"gene", "cell", "染色体"}, dict, sv);
    CHECK(e.tokens[2] == "染色体");
    CHECK(e.record.empty());
  }

  TEST_CASE("borrowed source words are unique and absent from the input") {
    const auto sv = vocab({"p", "q", "r"});
    OovDictionary dict;
    dict.add({"u1", "t1", {"p", "q"}, {}});
    dict.add({"u2", "t2", {"p", "r"}, {}});
    const Substitution s = substitute_source({"u1", "u2", "q"}, dict, sv);
    std::set<std::string> borrowed;
    for (const auto& r : s.record.entries) {
      CHECK(borrowed.insert(r.borrowed).second);
      CHECK(r.borrowed != "q");
    }
    CHECK(s.tokens == corpus::Sentence{"p", "r", "q"});
  }

  TEST_CASE("memory injection for T-INV and T-OOV") {
    const auto tv = vocab({"w", "v1", "v2", "x"});
    const num::Tensor ann = num::Tensor::matrix(2, 2, {1, 2, 3, 4});
    OovDictionary dict;
    dict.add({"inv", "w", {"s"}, {}});
    dict.add({"oov", "newword", {"s2"}, {"v1", "v2"}});

    RedirectionRecord rec;
    rec.entries.push_back({"s", "inv", BorrowSide::Source, 0});
    const memory::LocalMemory l1 = inject_oov_memory({}, rec, dict, ann, tv);
    REQUIRE(l1.size() == 1);
    CHECK(l1[0].target == "w");
    CHECK(l1[0].summary == num::Tensor::vector({1, 2}));

    RedirectionRecord rec2;
    rec2.entries.push_back({"s2", "oov", BorrowSide::Source, 1});
    const memory::LocalMemory l2 = inject_oov_memory({}, rec2, dict, ann, tv);
    REQUIRE(l2.size() == 1);
    CHECK(l2[0].target == "v1");
    CHECK(l2[0].summary == num::Tensor::vector({3, 4}));
    REQUIRE(rec2.target_marked("v1") != nullptr);
    CHECK(rec2.target_marked("v1")->oov == "newword");

    memory::LocalMemory busy;
    busy.add_occurrence(tv.id("v1"), "v1", 0, 1.0, ann);
    RedirectionRecord rec3;
    rec3.entries.push_back({"s2", "oov", BorrowSide::Source, 1});
    const memory::LocalMemory l3 = inject_oov_memory(busy, rec3, dict, ann, tv);
    CHECK(l3.size() == 2);
    CHECK(rec3.target_marked("v2") != nullptr);
    CHECK(rec3.target_marked("v1") == nullptr);
  }

  TEST_CASE("output redirection") {
    RedirectionRecord rec;
    rec.entries.push_back({"v", "染色体", BorrowSide::Target, 0});
    CHECK(redirect_output({"v"}, rec) == corpus::Sentence{"染色体"});
    CHECK(redirect_output({"a", "b"}, rec) == corpus::Sentence{"a", "b"});
    rec.entries.push_back({"u", "基因", BorrowSide::Target, 2});
    rec.entries.push_back({"s", "ignored", BorrowSide::Source, 3});
    const corpus::Sentence out = redirect_output({"u", "x", "v", "s", "v"}, rec);
    CHECK(out == corpus::Sentence{"基因", "x", "染色体", "s", "染色体"});
    for (const auto& w : out) CHECK(rec.target_marked(w) == nullptr);
  }

  TEST_CASE("table validation and file round trip") {
    const auto sv = vocab({"gene"});
    const auto tv = vocab({"v"});
    OovDictionary dict;
    dict.add({"染色体", "chromosome", {"gene"}, {"v"}});
    CHECK_NOTHROW(dict.validate(sv, tv));
    CHECK_THROWS_AS(dict.add({"染色体", "x", {"gene"}, {}}), Error);

    OovDictionary bad;
    bad.add({"q", "unknown", {"gene"}, {}});
    CHECK_THROWS_AS(bad.validate(sv, tv), Error);

    const auto path = std::filesystem::temp_directory_path() / "mnmt_oov.tsv";
    dict.save(path, artifact_header("", 0));
    const OovDictionary back = OovDictionary::load(path);
    REQUIRE(back.size() == 1);
    CHECK(back.find("染色体")->translation == "chromosome");
    CHECK(back.find("染色体")->target_similars == std::vector<std::string>{"v"});
  }
}
