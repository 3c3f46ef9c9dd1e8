#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "cascade/corpus.hpp"
#include "cascade/errors.hpp"
#include "synthetic.hpp"

using namespace cascade;
using cascade::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

Corpus labeled(std::size_t pos, std::size_t neg) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < pos; ++i) docs.push_back({"p" + std::to_string(i), "text", 1});
  for (std::size_t i = 0; i < neg; ++i) docs.push_back({"n" + std::to_string(i), "text", 0});
  return Corpus(std::move(docs), {"negative", "positive"});
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("jsonl corpus with two classes") {
  TempDir dir;
  write(dir / "c.jsonl",
        "{\"id\":\"a\",\"text\":\"x\",\"label\":\"pos\"}\n{\"id\":\"b\",\"text\":\"y\",\"label\":\"neg\"}\n"
        "{\"id\":\"c\",\"text\":\"z\",\"label\":\"pos\"}\n{\"id\":\"d\",\"text\":\"w\",\"label\":\"neg\"}\n");
  const auto c = load_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
  CHECK(c.size() == 4);
  CHECK(c.class_count() == 2);
  CHECK(c.classes() == std::vector<std::string>{"pos", "neg"});
  CHECK(c.labels() == std::vector<ClassIndex>{0, 1, 0, 1});
}

TEST_CASE("classes.json next to the corpus fixes the class order") {
  TempDir dir;
  write(dir / "c.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"label\":\"positive\"}\n"
                         "{\"id\":\"b\",\"text\":\"y\",\"label\":\"negative\"}\n");
  write(dir / "classes.json", "[\"negative\", \"positive\"]");
  const auto c = load_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
  CHECK(c.classes() == std::vector<std::string>{"negative", "positive"});
  CHECK(c.labels() == std::vector<ClassIndex>{1, 0});
}

TEST_CASE("csv corpus with quoted commas and unlabeled rows") {
  TempDir dir;
  write(dir / "c.csv", "id,text,label\na,\"hello, world\",positive\nb,\"say \"\"hi\"\"\",\n");
  LoadOptions opts;
  opts.classes = std::vector<std::string>{"negative", "positive"};
  const auto c = load_corpus(dir / "c.csv", CorpusFormat::csv, opts);
  REQUIRE(c.size() == 2);
  CHECK(c[0].text == "hello, world");
  CHECK(c[1].text == "say \"hi\"");
  CHECK(c[0].label == ClassIndex{1});
  CHECK_FALSE(c[1].label.has_value());
  CHECK_FALSE(c.fully_labeled());
  CHECK_THROWS_AS(c.labels(), InputError);
}

TEST_CASE("loader errors") {
  TempDir dir;
  write(dir / "empty.jsonl", "");
  CHECK(error_of([&] { load_corpus(dir / "empty.jsonl", CorpusFormat::jsonl); }).find("empty corpus") !=
        std::string::npos);

  write(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{not json}\n");
  CHECK(error_of([&] { load_corpus(dir / "bad.jsonl", CorpusFormat::jsonl); }).find("line 2") != std::string::npos);

  write(dir / "dup.jsonl", "{\"id\":\"a\",\"text\":\"x\",\"label\":\"p\"}\n{\"id\":\"a\",\"text\":\"y\",\"label\":\"n\"}\n");
  CHECK(error_of([&] { load_corpus(dir / "dup.jsonl", CorpusFormat::jsonl); }).find("duplicate id 'a'") !=
        std::string::npos);

  write(dir / "neutral.jsonl", "{\"id\":\"r1\",\"text\":\"x\",\"label\":\"negative\"}\n"
                               "{\"id\":\"r7\",\"text\":\"y\",\"label\":\"neutral\"}\n");
  LoadOptions opts;
  opts.classes = std::vector<std::string>{"negative", "positive"};
  const auto msg = error_of([&] { load_corpus(dir / "neutral.jsonl", CorpusFormat::jsonl, opts); });
  CHECK(msg.find("'r7'") != std::string::npos);
  CHECK(msg.find("neutral") != std::string::npos);

  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl", CorpusFormat::jsonl), InputError);
  CHECK_THROWS_AS(format_from_path("corpus.parquet"), InputError);
}

TEST_CASE("corpus round-trips through jsonl") {
  TempDir dir;
  const auto c = labeled(3, 2);
  write_corpus_jsonl(c, dir / "out.jsonl");
  write_classes_json(c.classes(), dir / "classes.json");
  const auto back = load_corpus(dir / "out.jsonl", CorpusFormat::jsonl);
  CHECK(back.ids() == c.ids());
  CHECK(back.labels() == c.labels());
  CHECK(back.classes() == c.classes());
}

TEST_CASE("exact divisibility puts one document of each class in every fold") {
  const auto c = labeled(5, 5);
  const auto plan = stratified_folds(c, 5, 42);
  std::map<std::pair<std::uint32_t, ClassIndex>, int> count;
  for (std::size_t i = 0; i < c.size(); ++i) ++count[{plan.assignment[i], *c[i].label}];
  for (std::uint32_t f = 0; f < 5; ++f) {
    CHECK(count[{f, 0}] == 1);
    CHECK(count[{f, 1}] == 1);
  }
}

TEST_CASE("eleven documents give fold totals {3,2,2,2,2}") {
  const auto c = labeled(6, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto plan = stratified_folds(c, 5, seed);
    std::vector<int> totals(5, 0);
    std::map<ClassIndex, std::vector<int>> per_class{{0, std::vector<int>(5)}, {1, std::vector<int>(5)}};
    for (std::size_t i = 0; i < c.size(); ++i) {
      ++totals[plan.assignment[i]];
      ++per_class[*c[i].label][plan.assignment[i]];
    }
    std::sort(totals.begin(), totals.end());
    CHECK(totals == std::vector<int>{2, 2, 2, 2, 3});
    for (const auto& [cls, sizes] : per_class) {
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("fold plans are deterministic and seed dependent") {
  const auto c = labeled(40, 37);
  CHECK(stratified_folds(c, 5, 7) == stratified_folds(c, 5, 7));
  CHECK(stratified_folds(c, 5, 7).assignment != stratified_folds(c, 5, 8).assignment);
  CHECK_THROWS_AS(stratified_folds(c, 1, 7), InputError);
  CHECK_THROWS_AS(stratified_folds(labeled(3, 10), 5, 7), InputError);
}

TEST_CASE("split partitions the corpus") {
  const auto c = labeled(60, 65);
  const auto plan = stratified_folds(c, 5, 3);
  for (std::uint32_t f = 0; f < 5; ++f) {
    const auto s = split(c, plan, f);
    for (const auto i : s.test) CHECK(plan.assignment[i] == f);
    CHECK(std::count(plan.assignment.begin(), plan.assignment.end(), f) == static_cast<long>(s.test.size()));
    std::vector<std::string> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      for (const auto i : *part) all.push_back(c[i].id);
    }
    auto expected = c.ids();
    std::sort(all.begin(), all.end());
    std::sort(expected.begin(), expected.end());
    CHECK(all == expected);
  }
}

TEST_CASE("validation fraction 0.2 of a 100-document pool") {
  // 5 folds of 25 -> pool of 100 (60 positive, 40 negative) for every test fold.
  const auto c = labeled(75, 50);
  const auto plan = stratified_folds(c, 5, 11);
  const auto s = split(c, plan, 2, 0.2);
  REQUIRE(s.train.size() + s.validation.size() == 100);
  CHECK(s.validation.size() == 20);
  int pos = 0;
  for (const auto i : s.validation) pos += *c[i].label == 1;
  CHECK(pos == 12);
  CHECK(split(c, plan, 2, 0.2).validation == s.validation);
}

TEST_CASE("split rejects bad arguments") {
  const auto c = labeled(10, 10);
  const auto plan = stratified_folds(c, 5, 1);
  CHECK_THROWS_AS(split(c, plan, 5), InputError);
  CHECK_THROWS_AS(split(c, plan, 0, 0.0), InputError);
  CHECK_THROWS_AS(split(c, plan, 0, 1.0), InputError);
}

TEST_CASE("corpus invariants") {
  CHECK_THROWS_AS(Corpus({{"a", "x", 0}, {"a", "y", 0}}, {"n", "p"}), InputError);
  CHECK_THROWS_AS(Corpus({{"a", "x", 2}}, {"n", "p"}), InputError);
  CHECK_THROWS_AS(Corpus({{"a", "x", 0}}, {"n", "n"}), InputError);
  const auto c = labeled(2, 2);
  CHECK(c.class_index("positive") == ClassIndex{1});
  CHECK_FALSE(c.class_index("neutral").has_value());
  CHECK(c.subset({3, 0}).ids() == std::vector<std::string>{"n1", "p0"});
}
