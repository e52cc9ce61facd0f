#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "dynts/synthdata.hpp"

using namespace dynts;

namespace {

// Task-rule oracle: recover the answer from the question plus an arbitrary
// subset of trace tokens (given with their original positions).
std::vector<int> derive_answer(const Vocab& vocab, const std::vector<int>& question,
                               const std::vector<std::pair<int, int>>& kept) {
  int query = -1;
  for (int t : question) {
    if (vocab.is_key(t)) query = t;
  }
  std::vector<int> answer;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i].second != query) continue;
    // expect VAL then digits at consecutive original positions
    std::size_t j = i + 1;
    if (j >= kept.size() || kept[j].second != vocab.val() ||
        kept[j].first != kept[i].first + 1) {
      continue;
    }
    int pos = kept[j].first;
    for (++j; j < kept.size() && vocab.is_digit(kept[j].second) && kept[j].first == pos + 1; ++j) {
      answer.push_back(kept[j].second);
      ++pos;
    }
    break;
  }
  return answer;
}

}  // namespace

TEST_CASE("vocab map is bijective and disjoint") {
  Vocab v;
  std::set<std::string> seen;
  for (int t = 0; t < v.size(); ++t) {
    const auto s = v.symbol(t);
    CHECK(seen.insert(s).second);
    CHECK(v.id(s) == t);
  }
  CHECK(v.size() <= 256);
  CHECK(v.think_open() != v.think_close());
  for (int t = 0; t < v.size(); ++t) {
    const int kinds = int(v.is_digit(t)) + int(v.is_key(t)) + int(v.is_filler(t)) +
                      int(t == v.val());
    CHECK(kinds <= 1);
  }
}

TEST_CASE("degenerate instance") {
  TaskParams p;
  p.num_keys = 1;
  p.num_distractor_pairs = 0;
  p.filler_length = 0;
  p.digits_per_value = 1;
  p.seed = 0;
  const Vocab v = p.vocab();
  const Instance inst = gen_instance(p);
  REQUIRE(inst.trace.size() == 3);
  CHECK(inst.trace[0] == v.key(0));
  CHECK(inst.trace[1] == v.val());
  CHECK(v.is_digit(inst.trace[2]));
  CHECK(inst.answer == std::vector<int>{inst.trace[2]});
  for (bool b : inst.critical_mask) CHECK(b);

  const auto seq = assemble_sequence(v, inst);
  CHECK(seq.size() == inst.question.size() + 1 + 3 + 1 + 1 + 1);
}

TEST_CASE("determinism and distractor structure") {
  TaskParams p;
  p.seed = 7;
  p.num_keys = 4;
  p.num_distractor_pairs = 3;
  p.filler_length = 40;
  p.digits_per_value = 2;
  const Instance a = gen_instance(p);
  const Instance b = gen_instance(p);
  CHECK(a.trace == b.trace);
  CHECK(a.question == b.question);
  CHECK(a.answer == b.answer);
  CHECK(a.critical_mask == b.critical_mask);

  int criticals = 0;
  for (bool m : a.critical_mask) criticals += m;
  CHECK(criticals == 4);  // K, VAL, d, d
  CHECK(a.trace.size() == 4u * 4u + 40u);
}

TEST_CASE("gen_dataset properties") {
  TaskParams p;
  auto data = gen_dataset(p, 1, 42);
  CHECK(data.size() == 1);
  CHECK(data[0].trace == gen_instance(p, 42).trace);

  auto big = gen_dataset(p, 30, 0);
  std::set<std::pair<int, std::vector<int>>> bindings;
  std::size_t mask_count = 0;
  for (const auto& inst : big) {
    int crit = 0;
    for (bool m : inst.critical_mask) crit += m;
    if (mask_count == 0) mask_count = crit;
    CHECK(static_cast<std::size_t>(crit) == mask_count);
    CHECK(bindings.insert({inst.question[1], inst.answer}).second);
  }

  // overlapping windows agree element-wise
  auto w1 = gen_dataset(p, 10, 5);
  auto w2 = gen_dataset(p, 10, 9);
  for (int i = 0; i < 6; ++i) {
    CHECK(w1[4 + i].trace == w2[i].trace);
  }

  TaskParams tiny;
  tiny.num_keys = 1;
  tiny.digits_per_value = 1;
  CHECK_THROWS_AS(gen_dataset(tiny, 11, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_dataset(p, 0, 0), std::invalid_argument);
}

TEST_CASE("answer is a function of the critical tokens alone") {
  TaskParams p;
  p.digits_per_value = 2;
  p.num_distractor_pairs = 3;
  const Vocab v = p.vocab();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Instance inst = gen_instance(p, seed);
    std::vector<std::pair<int, int>> kept;
    for (std::size_t i = 0; i < inst.trace.size(); ++i) {
      if (inst.critical_mask[i]) kept.emplace_back(static_cast<int>(i), inst.trace[i]);
    }
    CHECK(derive_answer(v, inst.question, kept) == inst.answer);
    // filler ids never collide with key/value/digit ids
    for (std::size_t i = 0; i < inst.trace.size(); ++i) {
      if (v.is_filler(inst.trace[i])) {
        CHECK(!inst.critical_mask[i]);
      }
    }
  }
}

TEST_CASE("max_seq_len is enforced") {
  TaskParams p;
  p.filler_length = 400;
  CHECK_THROWS_AS(gen_instance(p, 0), std::invalid_argument);
}

TEST_CASE("jsonl round trip") {
  TaskParams p;
  auto data = gen_dataset(p, 5, 3);
  const std::string path = "synthdata_test_tmp.jsonl";
  write_dataset_jsonl(path, data);
  auto back = read_dataset_jsonl(path);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].seed == data[i].seed);
    CHECK(back[i].trace == data[i].trace);
    CHECK(back[i].critical_mask == data[i].critical_mask);
    CHECK(back[i].answer == data[i].answer);
  }
  std::remove(path.c_str());
}
