// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "dynts/synthdata.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace dynts {

std::string Vocab::symbol(int t) const {
  if (t < 0 || t >= size()) throw std::invalid_argument("Vocab::symbol: id out of range");
  if (is_digit(t)) return std::to_string(t);
  if (is_key(t)) return "K" + std::to_string(t - 10);
  if (t == val()) return "VAL";
  if (is_filler(t)) return "F" + std::to_string(t - filler(0));
  if (t == question()) return "QUESTION";
  if (t == think_open()) return "THINK_OPEN";
  if (t == think_close()) return "THINK_CLOSE";
  if (t == answer_end()) return "ANSWER_END";
  return "PAD";
}

int Vocab::id(const std::string& s) const {
  for (int t = 0; t < size(); ++t) {
    if (symbol(t) == s) return t;
  }
  throw std::invalid_argument("Vocab::id: unknown symbol '" + s + "'");
}

Vocab TaskParams::vocab() const {
  Vocab v;
  v.num_keys = num_keys;
  return v;
}

std::uint64_t TaskParams::binding_capacity() const {
  std::uint64_t cap = num_keys;
  for (int i = 0; i < digits_per_value; ++i) cap *= 10;
  return cap;
}

void TaskParams::validate() const {
  if (num_keys < 1 || filler_length < 0 || num_distractor_pairs < 0 || digits_per_value < 1) {
    throw std::invalid_argument("TaskParams: counts out of range");
  }
  if (vocab().size() > 256) {
    throw std::invalid_argument("TaskParams: vocabulary exceeds 256 symbols");
  }
  if (num_distractor_pairs > 0 && num_keys < 2) {
    throw std::invalid_argument("TaskParams: distractor pairs need at least 2 keys");
  }
  std::uint64_t value_space = 1;
  for (int i = 0; i < digits_per_value; ++i) value_space *= 10;
  if (static_cast<std::uint64_t>(num_distractor_pairs) + 1 > value_space) {
    throw std::invalid_argument("TaskParams: not enough distinct values for the distractors");
  }
}

namespace {

std::vector<int> value_digits(std::uint64_t v, int n) {
  std::vector<int> d(n);
  for (int i = n - 1; i >= 0; --i) {
    d[i] = static_cast<int>(v % 10);
    v /= 10;
  }
  return d;
}

}  // namespace

Instance gen_instance(const TaskParams& params, std::uint64_t seed) {
  params.validate();
  const Vocab vocab = params.vocab();
  std::uint64_t value_space = 1;
  for (int i = 0; i < params.digits_per_value; ++i) value_space *= 10;

  // The (query, value) binding is a bijection of seed mod capacity, so any
  // window of <= capacity consecutive seeds is collision-free.
  const std::uint64_t idx = seed % params.binding_capacity();
  const int query_key = static_cast<int>(idx / value_space);
  const std::uint64_t query_value = idx % value_space;

  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);

  // distractor keys: distinct, never the query key
  std::vector<int> other_keys;
  for (int k = 0; k < params.num_keys; ++k) {
    if (k != query_key) other_keys.push_back(k);
  }
  std::shuffle(other_keys.begin(), other_keys.end(), rng);
  // distractor values: distinct from the queried value and from each other
  std::vector<std::uint64_t> other_values;
  {
    std::uniform_int_distribution<std::uint64_t> uv(0, value_space - 1);
    while (other_values.size() < static_cast<std::size_t>(params.num_distractor_pairs)) {
      const std::uint64_t v = uv(rng);
      if (v == query_value) continue;
      if (std::find(other_values.begin(), other_values.end(), v) != other_values.end()) continue;
      other_values.push_back(v);
    }
  }

  const int n_pairs = params.num_distractor_pairs + 1;
  std::vector<std::pair<int, std::uint64_t>> pairs;
  pairs.reserve(n_pairs);
  pairs.emplace_back(query_key, query_value);
  for (int i = 0; i < params.num_distractor_pairs; ++i) {
    pairs.emplace_back(other_keys[i % other_keys.size()], other_values[i]);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);

  // split filler_length filler tokens into n_pairs+1 gaps
  std::vector<int> gap(n_pairs + 1, 0);
  {
    std::uniform_int_distribution<int> ug(0, n_pairs);
    for (int i = 0; i < params.filler_length; ++i) gap[ug(rng)] += 1;
  }

  Instance inst;
  inst.seed = seed;
  inst.question = {vocab.question(), vocab.key(query_key)};
  std::uniform_int_distribution<int> ufill(0, vocab.num_fillers - 1);
  auto emit_filler = [&](int n) {
    for (int i = 0; i < n; ++i) {
      inst.trace.push_back(vocab.filler(ufill(rng)));
      inst.critical_mask.push_back(false);
    }
  };
  for (int i = 0; i < n_pairs; ++i) {
    emit_filler(gap[i]);
    const bool critical = pairs[i].first == query_key;
    inst.trace.push_back(vocab.key(pairs[i].first));
    inst.critical_mask.push_back(critical);
    inst.trace.push_back(vocab.val());
    inst.critical_mask.push_back(critical);
    for (int d : value_digits(pairs[i].second, params.digits_per_value)) {
      inst.trace.push_back(vocab.digit(d));
      inst.critical_mask.push_back(critical);
    }
  }
  emit_filler(gap[n_pairs]);

  inst.answer = value_digits(query_value, params.digits_per_value);

  const std::size_t total = inst.question.size() + inst.trace.size() + inst.answer.size() + 3;
  if (total > static_cast<std::size_t>(params.max_seq_len)) {
    throw std::invalid_argument("gen_instance: assembled sequence exceeds max_seq_len");
  }
  return inst;
}

Instance gen_instance(const TaskParams& params) { return gen_instance(params, params.seed); }

std::vector<Instance> gen_dataset(const TaskParams& params, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_dataset: n must be >= 1");
  if (static_cast<std::uint64_t>(n) > params.binding_capacity()) {
    throw std::invalid_argument("gen_dataset: n exceeds distinct-binding capacity");
  }
  std::vector<Instance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(gen_instance(params, seed + i));
  return out;
}

std::vector<int> assemble_sequence(const Vocab& vocab, const Instance& inst) {
  std::vector<int> seq;
  seq.reserve(inst.question.size() + inst.trace.size() + inst.answer.size() + 3);
  seq.insert(seq.end(), inst.question.begin(), inst.question.end());
  seq.push_back(vocab.think_open());
  seq.insert(seq.end(), inst.trace.begin(), inst.trace.end());
  seq.push_back(vocab.think_close());
  seq.insert(seq.end(), inst.answer.begin(), inst.answer.end());
  seq.push_back(vocab.answer_end());
  return seq;
}

std::string instance_to_jsonl(const Instance& inst) {
  nlohmann::json j;
  j["seed"] = inst.seed;
  j["question"] = inst.question;
  j["trace"] = inst.trace;
  j["answer"] = inst.answer;
  j["critical_mask"] = std::vector<bool>(inst.critical_mask.begin(), inst.critical_mask.end());
  return j.dump();
}

Instance instance_from_jsonl(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  Instance inst;
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.question = j.at("question").get<std::vector<int>>();
  inst.trace = j.at("trace").get<std::vector<int>>();
  inst.answer = j.at("answer").get<std::vector<int>>();
  inst.critical_mask = j.at("critical_mask").get<std::vector<bool>>();
  return inst;
}

void write_dataset_jsonl(const std::string& path, const std::vector<Instance>& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_jsonl: cannot open " + path);
  for (const auto& inst : data) out << instance_to_jsonl(inst) << "\n";
}

std::vector<Instance> read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_jsonl: cannot open " + path);
  std::vector<Instance> data;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) data.push_back(instance_from_jsonl(line));
  }
  return data;
}

}  // namespace dynts
