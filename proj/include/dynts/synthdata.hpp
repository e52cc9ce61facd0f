// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynts {

/// Fixed symbol set for the needle-trace task. Token ids are dense from 0:
/// digits 0-9, key markers K0..K(n-1), VAL, fillers F0..F(m-1), then the
/// structural tokens QUESTION, THINK_OPEN, THINK_CLOSE, ANSWER_END, PAD.
struct Vocab {
  int num_keys = 4;
  int num_fillers = 8;

  int digit(int v) const { return v; }
  int key(int i) const { return 10 + i; }
  int val() const { return 10 + num_keys; }
  int filler(int i) const { return 11 + num_keys + i; }
  int question() const { return 11 + num_keys + num_fillers; }
  int think_open() const { return question() + 1; }
  int think_close() const { return question() + 2; }
  int answer_end() const { return question() + 3; }
  int pad() const { return question() + 4; }
  int size() const { return question() + 5; }

  bool is_digit(int t) const { return t >= 0 && t < 10; }
  bool is_key(int t) const { return t >= 10 && t < 10 + num_keys; }
  bool is_filler(int t) const { return t >= filler(0) && t < filler(0) + num_fillers; }

  std::string symbol(int t) const;      // throws on out-of-range id
  int id(const std::string& s) const;   // throws on unknown symbol
};

struct TaskParams {
  int num_keys = 4;
  int num_distractor_pairs = 3;
  int filler_length = 40;
  int digits_per_value = 1;
  int max_seq_len = 192;
  std::uint64_t seed = 0;

  Vocab vocab() const;
  void validate() const;
  // distinct (query, binding) combinations the vocabulary supports
  std::uint64_t binding_capacity() const;
};

/// One synthetic reasoning episode. The trace plants `num_distractor_pairs + 1`
/// key/value pairs among filler; exactly one pair is keyed by the question's
/// query, and critical_mask is true on that pair's tokens.
struct Instance {
  std::vector<int> question;
  std::vector<int> trace;
  std::vector<int> answer;
  std::vector<bool> critical_mask;  // over trace positions
  std::uint64_t seed = 0;
};

Instance gen_instance(const TaskParams& params);
Instance gen_instance(const TaskParams& params, std::uint64_t seed);

/// n instances with seeds seed..seed+n-1. Throws when n exceeds the
/// distinct-binding capacity of the vocabulary.
std::vector<Instance> gen_dataset(const TaskParams& params, int n, std::uint64_t seed);

/// [question, THINK_OPEN, trace, THINK_CLOSE, answer, ANSWER_END]
std::vector<int> assemble_sequence(const Vocab& vocab, const Instance& inst);

// JSON-lines export/import, one instance per line with fields
// {seed, question, trace, answer, critical_mask}.
std::string instance_to_jsonl(const Instance& inst);
Instance instance_from_jsonl(const std::string& line);
void write_dataset_jsonl(const std::string& path, const std::vector<Instance>& data);
std::vector<Instance> read_dataset_jsonl(const std::string& path);

}  // namespace dynts
