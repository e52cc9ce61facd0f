// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynts/cachemgr.hpp"
#include "dynts/costmodel.hpp"
#include "dynts/numkernel.hpp"
#include "dynts/synthdata.hpp"

namespace dynts {

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 2;
  int dim = 64;
  int vocab_size = 32;
  int max_pos = 256;

  int head_dim() const { return dim / n_heads; }
  void validate() const;
};

enum class ModelKind { planted, scripted, random_init };

/// How the scripted model distributes the epsilon remainder over non-critical
/// think tokens: uniform, or weighted by a fixed function of the token id
/// (breaks label ties so rank diagnostics have signal).
enum class EpsSpread { uniform, token_weighted };

struct ScriptedParams {
  double epsilon = 0.1;
  double noise = 0.05;
  std::uint64_t seed = 0;
  EpsSpread spread = EpsSpread::uniform;
};

struct LayerWeights {
  Mat wq, wk, wv, wo;  // each dim x dim, heads fused along rows/cols
};

/// Immutable decoder-only backbone. Weights are never trained; the planted
/// and scripted variants are constructed, the random variant is seeded.
struct Model {
  ModelConfig config;
  ModelKind kind = ModelKind::random_init;
  Vocab vocab;    // delimiter/token roles for decoding
  Mat embedding;  // dim x vocab
  std::vector<LayerWeights> layers;
  Mat unembed;  // vocab x dim
  ScriptedParams script;  // scripted variant only

  std::uint64_t weight_checksum() const;
};

struct AttnRow {
  int layer = 0;
  int head = 0;
  std::vector<int> positions;  // absolute cache positions, self last
  std::vector<double> weights;
};

struct StepOutput {
  Vec logits;
  Vec hidden;       // h_t: the final block's residual output (feeds the logit head)
  Mat new_keys;     // n_layers x dim, rotary applied at this step's position
  Mat new_values;   // n_layers x dim
  std::vector<AttnRow> rows;  // one per (layer, head)
};

/// One incremental step: attention over the cached entries plus self. Pure in
/// (model, cache, token, position); the cache is not mutated. Throws on
/// position collisions, out-of-range tokens, or non-finite results.
StepOutput forward_step(const Model& model, const CacheView& cache, int token, int position,
                        FlopsCounter* counter = nullptr);

int greedy_next(const Vec& logits);  // argmax, ties toward the lowest token id

Model build_random_model(const ModelConfig& cfg, std::uint64_t seed);
Model build_scripted_model(const ModelConfig& cfg, const Vocab& vocab,
                           const ScriptedParams& script = {});

/// Hand-constructed retrieval circuit that solves the needle-trace task by
/// greedy decoding and concentrates answer-step attention on the planted
/// pair. Requires digits_per_value == 1 and the geometry reported by
/// planted_default_config; throws with its minimum requirements otherwise.
Model build_planted_model(const TaskParams& task, const ModelConfig& cfg);
ModelConfig planted_default_config(const TaskParams& task);

struct StepTrace {
  int position = 0;
  int token = 0;
  std::vector<AttnRow> rows;
};

struct AttentionRecord {
  int n_layers = 0;
  int n_heads = 0;
  std::vector<StepTrace> steps;
};

std::string attention_record_jsonl(const AttentionRecord& rec);
AttentionRecord attention_record_from_jsonl(const std::string& text);

struct DecodeResult {
  std::vector<int> generated;        // emitted tokens, ANSWER_END included when reached
  AttentionRecord record;            // filled when recording is on
  std::vector<Vec> hiddens;          // h_t per processed step (prefill + forced + generated)
  std::vector<int> step_positions;   // position per processed step
  DecodeCostTrace cost;              // post-prefill effective lengths + event steps
};

struct DecodeOptions {
  int max_steps = 8;
  bool record = false;
  FlopsCounter* counter = nullptr;
  // Importance score for an appended entry; defaults to 0 for every token.
  std::function<double(const StepOutput&, int token)> scorer;
};

/// Feeds prompt[0..prefill_len) as the protected prefill, forces the remaining
/// prompt tokens through the policy's append/evict hooks, then greedily decodes
/// until ANSWER_END or max_steps generated tokens.
DecodeResult decode(const Model& model, const std::vector<int>& prompt, int prefill_len,
                    CachePolicy& policy, const DecodeOptions& opts = {});

struct TraceResult {
  AttentionRecord record;
  std::vector<Vec> hiddens;
  std::vector<CacheEntry> entries;  // per-position k/v, for cache rebuilds
  std::vector<Vec> logits;          // per-step logits (teacher-forcing diagnostics)
};

/// Single full-cache pass over the exact token sequence (no sampling),
/// recording attention rows and hidden states for every step.
TraceResult teacher_forced_trace(const Model& model, const std::vector<int>& sequence,
                                 FlopsCounter* counter = nullptr);

}  // namespace dynts
