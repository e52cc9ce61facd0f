// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynts {

struct CostParams {
  int layers = 0;        // L
  int dim = 0;           // d
  int prefill = 0;       // M
  int budget = 0;        // B
  int evict_volume = 0;  // K

  void validate() const;
};

/// Per-decode-step cost of the d -> 2d -> d/2 -> 1 predictor head: 6d^2 + d,
/// i.e. 2(d*m1 + m1*m2 + m2*m3) at (m1, m2, m3) = (2d, d/2, 1).
long long predictor_flops(int d);

/// Generic three-layer MLP cost 2(d*m1 + m1*m2 + m2*m3).
long long mlp_flops(int d, int m1, int m2, int m3);

/// Per-step attention cost across L layers at effective cache length S:
/// 4*L*d*S (Q.K^T plus softmax.V, two multiply-adds each).
long long attn_flops(int layers, int dim, long long cache_len);

/// Number of eviction events that have fired by decode step i:
/// max(0, floor(((M + i) - B) / K) + 1).
int eviction_count(int prefill, int step, int budget, int evict_volume);

/// Net FLOPs reduction at step i: n_i * 4LdK - (6d^2 + d).
long long gain(int step, const CostParams& p);

struct BreakEven {
  long long exact_k;  // smallest integer K with positive gain
  double approx;      // 1.5 d / (n L)
};

/// Smallest eviction volume with positive gain at the n-th event,
/// together with the coarse approximation 1.5d/(nL).
BreakEven break_even_volume(int d, int layers, int n_events);

/// Instrumented multiply-add counters, filled by the attention kernel when a
/// counter is attached: score = Q.K^T stage, mix = softmax.V stage.
struct FlopsCounter {
  long long score_macs = 0;
  long long mix_macs = 0;
  long long total_flops() const { return 2 * (score_macs + mix_macs); }
};

/// Per-step effective lengths of one decode, plus its eviction-event steps.
struct DecodeCostTrace {
  int prefill = 0;
  std::vector<int> effective_len;  // attention length at step i (1-based steps)
  std::vector<int> event_steps;    // steps at which an eviction event fired
};

struct SeriesRow {
  int step;
  long long eff_base;
  long long eff_opt;
  double cum_flops_base;
  double cum_flops_opt;
  double mem_ratio;  // eff_opt / eff_base at this step
  long long gain;
};

struct CostSeries {
  std::vector<SeriesRow> rows;
  double peak_memory_ratio = 0.0;       // max eff_opt / final base length
  double cumulative_flops_ratio = 0.0;  // final cum_opt / final cum_base
};

/// Expands a decode trace into the per-step analytic series. The optimized
/// cumulative includes the predictor overhead per step; the base series grows
/// as M + i. Throws if the trace is empty or has missing steps.
CostSeries series(const DecodeCostTrace& trace, const CostParams& p);

std::string series_to_csv(const CostSeries& s);

}  // namespace dynts
