// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "dynts/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dynts {

void CostParams::validate() const {
  if (layers < 1 || dim < 1 || prefill < 0 || budget < 1 || evict_volume < 1) {
    throw std::invalid_argument("CostParams: all fields must be positive (prefill >= 0)");
  }
  if (budget <= prefill) {
    throw std::invalid_argument("CostParams: budget must exceed the prefill length");
  }
}

long long mlp_flops(int d, int m1, int m2, int m3) {
  return 2LL * (static_cast<long long>(d) * m1 + static_cast<long long>(m1) * m2 +
                static_cast<long long>(m2) * m3);
}

long long predictor_flops(int d) {
  if (d < 2 || d % 2 != 0) {
    throw std::invalid_argument("predictor_flops: d must be even and >= 2");
  }
  return 6LL * d * d + d;
}

long long attn_flops(int layers, int dim, long long cache_len) {
  return 4LL * layers * dim * cache_len;
}

int eviction_count(int prefill, int step, int budget, int evict_volume) {
  if (evict_volume < 1) throw std::invalid_argument("eviction_count: K must be >= 1");
  const long long over = static_cast<long long>(prefill) + step - budget;
  if (over < 0) return 0;
  return static_cast<int>(over / evict_volume) + 1;
}

long long gain(int step, const CostParams& p) {
  p.validate();
  const int n = eviction_count(p.prefill, step, p.budget, p.evict_volume);
  return static_cast<long long>(n) * 4LL * p.layers * p.dim * p.evict_volume -
         predictor_flops(p.dim);
}

BreakEven break_even_volume(int d, int layers, int n_events) {
  if (d < 2 || layers < 1 || n_events < 1) {
    throw std::invalid_argument("break_even_volume: inputs must be positive");
  }
  const long long overhead = predictor_flops(d);
  const long long saving_per_k = static_cast<long long>(n_events) * 4LL * layers * d;
  // smallest integer K with K * saving_per_k > overhead
  BreakEven be;
  be.exact_k = overhead / saving_per_k + 1;
  be.approx = 1.5 * d / (static_cast<double>(n_events) * layers);
  return be;
}

CostSeries series(const DecodeCostTrace& trace, const CostParams& p) {
  p.validate();
  if (trace.effective_len.empty()) {
    throw std::invalid_argument("series: decode trace has no steps");
  }
  CostSeries out;
  out.rows.reserve(trace.effective_len.size());
  double cum_base = 0.0, cum_opt = 0.0;
  long long peak_opt = 0;
  const long long pred = predictor_flops(p.dim);
  for (std::size_t idx = 0; idx < trace.effective_len.size(); ++idx) {
    const int step = static_cast<int>(idx) + 1;
    const long long eff_opt = trace.effective_len[idx];
    if (eff_opt <= 0) throw std::invalid_argument("series: missing or invalid step length");
    const long long eff_base = p.prefill + step;
    cum_base += static_cast<double>(attn_flops(p.layers, p.dim, eff_base));
    cum_opt += static_cast<double>(attn_flops(p.layers, p.dim, eff_opt) + pred);
    peak_opt = std::max(peak_opt, eff_opt);
    SeriesRow row;
    row.step = step;
    row.eff_base = eff_base;
    row.eff_opt = eff_opt;
    row.cum_flops_base = cum_base;
    row.cum_flops_opt = cum_opt;
    row.mem_ratio = static_cast<double>(eff_opt) / static_cast<double>(eff_base);
    row.gain = gain(step, p);
    out.rows.push_back(row);
  }
  const long long final_base = p.prefill + static_cast<long long>(trace.effective_len.size());
  out.peak_memory_ratio = static_cast<double>(peak_opt) / static_cast<double>(final_base);
  out.cumulative_flops_ratio = cum_opt / cum_base;
  return out;
}

std::string series_to_csv(const CostSeries& s) {
  std::ostringstream out;
  out << "step,eff_len_base,eff_len_opt,cum_flops_base,cum_flops_opt,mem_ratio,gain\n";
  char buf[256];
  for (const auto& r : s.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%lld,%.17g,%.17g,%.17g,%lld\n", r.step, r.eff_base,
                  r.eff_opt, r.cum_flops_base, r.cum_flops_opt, r.mem_ratio, r.gain);
    out << buf;
  }
  return out.str();
}

}  // namespace dynts
