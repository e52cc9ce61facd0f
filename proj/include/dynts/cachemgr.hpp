// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dynts/numkernel.hpp"

namespace dynts {

enum class Phase { question, think, answer };

/// One cached token. Keys/values are stored per layer (row l = layer l), with
/// rotary phases baked in at the original generation position. Eviction
/// removes the entry across all layers atomically.
struct CacheEntry {
  int position = -1;
  int token = -1;
  Mat keys;    // n_layers x d
  Mat values;  // n_layers x d
  double score = 0.0;
  Phase origin = Phase::think;
};

struct EvictionEvent {
  int step = 0;
  int pre_len = 0;
  int post_len = 0;
  std::vector<int> evicted;   // absolute positions, ascending
  std::vector<int> retained;  // scored-region positions that survived
};

struct BudgetConfig {
  int budget = 48;              // B
  int local_capacity = 12;      // W_l
  double retention_ratio = 1.0 / 3.0;  // r

  int selection_capacity(int prefill_len) const {
    return budget - prefill_len - local_capacity;
  }
  void validate(int prefill_len) const;  // throws when the windows cannot fit
};

/// Ordered view over the live cache for attention: entries sorted by ascending
/// absolute position. Positions are the original generation positions; after
/// eviction the sequence has gaps and is never re-indexed.
struct CacheView {
  std::vector<const CacheEntry*> entries;
  int size() const { return static_cast<int>(entries.size()); }
};

/// Common contract for every eviction policy: install the prefill, append one
/// entry per decoded step (with its importance score), then give the policy a
/// chance to evict. Views stay valid until the next append.
class CachePolicy {
 public:
  virtual ~CachePolicy() = default;

  virtual void init(std::vector<CacheEntry> prefill) = 0;
  virtual void append(CacheEntry entry, double score) = 0;
  virtual std::optional<EvictionEvent> maybe_evict(int step) = 0;
  virtual CacheView view() const = 0;
  virtual int total() const = 0;
  virtual std::string name() const = 0;

  /// Attention mass received per cached position during the last step
  /// (summed over layers and heads). Only score-accumulating policies use it.
  virtual void observe_attention(const std::vector<int>& /*positions*/,
                                 const std::vector<double>& /*mass*/) {}

  const std::vector<EvictionEvent>& events() const { return events_; }

 protected:
  std::vector<EvictionEvent> events_;
};

/// The dual-window budgeted cache: protected question entries, a scored
/// selection window, and a recency ring (local window), with B = W_q + W_s + W_l.
///
/// Appended entries enter the local window carrying their score; when the ring
/// is over capacity its oldest entry migrates into the selection window. Once
/// the total reaches the budget, the top-k selection entries by score survive
/// (k = floor(r * W_s), ties broken toward higher positions) and the remaining
/// K = W_s - k are evicted permanently.
class DualWindowState : public CachePolicy {
 public:
  explicit DualWindowState(BudgetConfig cfg) : cfg_(cfg) {}

  void init(std::vector<CacheEntry> prefill) override;
  void append(CacheEntry entry, double score) override;
  std::optional<EvictionEvent> maybe_evict(int step) override;
  CacheView view() const override;
  int total() const override;
  std::string name() const override { return "dual_window"; }

  int prefill_len() const { return static_cast<int>(question_.size()); }
  int selection_capacity() const { return cfg_.selection_capacity(prefill_len()); }
  int evict_volume() const;  // K = W_s - floor(r * W_s)
  const BudgetConfig& config() const { return cfg_; }
  std::vector<int> local_positions() const;
  std::vector<int> selection_positions() const;

 private:
  BudgetConfig cfg_;
  std::deque<CacheEntry> question_;
  std::deque<CacheEntry> selection_;  // ascending positions
  std::deque<CacheEntry> local_;      // ascending positions, size <= W_l
  int last_position_ = -1;
  bool initialized_ = false;
};

class FullCachePolicy : public CachePolicy {
 public:
  void init(std::vector<CacheEntry> prefill) override;
  void append(CacheEntry entry, double score) override;
  std::optional<EvictionEvent> maybe_evict(int step) override { (void)step; return std::nullopt; }
  CacheView view() const override;
  int total() const override { return static_cast<int>(entries_.size()); }
  std::string name() const override { return "full"; }

 private:
  std::deque<CacheEntry> entries_;
  int last_position_ = -1;
};

/// Question entries plus the last W_l generated entries; everything older is
/// dropped immediately.
class WindowPolicy : public CachePolicy {
 public:
  explicit WindowPolicy(int local_capacity) : local_capacity_(local_capacity) {}
  void init(std::vector<CacheEntry> prefill) override;
  void append(CacheEntry entry, double score) override;
  std::optional<EvictionEvent> maybe_evict(int step) override;
  CacheView view() const override;
  int total() const override;
  std::string name() const override { return "window"; }

 private:
  int local_capacity_;
  std::deque<CacheEntry> question_;
  std::deque<CacheEntry> recent_;
  int last_position_ = -1;
  std::vector<int> pending_evictions_;
};

/// Shared skeleton for the budget-triggered baselines (sink+recent, accumulated
/// attention, random): all evict a batch of K = E - floor(r * E) entries from
/// their evictable set E when the total reaches the budget.
class BudgetTriggeredPolicy : public CachePolicy {
 public:
  explicit BudgetTriggeredPolicy(BudgetConfig cfg) : cfg_(cfg) {}
  void init(std::vector<CacheEntry> prefill) override;
  void append(CacheEntry entry, double score) override;
  std::optional<EvictionEvent> maybe_evict(int step) override;
  CacheView view() const override;
  int total() const override { return static_cast<int>(entries_.size()); }

 protected:
  // Indices into entries_ that the policy may evict this round.
  virtual std::vector<std::size_t> evictable_indices() const = 0;
  // Chooses `count` victims from `candidates` (indices into entries_).
  virtual std::vector<std::size_t> choose_victims(std::vector<std::size_t> candidates,
                                                  int count) = 0;
  virtual void on_append(const CacheEntry& entry) { (void)entry; }
  virtual void on_evict(const std::vector<std::size_t>& victims) { (void)victims; }

  BudgetConfig cfg_;
  std::deque<CacheEntry> entries_;  // ascending positions
  int prefill_len_ = 0;
  int last_position_ = -1;
};

class SinkRecentPolicy : public BudgetTriggeredPolicy {
 public:
  SinkRecentPolicy(int n_sink, BudgetConfig cfg)
      : BudgetTriggeredPolicy(cfg), n_sink_(n_sink) {}
  std::string name() const override { return "sink_recent"; }

 protected:
  std::vector<std::size_t> evictable_indices() const override;
  std::vector<std::size_t> choose_victims(std::vector<std::size_t> candidates, int count) override;

 private:
  int n_sink_;
};

class AccumAttentionPolicy : public BudgetTriggeredPolicy {
 public:
  explicit AccumAttentionPolicy(BudgetConfig cfg) : BudgetTriggeredPolicy(cfg) {}
  std::string name() const override { return "accum_attention"; }
  void observe_attention(const std::vector<int>& positions,
                         const std::vector<double>& mass) override;

 protected:
  std::vector<std::size_t> evictable_indices() const override;
  std::vector<std::size_t> choose_victims(std::vector<std::size_t> candidates, int count) override;

 private:
  // accumulated received attention keyed by absolute position
  std::vector<std::pair<int, double>> accum_;
  double accum_for(int position) const;
};

class RandomEvictPolicy : public BudgetTriggeredPolicy {
 public:
  RandomEvictPolicy(BudgetConfig cfg, std::uint64_t seed)
      : BudgetTriggeredPolicy(cfg), rng_(seed) {}
  std::string name() const override { return "random"; }

 protected:
  std::vector<std::size_t> evictable_indices() const override;
  std::vector<std::size_t> choose_victims(std::vector<std::size_t> candidates, int count) override;

 private:
  std::mt19937_64 rng_;
};

/// Batch size shared by the budget-triggered policies: evict everything in the
/// evictable set except the floor(r * E) survivors (at least one victim).
int budget_evict_count(int evictable, double retention_ratio);

// Eviction-log export, one JSON object per event:
// {step, pre_len, post_len, evicted:[..], retained:[..], policy}
std::string eviction_log_jsonl(const std::vector<EvictionEvent>& events,
                               const std::string& policy);

}  // namespace dynts
