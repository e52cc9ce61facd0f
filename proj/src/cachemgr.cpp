// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "dynts/cachemgr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dynts {

void BudgetConfig::validate(int prefill_len) const {
  if (budget < 1 || local_capacity < 1) {
    throw std::invalid_argument("BudgetConfig: budget and local window must be positive");
  }
  if (retention_ratio < 0.0 || retention_ratio >= 1.0) {
    throw std::invalid_argument("BudgetConfig: retention ratio must lie in [0, 1)");
  }
  if (prefill_len > budget) {
    throw std::invalid_argument("BudgetConfig: prefill alone exceeds the budget");
  }
  if (selection_capacity(prefill_len) < 1) {
    throw std::invalid_argument(
        "BudgetConfig: prefill + local window leave no room for the selection window");
  }
}

int budget_evict_count(int evictable, double retention_ratio) {
  const int keep = static_cast<int>(std::floor(retention_ratio * evictable));
  return std::max(1, evictable - keep);
}

namespace {

void check_next_position(int last, const CacheEntry& e) {
  if (e.position <= last) {
    throw std::invalid_argument("cache append: positions must be strictly increasing (got " +
                                std::to_string(e.position) + " after " + std::to_string(last) +
                                ")");
  }
}

std::vector<CacheEntry> checked_prefill(std::vector<CacheEntry> prefill) {
  int last = -1;
  for (auto& e : prefill) {
    check_next_position(last, e);
    last = e.position;
  }
  return prefill;
}

}  // namespace

// ---------------------------------------------------------------------------
// DualWindowState

void DualWindowState::init(std::vector<CacheEntry> prefill) {
  cfg_.validate(static_cast<int>(prefill.size()));
  prefill = checked_prefill(std::move(prefill));
  question_.clear();
  selection_.clear();
  local_.clear();
  events_.clear();
  for (auto& e : prefill) {
    e.score = std::numeric_limits<double>::infinity();
    e.origin = Phase::question;
    last_position_ = e.position;
    question_.push_back(std::move(e));
  }
  initialized_ = true;
}

void DualWindowState::append(CacheEntry entry, double score) {
  if (!initialized_) throw std::logic_error("DualWindowState: append before init");
  check_next_position(last_position_, entry);
  last_position_ = entry.position;
  entry.score = score;
  local_.push_back(std::move(entry));
  if (static_cast<int>(local_.size()) > cfg_.local_capacity) {
    selection_.push_back(std::move(local_.front()));
    local_.pop_front();
  }
}

int DualWindowState::total() const {
  return static_cast<int>(question_.size() + selection_.size() + local_.size());
}

int DualWindowState::evict_volume() const {
  const int ws = selection_capacity();
  return ws - static_cast<int>(std::floor(cfg_.retention_ratio * ws));
}

std::optional<EvictionEvent> DualWindowState::maybe_evict(int step) {
  if (total() < cfg_.budget) return std::nullopt;
  if (total() > cfg_.budget) {
    throw std::logic_error("DualWindowState: cache exceeded the budget");
  }
  const int ws = selection_capacity();
  if (static_cast<int>(selection_.size()) != ws) {
    throw std::logic_error("DualWindowState: selection window size " +
                           std::to_string(selection_.size()) + " != capacity " +
                           std::to_string(ws) + " at the eviction trigger");
  }
  const int keep = static_cast<int>(std::floor(cfg_.retention_ratio * ws));

  std::vector<std::size_t> order(selection_.size());
  std::iota(order.begin(), order.end(), 0);
  // survivors: highest scores, ties toward higher positions
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (selection_[a].score != selection_[b].score)
      return selection_[a].score > selection_[b].score;
    return selection_[a].position > selection_[b].position;
  });

  EvictionEvent ev;
  ev.step = step;
  ev.pre_len = total();
  std::vector<bool> keep_mask(selection_.size(), false);
  for (int i = 0; i < keep; ++i) keep_mask[order[i]] = true;

  std::deque<CacheEntry> survivors;
  for (std::size_t i = 0; i < selection_.size(); ++i) {
    if (keep_mask[i]) {
      ev.retained.push_back(selection_[i].position);
      survivors.push_back(std::move(selection_[i]));
    } else {
      ev.evicted.push_back(selection_[i].position);
    }
  }
  selection_ = std::move(survivors);
  ev.post_len = total();
  events_.push_back(ev);
  return ev;
}

CacheView DualWindowState::view() const {
  CacheView v;
  v.entries.reserve(question_.size() + selection_.size() + local_.size());
  for (const auto& e : question_) v.entries.push_back(&e);
  for (const auto& e : selection_) v.entries.push_back(&e);
  for (const auto& e : local_) v.entries.push_back(&e);
  return v;
}

std::vector<int> DualWindowState::local_positions() const {
  std::vector<int> p;
  for (const auto& e : local_) p.push_back(e.position);
  return p;
}

std::vector<int> DualWindowState::selection_positions() const {
  std::vector<int> p;
  for (const auto& e : selection_) p.push_back(e.position);
  return p;
}

// ---------------------------------------------------------------------------
// FullCachePolicy

void FullCachePolicy::init(std::vector<CacheEntry> prefill) {
  prefill = checked_prefill(std::move(prefill));
  entries_.clear();
  events_.clear();
  for (auto& e : prefill) {
    e.score = std::numeric_limits<double>::infinity();
    e.origin = Phase::question;
    last_position_ = e.position;
    entries_.push_back(std::move(e));
  }
}

void FullCachePolicy::append(CacheEntry entry, double score) {
  check_next_position(last_position_, entry);
  last_position_ = entry.position;
  entry.score = score;
  entries_.push_back(std::move(entry));
}

CacheView FullCachePolicy::view() const {
  CacheView v;
  v.entries.reserve(entries_.size());
  for (const auto& e : entries_) v.entries.push_back(&e);
  return v;
}

// ---------------------------------------------------------------------------
// WindowPolicy

void WindowPolicy::init(std::vector<CacheEntry> prefill) {
  if (local_capacity_ < 1) throw std::invalid_argument("WindowPolicy: W_l must be positive");
  prefill = checked_prefill(std::move(prefill));
  question_.clear();
  recent_.clear();
  events_.clear();
  for (auto& e : prefill) {
    e.score = std::numeric_limits<double>::infinity();
    e.origin = Phase::question;
    last_position_ = e.position;
    question_.push_back(std::move(e));
  }
}

void WindowPolicy::append(CacheEntry entry, double score) {
  check_next_position(last_position_, entry);
  last_position_ = entry.position;
  entry.score = score;
  recent_.push_back(std::move(entry));
  if (static_cast<int>(recent_.size()) > local_capacity_) {
    pending_evictions_.push_back(recent_.front().position);
    recent_.pop_front();
  }
}

std::optional<EvictionEvent> WindowPolicy::maybe_evict(int step) {
  if (pending_evictions_.empty()) return std::nullopt;
  EvictionEvent ev;
  ev.step = step;
  ev.pre_len = total() + static_cast<int>(pending_evictions_.size());
  ev.post_len = total();
  ev.evicted = std::move(pending_evictions_);
  pending_evictions_.clear();
  for (const auto& e : recent_) ev.retained.push_back(e.position);
  events_.push_back(ev);
  return ev;
}

CacheView WindowPolicy::view() const {
  CacheView v;
  v.entries.reserve(question_.size() + recent_.size());
  for (const auto& e : question_) v.entries.push_back(&e);
  for (const auto& e : recent_) v.entries.push_back(&e);
  return v;
}

int WindowPolicy::total() const {
  return static_cast<int>(question_.size() + recent_.size());
}

// ---------------------------------------------------------------------------
// BudgetTriggeredPolicy

void BudgetTriggeredPolicy::init(std::vector<CacheEntry> prefill) {
  cfg_.validate(static_cast<int>(prefill.size()));
  prefill = checked_prefill(std::move(prefill));
  entries_.clear();
  events_.clear();
  prefill_len_ = static_cast<int>(prefill.size());
  for (auto& e : prefill) {
    e.score = std::numeric_limits<double>::infinity();
    e.origin = Phase::question;
    last_position_ = e.position;
    entries_.push_back(std::move(e));
  }
}

void BudgetTriggeredPolicy::append(CacheEntry entry, double score) {
  check_next_position(last_position_, entry);
  last_position_ = entry.position;
  entry.score = score;
  on_append(entry);
  entries_.push_back(std::move(entry));
}

std::optional<EvictionEvent> BudgetTriggeredPolicy::maybe_evict(int step) {
  if (total() < cfg_.budget) return std::nullopt;
  if (total() > cfg_.budget) {
    throw std::logic_error(name() + ": cache exceeded the budget");
  }
  auto candidates = evictable_indices();
  if (candidates.empty()) {
    throw std::logic_error(name() + ": budget reached with nothing evictable");
  }
  const int count =
      std::min<int>(static_cast<int>(candidates.size()),
                    budget_evict_count(static_cast<int>(candidates.size()), cfg_.retention_ratio));
  auto victims = choose_victims(std::move(candidates), count);
  std::sort(victims.begin(), victims.end());

  EvictionEvent ev;
  ev.step = step;
  ev.pre_len = total();
  on_evict(victims);

  std::deque<CacheEntry> kept;
  std::size_t vi = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (vi < victims.size() && victims[vi] == i) {
      ev.evicted.push_back(entries_[i].position);
      ++vi;
    } else {
      if (entries_[i].origin != Phase::question) ev.retained.push_back(entries_[i].position);
      kept.push_back(std::move(entries_[i]));
    }
  }
  entries_ = std::move(kept);
  ev.post_len = total();
  events_.push_back(ev);
  return ev;
}

CacheView BudgetTriggeredPolicy::view() const {
  CacheView v;
  v.entries.reserve(entries_.size());
  for (const auto& e : entries_) v.entries.push_back(&e);
  return v;
}

// ---------------------------------------------------------------------------
// SinkRecentPolicy

std::vector<std::size_t> SinkRecentPolicy::evictable_indices() const {
  std::vector<std::size_t> out;
  const std::size_t n = entries_.size();
  const std::size_t recent_from = n > static_cast<std::size_t>(cfg_.local_capacity)
                                      ? n - cfg_.local_capacity
                                      : 0;
  for (std::size_t i = 0; i < recent_from; ++i) {
    const auto& e = entries_[i];
    if (e.origin == Phase::question) continue;
    if (e.position < n_sink_) continue;  // attention-sink prefix is protected
    out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SinkRecentPolicy::choose_victims(std::vector<std::size_t> candidates,
                                                          int count) {
  // middle-oldest first; candidates are already in ascending position order
  candidates.resize(count);
  return candidates;
}

// ---------------------------------------------------------------------------
// AccumAttentionPolicy

void AccumAttentionPolicy::observe_attention(const std::vector<int>& positions,
                                             const std::vector<double>& mass) {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto it = std::find_if(accum_.begin(), accum_.end(),
                           [&](const auto& kv) { return kv.first == positions[i]; });
    if (it == accum_.end()) {
      accum_.emplace_back(positions[i], mass[i]);
    } else {
      it->second += mass[i];
    }
  }
}

double AccumAttentionPolicy::accum_for(int position) const {
  for (const auto& kv : accum_) {
    if (kv.first == position) return kv.second;
  }
  return 0.0;
}

std::vector<std::size_t> AccumAttentionPolicy::evictable_indices() const {
  std::vector<std::size_t> out;
  const std::size_t n = entries_.size();
  const std::size_t recent_from = n > static_cast<std::size_t>(cfg_.local_capacity)
                                      ? n - cfg_.local_capacity
                                      : 0;
  for (std::size_t i = 0; i < recent_from; ++i) {
    if (entries_[i].origin == Phase::question) continue;
    out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> AccumAttentionPolicy::choose_victims(std::vector<std::size_t> candidates,
                                                              int count) {
  // lowest accumulated attention first; ties evict older positions
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    const double sa = accum_for(entries_[a].position);
    const double sb = accum_for(entries_[b].position);
    if (sa != sb) return sa < sb;
    return entries_[a].position < entries_[b].position;
  });
  candidates.resize(count);
  return candidates;
}

// ---------------------------------------------------------------------------
// RandomEvictPolicy

std::vector<std::size_t> RandomEvictPolicy::evictable_indices() const {
  std::vector<std::size_t> out;
  const std::size_t n = entries_.size();
  const std::size_t recent_from = n > static_cast<std::size_t>(cfg_.local_capacity)
                                      ? n - cfg_.local_capacity
                                      : 0;
  for (std::size_t i = 0; i < recent_from; ++i) {
    if (entries_[i].origin == Phase::question) continue;
    out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> RandomEvictPolicy::choose_victims(std::vector<std::size_t> candidates,
                                                           int count) {
  std::shuffle(candidates.begin(), candidates.end(), rng_);
  candidates.resize(count);
  return candidates;
}

// ---------------------------------------------------------------------------

std::string eviction_log_jsonl(const std::vector<EvictionEvent>& events,
                               const std::string& policy) {
  std::ostringstream out;
  for (const auto& ev : events) {
    nlohmann::json j;
    j["step"] = ev.step;
    j["pre_len"] = ev.pre_len;
    j["post_len"] = ev.post_len;
    j["evicted"] = ev.evicted;
    j["retained"] = ev.retained;
    j["policy"] = policy;
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace dynts
