// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "dynts/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "model_internal.hpp"

namespace dynts {

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || dim < 1 || vocab_size < 1 || max_pos < 1) {
    throw std::invalid_argument("ModelConfig: all fields must be positive");
  }
  if (dim % n_heads != 0) {
    throw std::invalid_argument("ModelConfig: dim must be divisible by n_heads");
  }
  if (head_dim() % 2 != 0) {
    throw std::invalid_argument("ModelConfig: head_dim must be even for rotary pairs");
  }
}

std::uint64_t Model::weight_checksum() const {
  // FNV-1a over the raw bytes of every weight matrix
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const Mat& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(embedding);
  mix(unembed);
  for (const auto& lw : layers) {
    mix(lw.wq);
    mix(lw.wk);
    mix(lw.wv);
    mix(lw.wo);
  }
  return h;
}

int greedy_next(const Vec& logits) {
  int best = 0;
  for (int i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

StepOutput forward_step(const Model& model, const CacheView& cache, int token, int position,
                        FlopsCounter* counter) {
  const ModelConfig& cfg = model.config;
  if (token < 0 || token >= cfg.vocab_size) {
    throw std::invalid_argument("forward_step: token id out of range");
  }
  if (position < 0 || position >= cfg.max_pos) {
    throw std::invalid_argument("forward_step: position out of range");
  }
  if (!cache.entries.empty() && cache.entries.back()->position >= position) {
    throw std::invalid_argument("forward_step: position collides with a cached entry");
  }

  if (model.kind == ModelKind::scripted) {
    return detail::scripted_forward_step(model, cache, token, position);
  }

  const int L = cfg.n_layers, H = cfg.n_heads, d = cfg.dim, dh = cfg.head_dim();
  const int S = cache.size() + 1;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  StepOutput out;
  out.new_keys = Mat(L, d);
  out.new_values = Mat(L, d);
  out.rows.reserve(static_cast<std::size_t>(L) * H);

  Vec h = model.embedding.col(token);
  Vec concat(d);
  for (int l = 0; l < L; ++l) {
    const LayerWeights& lw = model.layers[l];
    Vec q = lw.wq * h;
    Vec k = lw.wk * h;
    Vec v = lw.wv * h;
    for (int hd = 0; hd < H; ++hd) {
      q.segment(hd * dh, dh) = rotary_apply(q.segment(hd * dh, dh), position);
      k.segment(hd * dh, dh) = rotary_apply(k.segment(hd * dh, dh), position);
    }
    out.new_keys.row(l) = k.transpose();
    out.new_values.row(l) = v.transpose();

    for (int hd = 0; hd < H; ++hd) {
      const auto qh = q.segment(hd * dh, dh);
      Eigen::RowVectorXd scores(S);
      for (int j = 0; j < S - 1; ++j) {
        scores[j] = qh.dot(cache.entries[j]->keys.row(l).segment(hd * dh, dh)) * inv_sqrt_dh;
      }
      scores[S - 1] = qh.dot(k.segment(hd * dh, dh)) * inv_sqrt_dh;
      Mat alpha = softmax_rows(scores);

      Vec mixed = Vec::Zero(dh);
      for (int j = 0; j < S - 1; ++j) {
        mixed += alpha(0, j) * cache.entries[j]->values.row(l).segment(hd * dh, dh).transpose();
      }
      mixed += alpha(0, S - 1) * v.segment(hd * dh, dh);
      concat.segment(hd * dh, dh) = mixed;

      AttnRow row;
      row.layer = l;
      row.head = hd;
      row.positions.reserve(S);
      row.weights.reserve(S);
      for (int j = 0; j < S - 1; ++j) {
        row.positions.push_back(cache.entries[j]->position);
        row.weights.push_back(alpha(0, j));
      }
      row.positions.push_back(position);
      row.weights.push_back(alpha(0, S - 1));
      out.rows.push_back(std::move(row));
      if (counter) {
        counter->score_macs += static_cast<long long>(S) * dh;
        counter->mix_macs += static_cast<long long>(S) * dh;
      }
    }
    h += lw.wo * concat;
  }
  out.hidden = h;
  out.logits = model.unembed * h;
  if (!out.logits.allFinite() || !out.hidden.allFinite()) {
    throw std::runtime_error("forward_step: non-finite activations");
  }
  return out;
}

Model build_random_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto randmat = [&](int rows, int cols, double scale) {
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j) {
      for (int i = 0; i < rows; ++i) m(i, j) = scale * gauss(rng);
    }
    return m;
  };
  Model m;
  m.config = cfg;
  m.kind = ModelKind::random_init;
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  m.embedding = randmat(cfg.dim, cfg.vocab_size, 1.0);
  m.layers.resize(cfg.n_layers);
  for (auto& lw : m.layers) {
    lw.wq = randmat(cfg.dim, cfg.dim, s);
    lw.wk = randmat(cfg.dim, cfg.dim, s);
    lw.wv = randmat(cfg.dim, cfg.dim, s);
    lw.wo = randmat(cfg.dim, cfg.dim, s * 0.5);
  }
  m.unembed = randmat(cfg.vocab_size, cfg.dim, s);
  return m;
}

namespace {

struct StepRunner {
  const Model& model;
  DecodeResult& result;
  bool record;
  FlopsCounter* counter;

  StepOutput run(const CacheView& view, int token, int position) {
    StepOutput out = forward_step(model, view, token, position, counter);
    result.hiddens.push_back(out.hidden);
    result.step_positions.push_back(position);
    if (record) {
      StepTrace st;
      st.position = position;
      st.token = token;
      st.rows = out.rows;
      result.record.steps.push_back(std::move(st));
    }
    return out;
  }
};

CacheEntry make_entry(const StepOutput& out, int token, int position, Phase origin) {
  CacheEntry e;
  e.position = position;
  e.token = token;
  e.keys = out.new_keys;
  e.values = out.new_values;
  e.origin = origin;
  return e;
}

// Attention mass received per cached position, summed over layers and heads.
void summed_attention(const StepOutput& out, std::vector<int>& positions,
                      std::vector<double>& mass) {
  positions.clear();
  mass.clear();
  if (out.rows.empty()) return;
  positions = out.rows.front().positions;
  mass.assign(positions.size(), 0.0);
  for (const auto& row : out.rows) {
    for (std::size_t j = 0; j < row.weights.size(); ++j) mass[j] += row.weights[j];
  }
}

}  // namespace

DecodeResult decode(const Model& model, const std::vector<int>& prompt, int prefill_len,
                    CachePolicy& policy, const DecodeOptions& opts) {
  if (prefill_len < 0 || prefill_len > static_cast<int>(prompt.size())) {
    throw std::invalid_argument("decode: prefill length out of range");
  }
  if (opts.max_steps < 1) {
    throw std::invalid_argument("decode: max_steps must be >= 1");
  }
  if (static_cast<int>(prompt.size()) + opts.max_steps > model.config.max_pos) {
    throw std::invalid_argument("decode: prompt plus max_steps exceeds max positions");
  }

  DecodeResult result;
  result.record.n_layers = model.config.n_layers;
  result.record.n_heads = model.config.n_heads;
  result.cost.prefill = prefill_len;
  StepRunner runner{model, result, opts.record, opts.counter};

  const Vocab& vocab = model.script.vocab;  // delimiters for phase tags
  const int think_close = vocab.think_close();

  // prefill: full attention within the question, then install as protected
  std::vector<CacheEntry> prefill_entries;
  prefill_entries.reserve(prefill_len);
  Vec last_logits;
  {
    std::vector<const CacheEntry*> prefix;
    for (int i = 0; i < prefill_len; ++i) {
      CacheView v;
      v.entries = prefix;
      StepOutput out = runner.run(v, prompt[i], i);
      last_logits = out.logits;
      prefill_entries.push_back(make_entry(out, prompt[i], i, Phase::question));
      prefix.push_back(&prefill_entries.back());
    }
  }
  policy.init(std::move(prefill_entries));

  std::vector<int> att_positions;
  std::vector<double> att_mass;
  bool seen_close = false;
  int decode_step = 0;

  auto process = [&](int token, int position) -> StepOutput {
    ++decode_step;
    CacheView view = policy.view();
    StepOutput out = runner.run(view, token, position);
    result.cost.effective_len.push_back(view.size() + 1);
    const Phase phase = seen_close ? Phase::answer : Phase::think;
    if (token == think_close) seen_close = true;
    const double score = opts.scorer ? opts.scorer(out, token) : 0.0;
    policy.append(make_entry(out, token, position, phase), score);
    summed_attention(out, att_positions, att_mass);
    policy.observe_attention(att_positions, att_mass);
    if (policy.maybe_evict(decode_step)) {
      result.cost.event_steps.push_back(decode_step);
    }
    return out;
  };

  for (int i = prefill_len; i < static_cast<int>(prompt.size()); ++i) {
    last_logits = process(prompt[i], i).logits;
  }

  int position = static_cast<int>(prompt.size());
  for (int g = 0; g < opts.max_steps; ++g) {
    if (last_logits.size() == 0) {
      throw std::invalid_argument("decode: cannot generate from an empty prompt");
    }
    const int next = greedy_next(last_logits);
    result.generated.push_back(next);
    if (next == vocab.answer_end()) break;
    if (position >= model.config.max_pos) break;
    last_logits = process(next, position).logits;
    ++position;
  }
  return result;
}

TraceResult teacher_forced_trace(const Model& model, const std::vector<int>& sequence,
                                 FlopsCounter* counter) {
  if (static_cast<int>(sequence.size()) > model.config.max_pos) {
    throw std::invalid_argument("teacher_forced_trace: sequence exceeds max positions");
  }
  TraceResult tr;
  tr.record.n_layers = model.config.n_layers;
  tr.record.n_heads = model.config.n_heads;
  tr.entries.reserve(sequence.size());
  std::vector<const CacheEntry*> prefix;
  for (int i = 0; i < static_cast<int>(sequence.size()); ++i) {
    CacheView v;
    v.entries = prefix;
    StepOutput out = forward_step(model, v, sequence[i], i, counter);
    StepTrace st;
    st.position = i;
    st.token = sequence[i];
    st.rows = std::move(out.rows);
    tr.record.steps.push_back(std::move(st));
    tr.hiddens.push_back(out.hidden);
    tr.logits.push_back(out.logits);
    tr.entries.push_back(make_entry(out, sequence[i], i, Phase::think));
    prefix.push_back(&tr.entries.back());
  }
  return tr;
}

std::string attention_record_jsonl(const AttentionRecord& rec) {
  std::ostringstream out;
  for (const auto& st : rec.steps) {
    nlohmann::json j;
    j["position"] = st.position;
    j["token"] = st.token;
    auto rows = nlohmann::json::array();
    for (const auto& r : st.rows) {
      rows.push_back({{"layer", r.layer},
                      {"head", r.head},
                      {"keys", r.positions},
                      {"weights", r.weights}});
    }
    j["rows"] = rows;
    out << j.dump() << "\n";
  }
  return out.str();
}

AttentionRecord attention_record_from_jsonl(const std::string& text) {
  AttentionRecord rec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    StepTrace st;
    st.position = j.at("position").get<int>();
    st.token = j.at("token").get<int>();
    for (const auto& rj : j.at("rows")) {
      AttnRow r;
      r.layer = rj.at("layer").get<int>();
      r.head = rj.at("head").get<int>();
      r.positions = rj.at("keys").get<std::vector<int>>();
      r.weights = rj.at("weights").get<std::vector<double>>();
      st.rows.push_back(std::move(r));
      rec.n_layers = std::max(rec.n_layers, r.layer + 1);
      rec.n_heads = std::max(rec.n_heads, r.head + 1);
    }
    rec.steps.push_back(std::move(st));
  }
  return rec;
}

}  // namespace dynts
