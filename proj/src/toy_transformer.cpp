// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "glimpse/backends.hpp"
#include "glimpse/kv_cache.hpp"

namespace glimpse {
namespace {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Exact 24-bit value in [-1, 1).
  float uniform() {
    return static_cast<float>(next() >> 40) * (2.0f / 16777216.0f) - 1.0f;
  }

 private:
  std::uint64_t state_;
};

std::vector<float> draw(std::size_t n, float scale, SplitMix64& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform() * scale;
  return v;
}

void layer_norm(const float* x, const float* g, const float* b, float* out,
                std::size_t d) {
  float mean = 0.0f;
  for (std::size_t i = 0; i < d; ++i) mean += x[i];
  mean /= static_cast<float>(d);
  float var = 0.0f;
  for (std::size_t i = 0; i < d; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<float>(d);
  const float inv = 1.0f / std::sqrt(var + 1e-5f);
  for (std::size_t i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * g[i] + b[i];
}

// out = x * w + bias, w row-major [in x out]. Each output sums over inputs in
// ascending order.
void matvec(const float* x, const float* w, const float* bias, float* out,
            std::size_t in, std::size_t out_dim) {
  for (std::size_t o = 0; o < out_dim; ++o) out[o] = bias[o];
  for (std::size_t i = 0; i < in; ++i) {
    const float xi = x[i];
    const float* row = w + i * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) out[o] += xi * row[o];
  }
}

float gelu(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

}  // namespace

ToyTransformer::ToyTransformer(const ToyConfig& config) : config_(config) {
  spec_.vocab_size = config.vocab_size;
  spec_.pad_id = config.pad_id;
  spec_.eos_id = config.eos_id;
  spec_.supports_cache = true;
  spec_.supports_attention = true;
  spec_.num_layers = config.num_layers;
  spec_.num_heads = config.num_heads;
  spec_.model_dim = config.model_dim;
  spec_.max_positions = config.max_positions;
  spec_.validate();
  if (config.num_heads == 0 || config.model_dim % config.num_heads != 0) {
    throw ConfigError("toy transformer: model_dim must be a multiple of num_heads");
  }
  if (config.max_positions == 0) throw ConfigError("toy transformer: max_positions must be positive");

  const std::size_t d = config.model_dim;
  const std::size_t v = config.vocab_size;
  const float in_scale = 1.0f / std::sqrt(static_cast<float>(d));
  const float hidden_scale = 1.0f / std::sqrt(static_cast<float>(4 * d));
  SplitMix64 rng(config.seed);

  wte_ = draw(v * d, 1.0f, rng);
  wpe_ = draw(config.max_positions * d, 0.1f, rng);
  layers_.resize(config.num_layers);
  for (auto& layer : layers_) {
    layer.ln1_g.assign(d, 1.0f);
    layer.ln1_b.assign(d, 0.0f);
    layer.w_qkv = draw(d * 3 * d, in_scale, rng);
    layer.b_qkv.assign(3 * d, 0.0f);
    layer.w_proj = draw(d * d, in_scale, rng);
    layer.b_proj.assign(d, 0.0f);
    layer.ln2_g.assign(d, 1.0f);
    layer.ln2_b.assign(d, 0.0f);
    layer.w_fc = draw(d * 4 * d, in_scale, rng);
    layer.b_fc.assign(4 * d, 0.0f);
    layer.w_fc_proj = draw(4 * d * d, hidden_scale, rng);
    layer.b_fc_proj.assign(d, 0.0f);
  }
  lnf_g_.assign(d, 1.0f);
  lnf_b_.assign(d, 0.0f);
}

StepOutput ToyTransformer::compute(TokenSpan context, std::size_t block_len,
                                   CacheSlot cache) const {
  const BatchQuery query{context, block_len, cache.instance};
  return std::move(compute_batch({&query, 1}, cache.buffer).front());
}

std::vector<StepOutput> ToyTransformer::compute_batch(
    std::span<const BatchQuery> queries, CacheBuffer* cache) const {
  const std::size_t batch = queries.size();
  const std::size_t d = config_.model_dim;
  const std::size_t heads = config_.num_heads;
  const std::size_t hd = d / heads;
  const std::size_t vocab = config_.vocab_size;
  const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

  std::vector<std::size_t> cached(batch);
  std::vector<TokenSpan> blocks(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& q = queries[i];
    if (q.context.size() > config_.max_positions) {
      throw CapacityError("toy transformer: context of " + std::to_string(q.context.size()) +
                          " tokens exceeds max_positions " +
                          std::to_string(config_.max_positions));
    }
    cached[i] = cache ? cache->valid_len(q.instance) : 0;
    blocks[i] = q.context.subspan(cached[i]);
  }
  const PadPlan kv_plan = plan_kv_padding(cached);
  const InputPadding input = plan_input_padding(blocks, spec_.pad_id);
  const std::size_t width = input.plan.target_len;

  // Without a cache K/V live in per-call scratch: [layer][position][d].
  std::vector<std::vector<float>> local_k(cache ? 0 : batch), local_v(cache ? 0 : batch);
  if (!cache) {
    for (std::size_t i = 0; i < batch; ++i) {
      local_k[i].assign(layers_.size() * queries[i].context.size() * d, 0.0f);
      local_v[i].assign(layers_.size() * queries[i].context.size() * d, 0.0f);
    }
  }
  auto key_at = [&](std::size_t l, std::size_t i, std::size_t pos) -> float* {
    if (cache) return cache->key(l, queries[i].instance, pos).data();
    return &local_k[i][(l * queries[i].context.size() + pos) * d];
  };
  auto value_at = [&](std::size_t l, std::size_t i, std::size_t pos) -> float* {
    if (cache) return cache->value(l, queries[i].instance, pos).data();
    return &local_v[i][(l * queries[i].context.size() + pos) * d];
  };

  std::vector<StepOutput> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out[i].attention.emplace(queries[i].block_len, queries[i].context.size());
  }

  std::vector<float> x(batch * width * d, 0.0f);
  std::vector<float> q_all(batch * width * d, 0.0f);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t b = 0; b < width; ++b) {
      if (!input.plan.admits(i, b)) continue;
      const Token t = input.block[i * width + b];
      const std::size_t pos = cached[i] + b;
      float* xi = &x[(i * width + b) * d];
      for (std::size_t k = 0; k < d; ++k) xi[k] = wte_[t * d + k] + wpe_[pos * d + k];
    }
  }

  std::vector<float> normed(d), qkv(3 * d), attn(d), proj(d), hidden(4 * d);
  std::vector<float> scores;
  std::vector<std::size_t> key_pos;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const bool last_layer = l + 1 == layers_.size();

    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t b = 0; b < width; ++b) {
        if (!input.plan.admits(i, b)) continue;
        const std::size_t pos = cached[i] + b;
        layer_norm(&x[(i * width + b) * d], layer.ln1_g.data(), layer.ln1_b.data(),
                   normed.data(), d);
        matvec(normed.data(), layer.w_qkv.data(), layer.b_qkv.data(), qkv.data(), d, 3 * d);
        std::copy_n(qkv.data(), d, &q_all[(i * width + b) * d]);
        std::copy_n(qkv.data() + d, d, key_at(l, i, pos));
        std::copy_n(qkv.data() + 2 * d, d, value_at(l, i, pos));
      }
    }

    for (std::size_t i = 0; i < batch; ++i) {
      const std::size_t len = input.plan.lengths[i];
      const std::size_t first_query = len - queries[i].block_len;
      for (std::size_t b = 0; b < width; ++b) {
        if (!input.plan.admits(i, b)) continue;
        key_pos.clear();
        for (std::size_t j = 0; j < kv_plan.target_len; ++j) {
          if (kv_plan.admits(i, j)) key_pos.push_back(j);
        }
        for (std::size_t bj = 0; bj <= b; ++bj) {
          if (input.plan.admits(i, bj)) key_pos.push_back(cached[i] + bj);
        }
        key_reads_.fetch_add(key_pos.size(), std::memory_order_relaxed);
        scores.resize(key_pos.size());

        const float* qv = &q_all[(i * width + b) * d];
        std::fill(attn.begin(), attn.end(), 0.0f);
        const bool summarize = last_layer && b >= first_query;
        std::span<float> summary;
        if (summarize) summary = out[i].attention->row(b - first_query);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * hd;
          float max_score = -INFINITY;
          for (std::size_t n = 0; n < key_pos.size(); ++n) {
            const float* kv = key_at(l, i, key_pos[n]) + off;
            float s = 0.0f;
            for (std::size_t k = 0; k < hd; ++k) s += qv[off + k] * kv[k];
            s *= inv_sqrt_hd;
            scores[n] = s;
            if (s > max_score) max_score = s;
          }
          float total = 0.0f;
          for (auto& s : scores) {
            s = std::exp(s - max_score);
            total += s;
          }
          for (std::size_t n = 0; n < key_pos.size(); ++n) {
            const float w = scores[n] / total;
            const float* vv = value_at(l, i, key_pos[n]) + off;
            for (std::size_t k = 0; k < hd; ++k) attn[off + k] += w * vv[k];
            if (summarize) summary[key_pos[n]] += w / static_cast<float>(heads);
          }
        }
        matvec(attn.data(), layer.w_proj.data(), layer.b_proj.data(), proj.data(), d, d);
        float* xi = &x[(i * width + b) * d];
        for (std::size_t k = 0; k < d; ++k) xi[k] += proj[k];
      }
    }

    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t b = 0; b < width; ++b) {
        if (!input.plan.admits(i, b)) continue;
        float* xi = &x[(i * width + b) * d];
        layer_norm(xi, layer.ln2_g.data(), layer.ln2_b.data(), normed.data(), d);
        matvec(normed.data(), layer.w_fc.data(), layer.b_fc.data(), hidden.data(), d, 4 * d);
        for (auto& v : hidden) v = gelu(v);
        matvec(hidden.data(), layer.w_fc_proj.data(), layer.b_fc_proj.data(), proj.data(),
               4 * d, d);
        for (std::size_t k = 0; k < d; ++k) xi[k] += proj[k];
      }
    }
  }

  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t len = input.plan.lengths[i];
    const std::size_t block_len = queries[i].block_len;
    out[i].rows.reserve(block_len);
    for (std::size_t b = len - block_len; b < len; ++b) {
      layer_norm(&x[(i * width + b) * d], lnf_g_.data(), lnf_b_.data(), normed.data(), d);
      LogitsRow row(vocab);
      for (std::size_t v = 0; v < vocab; ++v) {
        const float* e = &wte_[v * d];
        float s = 0.0f;
        for (std::size_t k = 0; k < d; ++k) s += normed[k] * e[k];
        row[v] = s;
      }
      out[i].rows.push_back(std::move(row));
    }
  }
  return out;
}

std::shared_ptr<const ToyTransformer> make_toy_transformer(const ToyConfig& config) {
  return std::make_shared<ToyTransformer>(config);
}

TokenSeq encode_bytes(std::string_view text) {
  TokenSeq out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(c);
  return out;
}

std::string decode_bytes(TokenSpan tokens, Token pad_id, Token eos_id) {
  std::string out;
  for (Token t : tokens) {
    if (t == pad_id || t == eos_id || t > 255) continue;
    out.push_back(static_cast<char>(t));
  }
  return out;
}

}  // namespace glimpse
