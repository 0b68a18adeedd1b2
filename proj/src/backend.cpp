// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/backend.hpp"

#include <cmath>
#include <set>
#include <string>

#include "glimpse/kv_cache.hpp"

namespace glimpse {

void BackendSpec::validate() const {
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (pad_id >= vocab_size || eos_id >= vocab_size) {
    throw ConfigError("pad/eos ids must lie inside the vocabulary");
  }
  if (pad_id == eos_id) throw ConfigError("pad and eos ids must differ");
  if (supports_cache && (num_layers == 0 || model_dim == 0)) {
    throw ConfigError("cache-capable backends need layer and width counts");
  }
}

void LanguageModel::check_query(TokenSpan context, std::size_t block_len,
                                CacheSlot cache) const {
  require(!context.empty(), "forward: context must be nonempty");
  require(block_len >= 1 && block_len <= context.size(),
          "forward: block_len must lie in [1, len(context)]");
  const auto& s = spec();
  for (Token t : context) {
    require(t < s.vocab_size, "forward: token id outside the vocabulary");
  }
  if (cache) {
    if (!s.supports_cache) {
      throw ConfigError("backend '" + name() + "' does not support a KV cache");
    }
    cache.buffer->check_context(cache.instance, context, block_len);
  }
}

StepOutput LanguageModel::forward(TokenSpan context, std::size_t block_len,
                                  CacheSlot cache) const {
  check_query(context, block_len, cache);
  if (cache) cache.buffer->stage(cache.instance, context);
  return compute(context, block_len, cache);
}

std::vector<StepOutput> LanguageModel::forward_batch(
    std::span<const BatchQuery> queries, CacheBuffer* cache) const {
  std::set<std::size_t> rows;
  for (const auto& q : queries) {
    check_query(q.context, q.block_len, CacheSlot{cache, q.instance});
    if (cache) {
      require(rows.insert(q.instance).second,
              "forward_batch: cache rows must be distinct");
    }
  }
  if (cache) {
    for (const auto& q : queries) cache->stage(q.instance, q.context);
  }
  return compute_batch(queries, cache);
}

std::vector<StepOutput> LanguageModel::compute_batch(
    std::span<const BatchQuery> queries, CacheBuffer* cache) const {
  std::vector<StepOutput> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    out.push_back(compute(q.context, q.block_len, CacheSlot{cache, q.instance}));
  }
  return out;
}

TokenPresence::TokenPresence(std::size_t vocab_size, TokenSpan tokens)
    : counts_(vocab_size, 0) {
  add(tokens);
}

void TokenPresence::remove(Token t) {
  require(t < counts_.size() && counts_[t] > 0,
          "TokenPresence: removing a token that is not present");
  --counts_[t];
}

Token greedy_pick(std::span<const float> row, const TokenPresence& history,
                  double penalty) {
  require(!row.empty(), "greedy_pick: empty row");
  require(penalty >= 1.0, "greedy_pick: penalty must be >= 1");
  const float p = static_cast<float>(penalty);
  Token best = 0;
  float best_score = 0.0f;
  for (std::size_t i = 0; i < row.size(); ++i) {
    float s = row[i];
    if (p != 1.0f && history.contains(static_cast<Token>(i))) {
      s = s > 0.0f ? s / p : s * p;
    }
    if (i == 0 || s > best_score) {
      best = static_cast<Token>(i);
      best_score = s;
    }
  }
  return best;
}

Token greedy_pick(std::span<const float> row, TokenSpan history, double penalty) {
  for (float s : row) require(std::isfinite(s), "greedy_pick: non-finite score");
  TokenPresence presence(row.size());
  for (Token t : history) {
    if (t < row.size()) presence.add(t);
  }
  return greedy_pick(row, presence, penalty);
}

}  // namespace glimpse
