// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glimpse/tokens.hpp"

namespace glimpse {

class CacheBuffer;

struct BackendSpec {
  std::size_t vocab_size = 0;
  Token pad_id = 0;
  Token eos_id = 1;
  bool supports_cache = false;
  bool supports_attention = false;
  // Transformer shape; zero for table-driven backends.
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t model_dim = 0;
  std::size_t max_positions = 0;

  std::size_t head_dim() const { return num_heads ? model_dim / num_heads : 0; }
  void validate() const;
};

using LogitsRow = std::vector<float>;

// Row-major [query positions x context positions] attention weights.
class AttentionMatrix {
 public:
  AttentionMatrix() = default;
  AttentionMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// One LogitsRow per queried position. rows[j] is the next-token score vector
// conditioned on context[0 .. split + j], split = len(context) - block_len.
struct StepOutput {
  std::vector<LogitsRow> rows;
  std::optional<AttentionMatrix> attention;
};

struct CacheSlot {
  CacheBuffer* buffer = nullptr;
  std::size_t instance = 0;

  explicit operator bool() const { return buffer != nullptr; }
};

struct BatchQuery {
  TokenSpan context;
  std::size_t block_len = 1;
  // Cache row owned by this query; ignored without a cache.
  std::size_t instance = 0;
};

// Causal language model consumed by the decode engine. Implementations are
// immutable after construction and may be shared across threads.
//
// forward() validates the call, stages the uncached suffix in the cache (if
// any) and dispatches to compute(). The cache's valid length is not advanced
// here; the caller persists exact positions with CacheBuffer::write_back.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const BackendSpec& spec() const = 0;
  virtual std::string name() const = 0;

  StepOutput forward(TokenSpan context, std::size_t block_len,
                     CacheSlot cache = {}) const;

  // All queries must use distinct cache rows. Results are bit-identical to
  // issuing the queries one at a time.
  std::vector<StepOutput> forward_batch(std::span<const BatchQuery> queries,
                                        CacheBuffer* cache) const;

 protected:
  virtual StepOutput compute(TokenSpan context, std::size_t block_len,
                             CacheSlot cache) const = 0;
  virtual std::vector<StepOutput> compute_batch(
      std::span<const BatchQuery> queries, CacheBuffer* cache) const;

 private:
  void check_query(TokenSpan context, std::size_t block_len,
                   CacheSlot cache) const;
};

// Presence counts over the vocabulary, used to apply the repetition penalty
// incrementally while scanning a block of rows.
class TokenPresence {
 public:
  explicit TokenPresence(std::size_t vocab_size = 0) : counts_(vocab_size, 0) {}
  TokenPresence(std::size_t vocab_size, TokenSpan tokens);

  void add(Token t) { ++counts_.at(t); }
  void add(TokenSpan tokens) {
    for (Token t : tokens) add(t);
  }
  void remove(Token t);
  bool contains(Token t) const { return t < counts_.size() && counts_[t] != 0; }
  std::size_t vocab_size() const { return counts_.size(); }

 private:
  std::vector<std::uint32_t> counts_;
};

// Argmax over penalized scores. For every token present in the history a
// positive score is divided by `penalty` and a negative score multiplied by
// it. Ties go to the lowest token id.
Token greedy_pick(std::span<const float> row, TokenSpan history, double penalty);
Token greedy_pick(std::span<const float> row, const TokenPresence& history,
                  double penalty);

}  // namespace glimpse
