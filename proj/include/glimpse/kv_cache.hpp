// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glimpse/backend.hpp"

namespace glimpse {

// Preallocated key/value storage for a batch of decode instances.
//
// Layout is [layer][instance][position][model_dim] for keys and values, plus
// the token id stored at each position so a forward call can check that the
// cached prefix still describes its context. Everything is allocated once in
// the constructor and zero-filled.
//
// Positions < valid_len(i) are content. A forward call writes scratch K/V for
// positions [valid_len, computed_len); write_back promotes a prefix of that
// scratch to content. Positions >= valid_len are never read as content.
class CacheBuffer {
 public:
  CacheBuffer(std::size_t batch, std::size_t max_len, const BackendSpec& spec);

  std::size_t batch() const { return batch_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t num_layers() const { return num_layers_; }
  std::size_t width() const { return width_; }

  std::size_t valid_len(std::size_t instance) const { return valid_len_.at(instance); }
  std::span<const std::size_t> valid_lens() const { return valid_len_; }
  std::size_t computed_len(std::size_t instance) const {
    return computed_len_.at(instance);
  }

  std::span<float> key(std::size_t layer, std::size_t instance, std::size_t pos);
  std::span<float> value(std::size_t layer, std::size_t instance, std::size_t pos);
  std::span<const float> key(std::size_t layer, std::size_t instance,
                             std::size_t pos) const;
  std::span<const float> value(std::size_t layer, std::size_t instance,
                               std::size_t pos) const;

  // Throws CacheMismatch if the cached prefix is longer than
  // len(context) - block_len or holds different tokens, CapacityError if the
  // context does not fit.
  void check_context(std::size_t instance, TokenSpan context,
                     std::size_t block_len) const;
  // Records the tokens of the uncached suffix and marks it computed.
  void stage(std::size_t instance, TokenSpan context);

  // Promotes scratch positions [first_pos, first_pos + count) to content.
  // first_pos must equal valid_len (no gap, no overlap) and the range must
  // have been computed by the last forward call.
  void write_back(std::size_t instance, std::size_t first_pos, std::size_t count);

  // Drops all content for one instance.
  void reset(std::size_t instance);
  // Shrinks valid_len to `len`; the dropped positions become scratch again.
  void truncate(std::size_t instance, std::size_t len);
  Token cached_token(std::size_t instance, std::size_t pos) const;

  std::uint64_t allocation_count() const { return allocations_; }
  const float* key_storage() const { return keys_.data(); }

 private:
  std::size_t offset(std::size_t layer, std::size_t instance, std::size_t pos) const;

  std::size_t batch_;
  std::size_t max_len_;
  std::size_t num_layers_;
  std::size_t width_;
  std::vector<float> keys_;
  std::vector<float> values_;
  std::vector<Token> tokens_;
  std::vector<std::size_t> valid_len_;
  std::vector<std::size_t> computed_len_;
  std::uint64_t allocations_ = 0;
};

// Padding plan for a batch whose members have unequal lengths. Members are
// right-padded to target_len; mask(i, p) is true for real positions only.
struct PadPlan {
  std::size_t target_len = 0;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> pad_counts;
  std::vector<std::uint8_t> mask;  // [batch x target_len]

  std::size_t batch() const { return lengths.size(); }
  bool admits(std::size_t instance, std::size_t pos) const {
    return mask[instance * target_len + pos] != 0;
  }
  bool is_identity() const;
};

// Type one: cache rows of unequal valid length share one sequence axis sized
// to the batch maximum; instance i admits its first valid_lens[i] positions.
PadPlan plan_kv_padding(std::span<const std::size_t> valid_lens);

struct InputPadding {
  PadPlan plan;
  std::vector<Token> block;  // [batch x plan.target_len]
};

// Type two: pending input blocks of unequal length padded with `pad`.
InputPadding plan_input_padding(std::span<const TokenSpan> blocks, Token pad);

}  // namespace glimpse
