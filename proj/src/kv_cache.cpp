// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/kv_cache.hpp"

#include <algorithm>
#include <string>

namespace glimpse {

CacheBuffer::CacheBuffer(std::size_t batch, std::size_t max_len, const BackendSpec& spec)
    : batch_(batch),
      max_len_(max_len),
      num_layers_(spec.num_layers),
      width_(spec.model_dim) {
  if (batch == 0 || max_len == 0) {
    throw ConfigError("cache buffer: batch and max_len must be positive");
  }
  if (num_layers_ == 0 || width_ == 0) {
    throw ConfigError("cache buffer: backend spec has no layer/width dimensions");
  }
  const std::size_t n = num_layers_ * batch_ * max_len_ * width_;
  keys_.assign(n, 0.0f);
  values_.assign(n, 0.0f);
  tokens_.assign(batch_ * max_len_, 0);
  valid_len_.assign(batch_, 0);
  computed_len_.assign(batch_, 0);
  allocations_ = 1;
}

std::size_t CacheBuffer::offset(std::size_t layer, std::size_t instance,
                                std::size_t pos) const {
  require(layer < num_layers_ && instance < batch_ && pos < max_len_,
          "cache buffer: index out of range");
  return ((layer * batch_ + instance) * max_len_ + pos) * width_;
}

std::span<float> CacheBuffer::key(std::size_t layer, std::size_t instance, std::size_t pos) {
  return {keys_.data() + offset(layer, instance, pos), width_};
}

std::span<float> CacheBuffer::value(std::size_t layer, std::size_t instance, std::size_t pos) {
  return {values_.data() + offset(layer, instance, pos), width_};
}

std::span<const float> CacheBuffer::key(std::size_t layer, std::size_t instance,
                                        std::size_t pos) const {
  return {keys_.data() + offset(layer, instance, pos), width_};
}

std::span<const float> CacheBuffer::value(std::size_t layer, std::size_t instance,
                                          std::size_t pos) const {
  return {values_.data() + offset(layer, instance, pos), width_};
}

void CacheBuffer::check_context(std::size_t instance, TokenSpan context,
                                std::size_t block_len) const {
  require(instance < batch_, "cache buffer: instance out of range");
  if (context.size() > max_len_) {
    throw CapacityError("cache buffer: context of " + std::to_string(context.size()) +
                        " tokens exceeds max_len " + std::to_string(max_len_));
  }
  const std::size_t valid = valid_len_[instance];
  if (valid > context.size() - block_len) {
    throw CacheMismatch("cache holds " + std::to_string(valid) +
                        " positions but only " + std::to_string(context.size() - block_len) +
                        " precede the queried block");
  }
  const Token* cached = tokens_.data() + instance * max_len_;
  if (!std::equal(cached, cached + valid, context.begin())) {
    throw CacheMismatch("cached tokens differ from the context prefix");
  }
}

void CacheBuffer::stage(std::size_t instance, TokenSpan context) {
  const std::size_t valid = valid_len_[instance];
  std::copy(context.begin() + static_cast<std::ptrdiff_t>(valid), context.end(),
            tokens_.begin() + static_cast<std::ptrdiff_t>(instance * max_len_ + valid));
  computed_len_[instance] = context.size();
}

void CacheBuffer::write_back(std::size_t instance, std::size_t first_pos, std::size_t count) {
  require(instance < batch_, "write_back: instance out of range");
  if (first_pos != valid_len_[instance]) {
    throw ContractViolation("write_back: positions must start at valid_len " +
                            std::to_string(valid_len_[instance]) + ", got " +
                            std::to_string(first_pos));
  }
  if (first_pos + count > computed_len_[instance]) {
    throw ContractViolation("write_back: positions beyond the last computed block");
  }
  valid_len_[instance] += count;
}

void CacheBuffer::reset(std::size_t instance) {
  require(instance < batch_, "reset: instance out of range");
  valid_len_[instance] = 0;
  computed_len_[instance] = 0;
}

void CacheBuffer::truncate(std::size_t instance, std::size_t len) {
  require(instance < batch_, "truncate: instance out of range");
  require(len <= valid_len_[instance], "truncate: cannot grow the valid prefix");
  valid_len_[instance] = len;
  computed_len_[instance] = len;
}

Token CacheBuffer::cached_token(std::size_t instance, std::size_t pos) const {
  require(instance < batch_ && pos < valid_len_[instance], "cached_token: out of range");
  return tokens_[instance * max_len_ + pos];
}

bool PadPlan::is_identity() const {
  return std::all_of(pad_counts.begin(), pad_counts.end(),
                     [](std::size_t n) { return n == 0; });
}

namespace {

PadPlan make_plan(std::span<const std::size_t> lengths) {
  require(!lengths.empty(), "padding plan: batch must be nonempty");
  PadPlan plan;
  plan.target_len = *std::max_element(lengths.begin(), lengths.end());
  plan.lengths.assign(lengths.begin(), lengths.end());
  plan.pad_counts.reserve(lengths.size());
  plan.mask.assign(lengths.size() * plan.target_len, 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    plan.pad_counts.push_back(plan.target_len - lengths[i]);
    std::fill_n(plan.mask.begin() + static_cast<std::ptrdiff_t>(i * plan.target_len),
                lengths[i], std::uint8_t{1});
  }
  return plan;
}

}  // namespace

PadPlan plan_kv_padding(std::span<const std::size_t> valid_lens) {
  return make_plan(valid_lens);
}

InputPadding plan_input_padding(std::span<const TokenSpan> blocks, Token pad) {
  std::vector<std::size_t> lengths;
  lengths.reserve(blocks.size());
  for (auto b : blocks) lengths.push_back(b.size());
  InputPadding out;
  out.plan = make_plan(lengths);
  out.block.assign(blocks.size() * out.plan.target_len, pad);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::copy(blocks[i].begin(), blocks[i].end(),
              out.block.begin() + static_cast<std::ptrdiff_t>(i * out.plan.target_len));
  }
  return out;
}

}  // namespace glimpse
