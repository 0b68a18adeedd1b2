// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <memory>

#include "glimpse/backends.hpp"

namespace glimpse {
namespace {

class CountingBackend final : public LanguageModel {
 public:
  CountingBackend(std::size_t modulus, CountingRule rule)
      : modulus_(modulus), rule_(rule) {
    if (modulus == 0) throw ConfigError("counting modulus must be positive");
    spec_.vocab_size = modulus + 2;
    spec_.pad_id = static_cast<Token>(modulus);
    spec_.eos_id = static_cast<Token>(modulus + 1);
  }

  const BackendSpec& spec() const override { return spec_; }
  std::string name() const override { return "counting"; }

 protected:
  StepOutput compute(TokenSpan context, std::size_t block_len,
                     CacheSlot) const override {
    StepOutput out;
    out.rows.reserve(block_len);
    const std::size_t split = context.size() - block_len;
    for (std::size_t j = 0; j < block_len; ++j) {
      const std::size_t last = split + j;
      std::size_t next = 0;
      if (rule_ == CountingRule::kAnchored) {
        next = (context[0] + last + 1) % modulus_;
      } else {
        next = (context[last] + 1) % modulus_;
      }
      LogitsRow row(spec_.vocab_size, 0.0f);
      row[next] = 1.0f;
      out.rows.push_back(std::move(row));
    }
    return out;
  }

 private:
  std::size_t modulus_;
  CountingRule rule_;
  BackendSpec spec_;
};

}  // namespace

std::shared_ptr<const LanguageModel> make_counting_backend(std::size_t modulus,
                                                           CountingRule rule) {
  return std::make_shared<CountingBackend>(modulus, rule);
}

}  // namespace glimpse
