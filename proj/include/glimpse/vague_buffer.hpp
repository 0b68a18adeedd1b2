// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "glimpse/tokens.hpp"

namespace glimpse {

// Exact prefix + approximate window + frontier for one decode instance.
// frontier is the absolute position of the first approximate token and always
// equals prompt_len + exact.size().
struct VagueBuffer {
  TokenSeq exact;
  TokenSeq window;
  std::size_t frontier = 0;
  std::size_t iteration = 0;
  std::size_t prompt_len = 0;
  std::size_t window_len = 0;
};

VagueBuffer init_buffer(std::int64_t prompt_len, std::int64_t window_len, Token pad);

struct VerifyOutcome {
  TokenSeq committed;
  std::size_t match_len = 0;
  TokenSeq next_window;
};

// new_predictions[j] is the model's guess for position frontier + j, so
// new_predictions[0] is the autoregressive token. match_len is the longest
// prefix on which old_window and new_predictions agree. With skip the first
// match_len + 1 predictions commit, otherwise only the first. The uncommitted
// predictions slide left into next_window, which is right-padded with `pad`
// to old_window.size().
VerifyOutcome verify(TokenSpan old_window, TokenSpan new_predictions, bool skip,
                     Token pad);

// Commits are final: exact only ever grows.
VagueBuffer update(VagueBuffer buffer, const VerifyOutcome& outcome);

enum class WindowFill {
  kPad,
  // Replace the padded tail with the continuation that followed the most
  // recent earlier occurrence of the last known token.
  kLookup,
};

// Overwrites window[filled..] given `history` (prompt + exact). Slots with no
// lookup candidate keep `pad`.
void refill_window(TokenSpan history, TokenSeq& window, std::size_t filled,
                   WindowFill fill, Token pad);

struct BatchInstance {
  TokenSeq prompt;
  VagueBuffer buffer;
  bool finished = false;
};

struct BatchBuffers {
  std::vector<BatchInstance> instances;

  std::size_t max_frontier() const;
  std::size_t active() const;
};

}  // namespace glimpse
