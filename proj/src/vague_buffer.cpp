// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/vague_buffer.hpp"

#include <algorithm>

namespace glimpse {

VagueBuffer init_buffer(std::int64_t prompt_len, std::int64_t window_len, Token pad) {
  require(prompt_len >= 0, "init_buffer: prompt_len must be non-negative");
  require(window_len >= 0, "init_buffer: window length must be non-negative");
  VagueBuffer buffer;
  buffer.prompt_len = static_cast<std::size_t>(prompt_len);
  buffer.window_len = static_cast<std::size_t>(window_len);
  buffer.frontier = buffer.prompt_len;
  buffer.window.assign(buffer.window_len, pad);
  return buffer;
}

VerifyOutcome verify(TokenSpan old_window, TokenSpan new_predictions, bool skip,
                     Token pad) {
  require(new_predictions.size() == old_window.size() + 1,
          "verify: expected one prediction per window slot plus the frontier");
  VerifyOutcome out;
  while (out.match_len < old_window.size() &&
         old_window[out.match_len] == new_predictions[out.match_len]) {
    ++out.match_len;
  }
  const std::size_t commit = skip ? out.match_len + 1 : 1;
  out.committed.assign(new_predictions.begin(),
                       new_predictions.begin() + static_cast<std::ptrdiff_t>(commit));
  out.next_window.assign(new_predictions.begin() + static_cast<std::ptrdiff_t>(commit),
                         new_predictions.end());
  out.next_window.resize(old_window.size(), pad);
  return out;
}

VagueBuffer update(VagueBuffer buffer, const VerifyOutcome& outcome) {
  require(!outcome.committed.empty(), "update: every iteration commits a token");
  require(outcome.next_window.size() == buffer.window_len,
          "update: next window must keep the configured length");
  buffer.exact.insert(buffer.exact.end(), outcome.committed.begin(), outcome.committed.end());
  buffer.frontier += outcome.committed.size();
  buffer.window = outcome.next_window;
  ++buffer.iteration;
  return buffer;
}

void refill_window(TokenSpan history, TokenSeq& window, std::size_t filled,
                   WindowFill fill, Token pad) {
  require(filled <= window.size(), "refill_window: filled exceeds window length");
  for (std::size_t s = filled; s < window.size(); ++s) window[s] = pad;
  if (fill == WindowFill::kPad || filled == window.size()) return;

  const std::size_t h = history.size();
  // Sequence view: history followed by the window slots written so far.
  auto at = [&](std::size_t k) { return k < h ? history[k] : window[k - h]; };
  const std::size_t len = h + filled;
  if (len < 2) return;
  const Token last = at(len - 1);
  std::size_t src = len;
  for (std::size_t i = len - 1; i-- > 0;) {
    if (at(i) == last) {
      src = i + 1;
      break;
    }
  }
  if (src == len) return;
  for (std::size_t s = filled; s < window.size(); ++s) window[s] = at(src++);
}

std::size_t BatchBuffers::max_frontier() const {
  std::size_t m = 0;
  for (const auto& inst : instances) m = std::max(m, inst.buffer.frontier);
  return m;
}

std::size_t BatchBuffers::active() const {
  return static_cast<std::size_t>(std::count_if(
      instances.begin(), instances.end(), [](const BatchInstance& i) { return !i.finished; }));
}

}  // namespace glimpse
