// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glimpse/engine.hpp"

namespace glimpse {

struct WindowSnapshot {
  std::size_t iteration = 0;
  std::size_t frontier = 0;
  TokenSeq guesses;
  // Autoregressive tokens at positions frontier .. frontier + guesses.size().
  TokenSeq reference;
};

struct WindowRecord {
  bool first_hit = false;
  std::size_t total_hit = 0;
  // Window guesses that occur anywhere in the reference region.
  std::size_t occur_pd_ad = 0;
  // Reference tokens that occur anywhere among the guesses.
  std::size_t occur_ad_pd = 0;
  std::size_t width = 0;
};

struct HitReport {
  std::size_t windows = 0;
  std::size_t positions = 0;
  std::size_t first_hit = 0;
  std::size_t total_hit = 0;
  std::size_t occur_pd_ad = 0;
  std::size_t occur_ad_pd = 0;

  // FH is per window, the others per window position.
  double first_hit_ratio() const;
  double total_hit_ratio() const;
  double occur_pd_ad_ratio() const;
  double occur_ad_pd_ratio() const;

  HitReport& operator+=(const HitReport& other);
  bool operator==(const HitReport&) const = default;
};

WindowRecord score_window(const WindowSnapshot& snapshot);
HitReport aggregate(std::span<const WindowRecord> records);

// The autoregressive stream used as reference: generated tokens followed by
// EOS when the run ended on it.
TokenSeq reference_stream(const DecodeResult& ar);

// One snapshot per iteration whose window lies fully inside the reference.
std::vector<WindowSnapshot> window_snapshots(const DecodeResult& fastcot,
                                             TokenSpan reference);

HitReport hit_report(const DecodeResult& fastcot, const DecodeResult& ar);

struct IterationSavings {
  std::size_t ar_iterations = 0;
  std::size_t fastcot_iterations = 0;
  std::size_t ar_tokens = 0;
  std::size_t fastcot_tokens = 0;
  std::size_t saved_iterations = 0;
  double wall_clock_ratio = 0.0;  // AR wall clock / FastCoT wall clock
};

IterationSavings iteration_savings(const DecodeResult& fastcot, const DecodeResult& ar);

}  // namespace glimpse
