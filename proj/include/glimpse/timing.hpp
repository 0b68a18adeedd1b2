// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <optional>
#include <string_view>

namespace glimpse {

enum class Phase : std::size_t {
  kInfer = 0,         // model forward calls
  kDecode,            // argmax of the autoregressive row
  kContextDecode,     // argmax over window rows, verification, refill
  kKvCache,           // cache bookkeeping for batched parallel iterations
  kStopCheck,         // stop conditions (excluded from AR comparisons)
};

inline constexpr std::size_t kNumPhases = 5;

std::string_view phase_name(Phase phase);

// Seconds per category plus the enclosing run's wall clock.
struct TimeBreakdown {
  std::array<double, kNumPhases> seconds{};
  double total = 0.0;

  double operator[](Phase p) const { return seconds[static_cast<std::size_t>(p)]; }
  double infer() const { return (*this)[Phase::kInfer]; }
  double decode() const { return (*this)[Phase::kDecode]; }
  double context_decode() const { return (*this)[Phase::kContextDecode]; }
  double kv_cache() const { return (*this)[Phase::kKvCache]; }
  double stop_check() const { return (*this)[Phase::kStopCheck]; }
  double categorized() const;

  TimeBreakdown& operator+=(const TimeBreakdown& other);
};

// Accumulates disjoint phase durations on a monotone clock. Phases never nest;
// begin() while another phase is open, or end() of a phase that is not open,
// throws InstrumentationError.
class PhaseTimer {
 public:
  using Clock = std::chrono::steady_clock;

  void start_run();
  void stop_run();
  void begin(Phase phase);
  void end(Phase phase);

  const TimeBreakdown& breakdown() const { return breakdown_; }

  class Scope {
   public:
    Scope(PhaseTimer& timer, Phase phase) : timer_(timer), phase_(phase) {
      timer_.begin(phase_);
    }
    ~Scope() { timer_.end(phase_); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    PhaseTimer& timer_;
    Phase phase_;
  };

 private:
  TimeBreakdown breakdown_;
  std::optional<Phase> open_;
  Clock::time_point phase_start_{};
  std::optional<Clock::time_point> run_start_;
};

}  // namespace glimpse
