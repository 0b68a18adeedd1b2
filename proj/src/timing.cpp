// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/timing.hpp"

#include <numeric>
#include <string>

#include "glimpse/tokens.hpp"

namespace glimpse {

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kInfer: return "infer";
    case Phase::kDecode: return "decode";
    case Phase::kContextDecode: return "context_decode";
    case Phase::kKvCache: return "kv_cache";
    case Phase::kStopCheck: return "stop_check";
  }
  return "unknown";
}

double TimeBreakdown::categorized() const {
  return std::accumulate(seconds.begin(), seconds.end(), 0.0);
}

TimeBreakdown& TimeBreakdown::operator+=(const TimeBreakdown& other) {
  for (std::size_t i = 0; i < kNumPhases; ++i) seconds[i] += other.seconds[i];
  total += other.total;
  return *this;
}

void PhaseTimer::start_run() {
  if (run_start_) throw InstrumentationError("run already started");
  run_start_ = Clock::now();
}

void PhaseTimer::stop_run() {
  if (!run_start_) throw InstrumentationError("stop_run without start_run");
  if (open_) {
    throw InstrumentationError("phase '" + std::string(phase_name(*open_)) +
                               "' still open at end of run");
  }
  breakdown_.total += std::chrono::duration<double>(Clock::now() - *run_start_).count();
  run_start_.reset();
}

void PhaseTimer::begin(Phase phase) {
  if (open_) {
    throw InstrumentationError("cannot begin '" + std::string(phase_name(phase)) +
                               "' inside '" + std::string(phase_name(*open_)) + "'");
  }
  open_ = phase;
  phase_start_ = Clock::now();
}

void PhaseTimer::end(Phase phase) {
  const auto now = Clock::now();
  if (open_ != phase) {
    throw InstrumentationError("end of '" + std::string(phase_name(phase)) +
                               "' without a matching begin");
  }
  breakdown_.seconds[static_cast<std::size_t>(phase)] +=
      std::chrono::duration<double>(now - phase_start_).count();
  open_.reset();
}

}  // namespace glimpse
