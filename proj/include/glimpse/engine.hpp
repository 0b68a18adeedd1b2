// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "glimpse/backend.hpp"
#include "glimpse/kv_cache.hpp"
#include "glimpse/timing.hpp"
#include "glimpse/vague_buffer.hpp"

namespace glimpse {

struct DecodeConfig {
  std::size_t window_len = 0;
  bool skip = true;
  std::size_t max_new_tokens = 128;
  std::optional<std::size_t> iteration_cap;
  std::optional<double> probe_threshold;
  double repetition_penalty = 1.2;
  TokenSeq answer_trigger;
  std::size_t answer_max_tokens = 16;
  WindowFill window_fill = WindowFill::kLookup;
  bool use_cache = true;
  bool reuse_cache_for_answer = true;

  void validate() const;
};

inline constexpr double kDefaultProbeThreshold = 0.3;

enum class StopReason { kEos, kProbe, kIterationCap, kMaxTokens };

std::string_view stop_reason_name(StopReason reason);
StopReason parse_stop_reason(std::string_view name);

struct StopDecision {
  StopReason reason = StopReason::kMaxTokens;
  // Probe score, iteration number, or exact-token position depending on reason.
  double value = 0.0;

  bool operator==(const StopDecision&) const = default;
};

// What check_stop looks at after an update.
struct StopState {
  std::optional<std::size_t> eos_position;  // exact-token index of a committed EOS
  std::optional<double> probe_score;
  std::size_t iteration = 0;
  std::size_t exact_tokens = 0;
};

// Fixed precedence: EOS, probe, iteration cap, token budget.
std::optional<StopDecision> check_stop(const StopState& state,
                                       const DecodeConfig& config);

// Max over window positions of the head-averaged attention weight from the
// last queried position. Zero when the step carries no attention.
double probe_score(const StepOutput& step, std::span<const std::size_t> window_positions);

using ProbeScorer =
    std::function<double(const StepOutput&, std::span<const std::size_t>)>;

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  std::size_t frontier = 0;   // before the update
  TokenSeq window;            // guesses fed to this iteration
  TokenSeq predictions;       // one per queried position
  TokenSeq committed;         // after EOS/budget truncation
  std::size_t match_len = 0;
  TokenSeq window_after;
  std::optional<double> probe_score;
};

struct DecodeTrace {
  std::vector<IterationRecord> iterations;
  TimeBreakdown time;
};

struct DecodeResult {
  TokenSeq prompt;
  TokenSeq exact_rationale;
  TokenSeq approximate_tail;
  TokenSeq answer;
  DecodeTrace trace;
  StopDecision stop;
  bool eos_reached = false;

  std::size_t iterations() const { return trace.iterations.size(); }
};

struct InstanceStep {
  std::size_t instance = 0;
  VerifyOutcome outcome;
  StepOutput step;
};

// A batch of decode instances sharing one backend, one config and one cache.
// Instances advance independently; finished ones are masked out of later
// forward calls.
class DecodeSession {
 public:
  DecodeSession(const LanguageModel& backend, DecodeConfig config,
                std::vector<TokenSeq> prompts);

  // One fused autoregressive + parallel forward over every unfinished
  // instance, then verify, update, cache write-back and stop checks. No
  // instance is modified if the backend throws.
  std::vector<InstanceStep> iterate_once();

  void run();
  bool finished() const { return buffers_.active() == 0; }

  const BatchBuffers& buffers() const { return buffers_; }
  const CacheBuffer* cache() const { return cache_.get(); }
  const DecodeConfig& config() const { return config_; }
  std::size_t size() const { return buffers_.instances.size(); }

  // Rationale-phase result (answer empty).
  DecodeResult result(std::size_t instance) const;
  // Runs the answer phase for a finished instance.
  TokenSeq answer(std::size_t instance);

  void set_probe_scorer(ProbeScorer scorer) { scorer_ = std::move(scorer); }
  PhaseTimer& timer() { return timer_; }

 private:
  const LanguageModel& backend_;
  DecodeConfig config_;
  BatchBuffers buffers_;
  std::unique_ptr<CacheBuffer> cache_;
  std::vector<DecodeTrace> traces_;
  std::vector<std::optional<StopDecision>> stops_;
  std::vector<bool> eos_;
  std::vector<TokenSeq> contexts_;
  PhaseTimer timer_;
  ProbeScorer scorer_;
};

std::size_t required_cache_len(std::size_t prompt_len, const DecodeConfig& config);

DecodeResult run_rationale(TokenSpan prompt, const LanguageModel& backend,
                           const DecodeConfig& config);
std::vector<DecodeResult> run_rationale_batch(std::span<const TokenSeq> prompts,
                                              const LanguageModel& backend,
                                              const DecodeConfig& config);

// Greedy decode of prompt + exact + approx_tail + trigger, up to
// answer_max_tokens or EOS (not included). With `cache`, its row must hold a
// prefix of that context.
TokenSeq answer_phase(TokenSpan prompt, TokenSpan exact, TokenSpan approx_tail,
                      const LanguageModel& backend, const DecodeConfig& config,
                      CacheSlot cache = {});

// Rationale + answer.
DecodeResult fastcot(TokenSpan prompt, const LanguageModel& backend,
                     const DecodeConfig& config);

// Plain greedy decoding to EOS or max_new_tokens. One trace record per token;
// stop checks are timed under Phase::kStopCheck.
DecodeResult ar_baseline(TokenSpan prompt, const LanguageModel& backend,
                         const DecodeConfig& config);

// Autoregressive rationale of exactly `iteration_budget` tokens (fewer at
// EOS), then the answer phase with no approximate tail.
DecodeResult truncated_cot(TokenSpan prompt, const LanguageModel& backend,
                           const DecodeConfig& config, std::size_t iteration_budget);

// Fills result.answer from its rationale and tail.
void attach_answer(DecodeResult& result, const LanguageModel& backend,
                   const DecodeConfig& config);

struct LabeledPrompt {
  TokenSeq prompt;
  TokenSeq reference_answer;
};

// Smallest iteration cap whose sample accuracy is within loss_threshold of
// the uncapped accuracy.
std::size_t calibrate_iteration_cap(std::span<const LabeledPrompt> samples,
                                    const LanguageModel& backend,
                                    const DecodeConfig& config, double loss_threshold);

}  // namespace glimpse
