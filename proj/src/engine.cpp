// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/engine.hpp"

#include <algorithm>
#include <string>

#include <spdlog/spdlog.h>

namespace glimpse {
namespace {

// Re-raises the in-flight exception with `where` prepended, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const CacheMismatch& e) {
    throw CacheMismatch(where + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(where + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw ContractViolation(where + ": " + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TokenSeq strip_eos(const TokenSeq& exact, Token eos) {
  if (!exact.empty() && exact.back() == eos) return {exact.begin(), exact.end() - 1};
  return exact;
}

bool wants_cache(const LanguageModel& backend, const DecodeConfig& config) {
  return config.use_cache && backend.spec().supports_cache;
}

}  // namespace

void DecodeConfig::validate() const {
  if (max_new_tokens == 0) throw ConfigError("max_new_tokens must be positive");
  if (iteration_cap && *iteration_cap == 0) throw ConfigError("iteration_cap must be positive");
  if (probe_threshold && (*probe_threshold < 0.0 || *probe_threshold > 1.0)) {
    throw ConfigError("probe_threshold must lie in [0, 1]");
  }
  if (!(repetition_penalty >= 1.0)) throw ConfigError("repetition_penalty must be >= 1");
  if (answer_max_tokens == 0) throw ConfigError("answer_max_tokens must be positive");
}

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kEos: return "eos";
    case StopReason::kProbe: return "probe";
    case StopReason::kIterationCap: return "iteration_cap";
    case StopReason::kMaxTokens: return "max_tokens";
  }
  return "unknown";
}

StopReason parse_stop_reason(std::string_view name) {
  for (auto r : {StopReason::kEos, StopReason::kProbe, StopReason::kIterationCap,
                 StopReason::kMaxTokens}) {
    if (stop_reason_name(r) == name) return r;
  }
  throw ConfigError("unknown stop reason '" + std::string(name) + "'");
}

std::optional<StopDecision> check_stop(const StopState& state, const DecodeConfig& config) {
  if (state.eos_position) {
    return StopDecision{StopReason::kEos, static_cast<double>(*state.eos_position)};
  }
  if (config.probe_threshold && state.probe_score &&
      *state.probe_score >= *config.probe_threshold) {
    return StopDecision{StopReason::kProbe, *state.probe_score};
  }
  if (config.iteration_cap && state.iteration >= *config.iteration_cap) {
    return StopDecision{StopReason::kIterationCap, static_cast<double>(state.iteration)};
  }
  if (state.exact_tokens >= config.max_new_tokens) {
    return StopDecision{StopReason::kMaxTokens, static_cast<double>(state.exact_tokens)};
  }
  return std::nullopt;
}

double probe_score(const StepOutput& step, std::span<const std::size_t> window_positions) {
  if (!step.attention || step.attention->rows() == 0) return 0.0;
  const auto row = step.attention->row(step.attention->rows() - 1);
  double best = 0.0;
  for (std::size_t p : window_positions) {
    if (p < row.size()) best = std::max(best, static_cast<double>(row[p]));
  }
  return best;
}

std::size_t required_cache_len(std::size_t prompt_len, const DecodeConfig& config) {
  return prompt_len + config.max_new_tokens + 2 * config.window_len +
         config.answer_trigger.size() + config.answer_max_tokens + 1;
}

// ---------------------------------------------------------------------------
// DecodeSession

DecodeSession::DecodeSession(const LanguageModel& backend, DecodeConfig config,
                             std::vector<TokenSeq> prompts)
    : backend_(backend), config_(std::move(config)), scorer_(&probe_score) {
  config_.validate();
  if (prompts.empty()) throw ConfigError("decode session needs at least one prompt");
  const auto& spec = backend_.spec();
  std::size_t max_len = 0;
  for (auto& prompt : prompts) {
    require(!prompt.empty(), "decode: prompt must be nonempty");
    max_len = std::max(max_len, required_cache_len(prompt.size(), config_));
    BatchInstance inst;
    inst.buffer = init_buffer(static_cast<std::int64_t>(prompt.size()),
                              static_cast<std::int64_t>(config_.window_len), spec.pad_id);
    inst.prompt = std::move(prompt);
    buffers_.instances.push_back(std::move(inst));
  }
  const std::size_t n = buffers_.instances.size();
  if (wants_cache(backend_, config_)) {
    cache_ = std::make_unique<CacheBuffer>(n, max_len, spec);
  }
  traces_.resize(n);
  stops_.resize(n);
  eos_.assign(n, false);
  contexts_.resize(n);
}

std::vector<InstanceStep> DecodeSession::iterate_once() {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < buffers_.instances.size(); ++i) {
    if (!buffers_.instances[i].finished) active.push_back(i);
  }
  if (active.empty()) return {};

  const auto& spec = backend_.spec();
  const std::size_t c = config_.window_len;
  std::vector<BatchQuery> queries;
  queries.reserve(active.size());
  for (std::size_t i : active) {
    const auto& inst = buffers_.instances[i];
    auto& ctx = contexts_[i];
    ctx.clear();
    ctx.insert(ctx.end(), inst.prompt.begin(), inst.prompt.end());
    ctx.insert(ctx.end(), inst.buffer.exact.begin(), inst.buffer.exact.end());
    ctx.insert(ctx.end(), inst.buffer.window.begin(), inst.buffer.window.end());
    queries.push_back(BatchQuery{ctx, c + 1, i});
  }

  std::vector<StepOutput> steps;
  {
    PhaseTimer::Scope scope(timer_, Phase::kInfer);
    try {
      steps = backend_.forward_batch(queries, cache_.get());
    } catch (const Error&) {
      rethrow_with_context("iteration " +
                           std::to_string(buffers_.instances[active.front()].buffer.iteration + 1));
    }
  }

  std::vector<InstanceStep> out;
  out.reserve(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t i = active[k];
    auto& inst = buffers_.instances[i];
    const VagueBuffer& buf = inst.buffer;
    const StepOutput& step = steps[k];
    TokenSeq predictions(c + 1);
    VerifyOutcome outcome;
    TokenSeq committed;
    TokenSeq next_window;
    std::optional<std::size_t> eos_position;
    const std::size_t exact_before = strip_eos(buf.exact, spec.eos_id).size();

    // History for row j is the context up to and including its query token.
    TokenPresence presence(spec.vocab_size, inst.prompt);
    presence.add(buf.exact);
    {
      PhaseTimer::Scope scope(timer_, Phase::kDecode);
      predictions[0] = greedy_pick(step.rows[0], presence, config_.repetition_penalty);
    }
    {
      PhaseTimer::Scope scope(timer_, Phase::kContextDecode);
      for (std::size_t j = 1; j <= c; ++j) {
        presence.add(buf.window[j - 1]);
        predictions[j] = greedy_pick(step.rows[j], presence, config_.repetition_penalty);
      }
      outcome = verify(buf.window, predictions, config_.skip, spec.pad_id);

      committed = outcome.committed;
      const std::size_t budget = config_.max_new_tokens - exact_before;
      const auto eos_it = std::find(committed.begin(), committed.end(), spec.eos_id);
      const auto eos_idx = static_cast<std::size_t>(eos_it - committed.begin());
      TokenSeq overflow;
      if (eos_it != committed.end() && eos_idx < budget) {
        committed.resize(eos_idx + 1);
        eos_position = exact_before + eos_idx;
      } else if (committed.size() > budget) {
        // Verified tokens past the budget go back to the front of the window.
        overflow.assign(committed.begin() + static_cast<std::ptrdiff_t>(budget), committed.end());
        committed.resize(budget);
      }
      const std::size_t real = overflow.size() + (c + 1 - outcome.committed.size());
      next_window = concat({overflow, outcome.next_window});
      next_window.resize(c, spec.pad_id);

      TokenSeq history = concat({inst.prompt, buf.exact, committed});
      refill_window(history, next_window, std::min(real, c), config_.window_fill, spec.pad_id);
    }

    VerifyOutcome applied{committed, outcome.match_len, next_window};
    const std::size_t frontier_before = buf.frontier;
    VagueBuffer next = update(buf, applied);

    if (cache_) {
      PhaseTimer::Scope scope(timer_, Phase::kKvCache);
      const std::size_t valid = cache_->valid_len(i);
      cache_->write_back(i, valid, next.frontier - 1 - valid);
    }

    std::optional<double> score;
    std::optional<StopDecision> stop;
    {
      PhaseTimer::Scope scope(timer_, Phase::kStopCheck);
      if (config_.probe_threshold && spec.supports_attention) {
        std::vector<std::size_t> positions(c);
        for (std::size_t j = 0; j < c; ++j) positions[j] = frontier_before + j;
        score = scorer_(step, positions);
      }
      StopState state;
      state.eos_position = eos_position;
      state.probe_score = score;
      state.iteration = next.iteration;
      state.exact_tokens = exact_before + committed.size() - (eos_position ? 1 : 0);
      stop = check_stop(state, config_);
    }

    IterationRecord record;
    record.iteration = next.iteration;
    record.frontier = frontier_before;
    record.window = buf.window;
    record.predictions = predictions;
    record.committed = committed;
    record.match_len = outcome.match_len;
    record.window_after = next.window;
    record.probe_score = score;
    traces_[i].iterations.push_back(std::move(record));

    inst.buffer = std::move(next);
    if (stop) {
      inst.finished = true;
      stops_[i] = stop;
      eos_[i] = eos_position.has_value();
      spdlog::debug("instance {} stopped: {} after {} iterations", i,
                    stop_reason_name(stop->reason), inst.buffer.iteration);
    }
    out.push_back(InstanceStep{i, std::move(outcome), std::move(steps[k])});
  }
  return out;
}

void DecodeSession::run() {
  timer_.start_run();
  while (!finished()) iterate_once();
  timer_.stop_run();
}

DecodeResult DecodeSession::result(std::size_t instance) const {
  const auto& inst = buffers_.instances.at(instance);
  require(inst.finished, "result: instance has not finished");
  DecodeResult r;
  r.prompt = inst.prompt;
  r.exact_rationale = strip_eos(inst.buffer.exact, backend_.spec().eos_id);
  r.approximate_tail = inst.buffer.window;
  r.trace = traces_[instance];
  r.trace.time = timer_.breakdown();
  r.stop = *stops_[instance];
  r.eos_reached = eos_[instance];
  return r;
}

TokenSeq DecodeSession::answer(std::size_t instance) {
  const auto& inst = buffers_.instances.at(instance);
  require(inst.finished, "answer: instance has not finished");
  const TokenSeq exact = strip_eos(inst.buffer.exact, backend_.spec().eos_id);
  CacheSlot slot;
  if (cache_ && config_.reuse_cache_for_answer) slot = CacheSlot{cache_.get(), instance};
  return answer_phase(inst.prompt, exact, inst.buffer.window, backend_, config_, slot);
}

// ---------------------------------------------------------------------------
// Entry points

DecodeResult run_rationale(TokenSpan prompt, const LanguageModel& backend,
                           const DecodeConfig& config) {
  DecodeSession session(backend, config, {TokenSeq(prompt.begin(), prompt.end())});
  session.run();
  return session.result(0);
}

std::vector<DecodeResult> run_rationale_batch(std::span<const TokenSeq> prompts,
                                              const LanguageModel& backend,
                                              const DecodeConfig& config) {
  DecodeSession session(backend, config, {prompts.begin(), prompts.end()});
  session.run();
  std::vector<DecodeResult> out;
  for (std::size_t i = 0; i < session.size(); ++i) out.push_back(session.result(i));
  return out;
}

TokenSeq answer_phase(TokenSpan prompt, TokenSpan exact, TokenSpan approx_tail,
                      const LanguageModel& backend, const DecodeConfig& config,
                      CacheSlot cache) {
  const auto& spec = backend.spec();
  TokenSeq ctx = concat({prompt, exact, approx_tail, config.answer_trigger});
  require(!ctx.empty(), "answer_phase: empty context");

  std::unique_ptr<CacheBuffer> local;
  if (!cache && wants_cache(backend, config)) {
    local = std::make_unique<CacheBuffer>(1, ctx.size() + config.answer_max_tokens + 1, spec);
    cache = CacheSlot{local.get(), 0};
  }
  if (cache) {
    // Keep only the cached prefix that still matches this context.
    const std::size_t valid = cache.buffer->valid_len(cache.instance);
    std::size_t keep = 0;
    const std::size_t limit = std::min(valid, ctx.size() - 1);
    while (keep < limit && cache.buffer->cached_token(cache.instance, keep) == ctx[keep]) ++keep;
    cache.buffer->truncate(cache.instance, keep);
  }

  TokenPresence presence(spec.vocab_size, ctx);
  TokenSeq answer;
  while (answer.size() < config.answer_max_tokens) {
    StepOutput step = backend.forward(ctx, 1, cache);
    if (cache) {
      const std::size_t valid = cache.buffer->valid_len(cache.instance);
      cache.buffer->write_back(cache.instance, valid, ctx.size() - valid);
    }
    const Token t = greedy_pick(step.rows[0], presence, config.repetition_penalty);
    if (t == spec.eos_id) break;
    answer.push_back(t);
    ctx.push_back(t);
    presence.add(t);
  }
  return answer;
}

DecodeResult fastcot(TokenSpan prompt, const LanguageModel& backend,
                     const DecodeConfig& config) {
  DecodeSession session(backend, config, {TokenSeq(prompt.begin(), prompt.end())});
  session.run();
  DecodeResult r = session.result(0);
  r.answer = session.answer(0);
  return r;
}

DecodeResult ar_baseline(TokenSpan prompt, const LanguageModel& backend,
                         const DecodeConfig& config) {
  config.validate();
  require(!prompt.empty(), "ar_baseline: prompt must be nonempty");
  const auto& spec = backend.spec();
  std::unique_ptr<CacheBuffer> cache;
  if (wants_cache(backend, config)) {
    cache = std::make_unique<CacheBuffer>(1, required_cache_len(prompt.size(), config), spec);
  }
  const CacheSlot slot{cache.get(), 0};

  DecodeResult r;
  r.prompt.assign(prompt.begin(), prompt.end());
  TokenSeq ctx = r.prompt;
  TokenPresence presence(spec.vocab_size, ctx);
  PhaseTimer timer;
  timer.start_run();
  for (std::size_t n = 0;; ++n) {
    StepOutput step;
    {
      PhaseTimer::Scope scope(timer, Phase::kInfer);
      try {
        step = backend.forward(ctx, 1, slot);
      } catch (const Error&) {
        rethrow_with_context("token " + std::to_string(n + 1));
      }
      if (cache) {
        const std::size_t valid = cache->valid_len(0);
        cache->write_back(0, valid, ctx.size() - valid);
      }
    }
    Token t;
    {
      PhaseTimer::Scope scope(timer, Phase::kDecode);
      t = greedy_pick(step.rows[0], presence, config.repetition_penalty);
    }
    IterationRecord record;
    record.iteration = n + 1;
    record.frontier = ctx.size();
    record.predictions = {t};
    record.committed = {t};
    r.trace.iterations.push_back(std::move(record));

    std::optional<StopDecision> stop;
    {
      PhaseTimer::Scope scope(timer, Phase::kStopCheck);
      StopState state;
      if (t == spec.eos_id) state.eos_position = r.exact_rationale.size();
      state.iteration = n + 1;
      state.exact_tokens = r.exact_rationale.size() + (t == spec.eos_id ? 0 : 1);
      DecodeConfig plain = config;
      plain.iteration_cap.reset();
      plain.probe_threshold.reset();
      stop = check_stop(state, plain);
    }
    if (t != spec.eos_id) {
      r.exact_rationale.push_back(t);
      ctx.push_back(t);
      presence.add(t);
    }
    if (stop) {
      r.stop = *stop;
      r.eos_reached = t == spec.eos_id;
      break;
    }
  }
  timer.stop_run();
  r.trace.time = timer.breakdown();
  return r;
}

void attach_answer(DecodeResult& result, const LanguageModel& backend,
                   const DecodeConfig& config) {
  result.answer = answer_phase(result.prompt, result.exact_rationale,
                               result.approximate_tail, backend, config);
}

DecodeResult truncated_cot(TokenSpan prompt, const LanguageModel& backend,
                           const DecodeConfig& config, std::size_t iteration_budget) {
  DecodeResult r;
  if (iteration_budget == 0) {
    config.validate();
    r.prompt.assign(prompt.begin(), prompt.end());
    r.stop = StopDecision{StopReason::kMaxTokens, 0.0};
  } else {
    DecodeConfig capped = config;
    capped.max_new_tokens = iteration_budget;
    r = ar_baseline(prompt, backend, capped);
  }
  r.approximate_tail.clear();
  attach_answer(r, backend, config);
  return r;
}

std::size_t calibrate_iteration_cap(std::span<const LabeledPrompt> samples,
                                    const LanguageModel& backend,
                                    const DecodeConfig& config, double loss_threshold) {
  if (samples.empty()) throw ConfigError("calibrate_iteration_cap: empty sample");
  if (!(loss_threshold >= 0.0 && loss_threshold <= 1.0)) {
    throw ConfigError("calibrate_iteration_cap: loss_threshold must lie in [0, 1]");
  }
  DecodeConfig base = config;
  base.iteration_cap.reset();
  base.probe_threshold.reset();
  const Token eos = backend.spec().eos_id;

  // A run capped at t iterations is the uncapped run's state after iteration
  // t, so every cap is answered from one trace per sample.
  std::vector<DecodeResult> full;
  std::size_t longest = 1;
  std::size_t full_correct = 0;
  for (const auto& s : samples) {
    DecodeResult r = fastcot(s.prompt, backend, base);
    full_correct += r.answer == s.reference_answer;
    longest = std::max(longest, r.iterations());
    full.push_back(std::move(r));
  }
  const double n = static_cast<double>(samples.size());
  const double target = static_cast<double>(full_correct) / n - loss_threshold;

  for (std::size_t cap = 1; cap < longest; ++cap) {
    std::size_t correct = 0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const DecodeResult& r = full[k];
      if (cap >= r.iterations()) {
        correct += r.answer == samples[k].reference_answer;
        continue;
      }
      TokenSeq exact;
      for (std::size_t t = 0; t < cap; ++t) {
        const auto& rec = r.trace.iterations[t];
        exact.insert(exact.end(), rec.committed.begin(), rec.committed.end());
      }
      exact = strip_eos(exact, eos);
      const TokenSeq answer = answer_phase(r.prompt, exact,
                                           r.trace.iterations[cap - 1].window_after,
                                           backend, base);
      correct += answer == samples[k].reference_answer;
    }
    if (static_cast<double>(correct) / n >= target - 1e-12) return cap;
  }
  return longest;
}

}  // namespace glimpse
