// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "glimpse/backends.hpp"
#include "glimpse/engine.hpp"

namespace glimpse {

struct CorruptionSpec {
  std::vector<double> ratios;  // fraction of rationale tokens kept
  std::vector<std::uint64_t> seeds;
  Token pad = 0;

  void validate() const;
  static std::vector<std::uint64_t> default_seeds(std::size_t count = 40);
};

struct TaskCase {
  TokenSeq prompt;
  TokenSeq reference_answer;
  TokenSeq rationale;
};

// Keeps round(keep_ratio * len) positions chosen uniformly without
// replacement; every other position becomes `pad`.
TokenSeq corrupt(TokenSpan rationale, double keep_ratio, std::uint64_t seed, Token pad);

struct TaskOptions {
  std::size_t rationale_len = 20;
  // Number of key tokens; rationale_len makes every token a key.
  std::size_t num_keys = 1;
};

// Key-retrieval tasks for a kKeyScan script: prompt = payload + sep, the
// rationale (autoregressively decoded) copies the payload, and the answer is
// the payload's key tokens in order.
std::vector<TaskCase> make_scripted_tasks(const Script& script, std::size_t n,
                                          std::uint64_t seed,
                                          const TaskOptions& options = {});

struct AccuracyPoint {
  double ratio = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // across seeds
  std::size_t n = 0;    // seeds
  std::size_t correct = 0;
  std::size_t trials = 0;
};

std::vector<AccuracyPoint> run_overlap_experiment(std::span<const TaskCase> cases,
                                                  const CorruptionSpec& spec,
                                                  const LanguageModel& backend,
                                                  const DecodeConfig& config);

}  // namespace glimpse
