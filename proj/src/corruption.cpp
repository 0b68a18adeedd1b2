// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>
#include <set>

namespace glimpse {
namespace {

// Unbiased draw in [0, bound) from the raw engine output, so sequences do not
// depend on the standard library's distribution implementation.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void CorruptionSpec::validate() const {
  if (ratios.empty()) throw ConfigError("corruption: no keep ratios");
  if (seeds.empty()) throw ConfigError("corruption: no seeds");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("corruption: keep ratio outside [0, 1]");
  }
  if (!std::is_sorted(ratios.begin(), ratios.end())) {
    throw ConfigError("corruption: keep ratios must be sorted ascending");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("corruption: seeds must be distinct");
  }
}

std::vector<std::uint64_t> CorruptionSpec::default_seeds(std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  return seeds;
}

TokenSeq corrupt(TokenSpan rationale, double keep_ratio, std::uint64_t seed, Token pad) {
  require(keep_ratio >= 0.0 && keep_ratio <= 1.0, "corrupt: keep_ratio outside [0, 1]");
  const std::size_t len = rationale.size();
  const auto keep = static_cast<std::size_t>(std::llround(keep_ratio * static_cast<double>(len)));
  std::vector<std::size_t> order(len);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + draw_below(rng, len - i);
    std::swap(order[i], order[j]);
  }
  TokenSeq out(len, pad);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = rationale[order[i]];
  return out;
}

std::vector<TaskCase> make_scripted_tasks(const Script& script, std::size_t n,
                                          std::uint64_t seed, const TaskOptions& options) {
  script.validate();
  if (n == 0) throw ConfigError("make_scripted_tasks: n must be at least 1");
  if (script.rule != Script::Rule::kKeyScan) {
    throw ConfigError("make_scripted_tasks: script must use the key-scan rule");
  }
  const std::size_t len = options.rationale_len;
  if (len == 0 || options.num_keys == 0 || options.num_keys > len) {
    throw ConfigError("make_scripted_tasks: need 1 <= num_keys <= rationale_len");
  }

  std::vector<Token> fillers;
  for (Token t = 0; t < script.key_begin; ++t) {
    const bool special = t == script.pad || t == script.eos || t == script.unk ||
                         t == script.sep ||
                         std::find(script.trigger.begin(), script.trigger.end(), t) !=
                             script.trigger.end();
    if (!special) fillers.push_back(t);
  }
  if (fillers.empty() && options.num_keys < len) {
    throw ConfigError("make_scripted_tasks: script leaves no filler tokens");
  }

  auto backend = make_scripted_backend(script);
  DecodeConfig cfg;
  cfg.max_new_tokens = len + 1;
  cfg.answer_trigger = script.trigger;
  cfg.answer_max_tokens = options.num_keys + 1;

  std::mt19937_64 rng(seed);
  std::vector<TaskCase> cases;
  cases.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::size_t> slots(len);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    for (std::size_t i = 0; i < options.num_keys; ++i) {
      std::swap(slots[i], slots[i + draw_below(rng, len - i)]);
    }
    std::vector<bool> is_key(len, false);
    for (std::size_t i = 0; i < options.num_keys; ++i) is_key[slots[i]] = true;

    TaskCase tc;
    const std::uint64_t key_span = script.key_end - script.key_begin;
    for (std::size_t p = 0; p < len; ++p) {
      Token t;
      if (is_key[p]) {
        t = script.key_begin + static_cast<Token>(draw_below(rng, key_span));
        tc.reference_answer.push_back(t);
      } else {
        t = fillers[draw_below(rng, fillers.size())];
      }
      tc.prompt.push_back(t);
    }
    tc.prompt.push_back(script.sep);
    DecodeResult ar = ar_baseline(tc.prompt, *backend, cfg);
    tc.rationale = ar.exact_rationale;
    require(answer_phase(tc.prompt, tc.rationale, {}, *backend, cfg) == tc.reference_answer,
            "make_scripted_tasks: uncorrupted rationale does not recover the answer");
    cases.push_back(std::move(tc));
  }
  return cases;
}

std::vector<AccuracyPoint> run_overlap_experiment(std::span<const TaskCase> cases,
                                                  const CorruptionSpec& spec,
                                                  const LanguageModel& backend,
                                                  const DecodeConfig& config) {
  spec.validate();
  require(!cases.empty(), "run_overlap_experiment: no task cases");
  std::vector<AccuracyPoint> out;
  for (double r : spec.ratios) {
    AccuracyPoint pt;
    pt.ratio = r;
    pt.n = spec.seeds.size();
    std::vector<double> per_seed;
    for (std::uint64_t seed : spec.seeds) {
      std::size_t correct = 0;
      for (std::size_t k = 0; k < cases.size(); ++k) {
        const TaskCase& tc = cases[k];
        const TokenSeq damaged = corrupt(tc.rationale, r, mix(seed, k), spec.pad);
        correct += answer_phase(tc.prompt, damaged, {}, backend, config) == tc.reference_answer;
      }
      pt.correct += correct;
      pt.trials += cases.size();
      per_seed.push_back(static_cast<double>(correct) / static_cast<double>(cases.size()));
    }
    pt.mean = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) /
              static_cast<double>(per_seed.size());
    if (per_seed.size() > 1) {
      double ss = 0.0;
      for (double a : per_seed) ss += (a - pt.mean) * (a - pt.mean);
      pt.stddev = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace glimpse
