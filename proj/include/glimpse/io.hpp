// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

// JSON/JSONL/CSV encodings of engine types and the backend registry used by
// the CLI and the Python module.

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "glimpse/backends.hpp"
#include "glimpse/corruption.hpp"
#include "glimpse/engine.hpp"
#include "glimpse/metrics.hpp"

namespace glimpse {

using nlohmann::json;

json to_json(const BackendSpec& spec);
json to_json(const DecodeConfig& config);
json to_json(const StopDecision& stop);
json to_json(const IterationRecord& record);
json to_json(const TimeBreakdown& time);
json to_json(const HitReport& report);
json to_json(const IterationSavings& savings);
json to_json(const AccuracyPoint& point);
json to_json(const PadPlan& plan);
json to_json(const Script& script);

// Result summary without the per-iteration trace.
json result_json(const DecodeResult& result);

// Unknown keys are rejected with ConfigError; missing keys keep `defaults`.
DecodeConfig decode_config_from_json(const json& j, const DecodeConfig& defaults = {});
Script script_from_json(const json& j);

// One line per iteration: iteration, frontier, window, predictions,
// committed, match_len, window_after, probe_score.
std::string trace_jsonl(const DecodeResult& result);

// valid_len vector plus the type-one mask, one JSON object.
json cache_debug_json(const CacheBuffer& cache);

// {"kind": "toy"|"ngram"|"scripted"|"counting", ...}. Relative paths resolve
// against base_dir.
std::shared_ptr<const LanguageModel> make_backend(const json& config,
                                                  const std::filesystem::path& base_dir);

// Stable FNV-1a 64 digest of the canonical JSON dump, as 16 hex digits.
std::string config_digest(const json& config);

}  // namespace glimpse
