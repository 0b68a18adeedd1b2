// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/io.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace glimpse {
namespace {

template <typename T>
T get(const json& j, const char* key, const char* what) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": bad or missing '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const char* what) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, what);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(std::string(what) + ": unknown key '" + k + "'");
  }
}

std::string_view fill_name(WindowFill f) { return f == WindowFill::kPad ? "pad" : "lookup"; }

}  // namespace

json to_json(const BackendSpec& spec) {
  return {{"vocab_size", spec.vocab_size},       {"pad_id", spec.pad_id},
          {"eos_id", spec.eos_id},               {"supports_cache", spec.supports_cache},
          {"supports_attention", spec.supports_attention},
          {"num_layers", spec.num_layers},       {"num_heads", spec.num_heads},
          {"model_dim", spec.model_dim},         {"max_positions", spec.max_positions}};
}

json to_json(const DecodeConfig& c) {
  json j = {{"window_len", c.window_len},
            {"skip", c.skip},
            {"max_new_tokens", c.max_new_tokens},
            {"iteration_cap", nullptr},
            {"probe_threshold", nullptr},
            {"repetition_penalty", c.repetition_penalty},
            {"answer_trigger", c.answer_trigger},
            {"answer_max_tokens", c.answer_max_tokens},
            {"window_fill", fill_name(c.window_fill)},
            {"use_cache", c.use_cache},
            {"reuse_cache_for_answer", c.reuse_cache_for_answer}};
  if (c.iteration_cap) j["iteration_cap"] = *c.iteration_cap;
  if (c.probe_threshold) j["probe_threshold"] = *c.probe_threshold;
  return j;
}

json to_json(const StopDecision& stop) {
  return {{"reason", stop_reason_name(stop.reason)}, {"value", stop.value}};
}

json to_json(const IterationRecord& r) {
  json j = {{"iteration", r.iteration},     {"frontier", r.frontier},
            {"window", r.window},           {"predictions", r.predictions},
            {"committed", r.committed},     {"match_len", r.match_len},
            {"window_after", r.window_after}, {"probe_score", nullptr}};
  if (r.probe_score) j["probe_score"] = *r.probe_score;
  return j;
}

json to_json(const TimeBreakdown& t) {
  json j = json::object();
  for (std::size_t i = 0; i < kNumPhases; ++i) {
    j[std::string(phase_name(static_cast<Phase>(i)))] = t.seconds[i];
  }
  j["categorized"] = t.categorized();
  j["total"] = t.total;
  return j;
}

json to_json(const HitReport& r) {
  return {{"windows", r.windows},
          {"positions", r.positions},
          {"first_hit", r.first_hit},
          {"first_hit_ratio", r.first_hit_ratio()},
          {"total_hit", r.total_hit},
          {"total_hit_ratio", r.total_hit_ratio()},
          {"occur_pd_ad", r.occur_pd_ad},
          {"occur_pd_ad_ratio", r.occur_pd_ad_ratio()},
          {"occur_ad_pd", r.occur_ad_pd},
          {"occur_ad_pd_ratio", r.occur_ad_pd_ratio()}};
}

json to_json(const IterationSavings& s) {
  return {{"ar_iterations", s.ar_iterations},       {"fastcot_iterations", s.fastcot_iterations},
          {"ar_tokens", s.ar_tokens},               {"fastcot_tokens", s.fastcot_tokens},
          {"saved_iterations", s.saved_iterations}, {"wall_clock_ratio", s.wall_clock_ratio}};
}

json to_json(const AccuracyPoint& p) {
  return {{"ratio", p.ratio},     {"mean", p.mean},       {"stddev", p.stddev},
          {"n", p.n},             {"correct", p.correct}, {"trials", p.trials}};
}

json to_json(const PadPlan& plan) {
  json mask = json::array();
  for (std::size_t i = 0; i < plan.batch(); ++i) {
    json row = json::array();
    for (std::size_t p = 0; p < plan.target_len; ++p) row.push_back(plan.admits(i, p) ? 1 : 0);
    mask.push_back(std::move(row));
  }
  return {{"target_len", plan.target_len},
          {"lengths", plan.lengths},
          {"pad_counts", plan.pad_counts},
          {"mask", std::move(mask)}};
}

json to_json(const Script& s) {
  json j = {{"vocab_size", s.vocab_size},
            {"pad", s.pad},
            {"eos", s.eos},
            {"unk", s.unk},
            {"sep", s.sep},
            {"trigger", s.trigger},
            {"rule", s.rule == Script::Rule::kKeyScan ? "key_scan" : "marker_successor"},
            {"key_begin", s.key_begin},
            {"key_end", s.key_end},
            {"expose_attention", s.expose_attention}};
  if (s.marker) j["marker"] = *s.marker;
  return j;
}

json result_json(const DecodeResult& r) {
  return {{"prompt", r.prompt},
          {"exact_rationale", r.exact_rationale},
          {"approximate_tail", r.approximate_tail},
          {"answer", r.answer},
          {"stop", to_json(r.stop)},
          {"eos_reached", r.eos_reached},
          {"iterations", r.iterations()},
          {"time", to_json(r.trace.time)}};
}

DecodeConfig decode_config_from_json(const json& j, const DecodeConfig& defaults) {
  static const std::set<std::string> known{
      "window_len",        "skip",           "max_new_tokens", "iteration_cap",
      "probe_threshold",   "repetition_penalty", "answer_trigger", "answer_max_tokens",
      "window_fill",       "use_cache",      "reuse_cache_for_answer"};
  const char* what = "decode config";
  reject_unknown(j, known, what);
  DecodeConfig c = defaults;
  c.window_len = get_or(j, "window_len", c.window_len, what);
  c.skip = get_or(j, "skip", c.skip, what);
  c.max_new_tokens = get_or(j, "max_new_tokens", c.max_new_tokens, what);
  if (j.contains("iteration_cap")) {
    if (j["iteration_cap"].is_null()) c.iteration_cap.reset();
    else c.iteration_cap = get<std::size_t>(j, "iteration_cap", what);
  }
  if (j.contains("probe_threshold")) {
    if (j["probe_threshold"].is_null()) c.probe_threshold.reset();
    else c.probe_threshold = get<double>(j, "probe_threshold", what);
  }
  c.repetition_penalty = get_or(j, "repetition_penalty", c.repetition_penalty, what);
  c.answer_trigger = get_or(j, "answer_trigger", c.answer_trigger, what);
  c.answer_max_tokens = get_or(j, "answer_max_tokens", c.answer_max_tokens, what);
  if (j.contains("window_fill")) {
    const auto f = get<std::string>(j, "window_fill", what);
    if (f == "pad") c.window_fill = WindowFill::kPad;
    else if (f == "lookup") c.window_fill = WindowFill::kLookup;
    else throw ConfigError("decode config: window_fill must be 'pad' or 'lookup'");
  }
  c.use_cache = get_or(j, "use_cache", c.use_cache, what);
  c.reuse_cache_for_answer = get_or(j, "reuse_cache_for_answer", c.reuse_cache_for_answer, what);
  c.validate();
  return c;
}

Script script_from_json(const json& j) {
  static const std::set<std::string> known{"kind",  "vocab_size", "pad",       "eos",
                                           "unk",   "sep",        "trigger",   "rule",
                                           "marker", "key_begin", "key_end",   "expose_attention"};
  const char* what = "script";
  reject_unknown(j, known, what);
  Script s;
  s.vocab_size = get_or(j, "vocab_size", s.vocab_size, what);
  s.pad = get_or(j, "pad", s.pad, what);
  s.eos = get_or(j, "eos", s.eos, what);
  s.unk = get_or(j, "unk", s.unk, what);
  s.sep = get_or(j, "sep", s.sep, what);
  s.trigger = get_or(j, "trigger", s.trigger, what);
  if (j.contains("rule")) {
    const auto r = get<std::string>(j, "rule", what);
    if (r == "key_scan") s.rule = Script::Rule::kKeyScan;
    else if (r == "marker_successor") s.rule = Script::Rule::kMarkerSuccessor;
    else throw ConfigError("script: rule must be 'key_scan' or 'marker_successor'");
  }
  if (j.contains("marker")) s.marker = get<Token>(j, "marker", what);
  s.key_begin = get_or(j, "key_begin", s.key_begin, what);
  s.key_end = get_or(j, "key_end", s.key_end, what);
  s.expose_attention = get_or(j, "expose_attention", s.expose_attention, what);
  s.validate();
  return s;
}

std::string trace_jsonl(const DecodeResult& result) {
  std::string out;
  for (const auto& rec : result.trace.iterations) {
    out += to_json(rec).dump();
    out += '\n';
  }
  return out;
}

json cache_debug_json(const CacheBuffer& cache) {
  std::vector<std::size_t> valid(cache.valid_lens().begin(), cache.valid_lens().end());
  json j = {{"max_len", cache.max_len()}, {"valid_len", valid}};
  std::vector<std::size_t> computed;
  for (std::size_t i = 0; i < cache.batch(); ++i) computed.push_back(cache.computed_len(i));
  j["computed_len"] = computed;
  j["padding"] = to_json(plan_kv_padding(valid));
  return j;
}

std::shared_ptr<const LanguageModel> make_backend(const json& config,
                                                  const std::filesystem::path& base_dir) {
  if (!config.is_object()) throw ConfigError("backend: expected a JSON object");
  const auto kind = get<std::string>(config, "kind", "backend");
  if (kind == "toy") {
    reject_unknown(config,
                   {"kind", "seed", "vocab_size", "num_layers", "num_heads", "model_dim",
                    "max_positions", "pad_id", "eos_id"},
                   "toy backend");
    ToyConfig t;
    const char* what = "toy backend";
    t.seed = get_or(config, "seed", t.seed, what);
    t.vocab_size = get_or(config, "vocab_size", t.vocab_size, what);
    t.num_layers = get_or(config, "num_layers", t.num_layers, what);
    t.num_heads = get_or(config, "num_heads", t.num_heads, what);
    t.model_dim = get_or(config, "model_dim", t.model_dim, what);
    t.max_positions = get_or(config, "max_positions", t.max_positions, what);
    t.pad_id = get_or(config, "pad_id", t.pad_id, what);
    t.eos_id = get_or(config, "eos_id", t.eos_id, what);
    return make_toy_transformer(t);
  }
  if (kind == "ngram") {
    reject_unknown(config, {"kind", "order", "table"}, "ngram backend");
    const auto order = get_or<std::size_t>(config, "order", 2, "ngram backend");
    std::filesystem::path table = get<std::string>(config, "table", "ngram backend");
    if (table.is_relative()) table = base_dir / table;
    return make_ngram_backend(order, table);
  }
  if (kind == "scripted") return make_scripted_backend(script_from_json(config));
  if (kind == "counting") {
    reject_unknown(config, {"kind", "modulus", "rule"}, "counting backend");
    const auto modulus = get_or<std::size_t>(config, "modulus", 10, "counting backend");
    const auto rule = get_or<std::string>(config, "rule", "anchored", "counting backend");
    if (rule != "anchored" && rule != "last_token") {
      throw ConfigError("counting backend: rule must be 'anchored' or 'last_token'");
    }
    return make_counting_backend(
        modulus, rule == "anchored" ? CountingRule::kAnchored : CountingRule::kLastToken);
  }
  throw ConfigError("backend: unknown kind '" + kind + "'");
}

std::string config_digest(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace glimpse
