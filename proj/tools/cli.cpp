// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "glimpse/io.hpp"

#ifndef GLIMPSE_VERSION
#define GLIMPSE_VERSION "0.0.0-unknown"
#endif

namespace glimpse::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string command;
  std::string config_path;
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window;
  std::optional<bool> skip;
  std::optional<std::size_t> max_iters;
  std::optional<double> probe;
  std::optional<std::size_t> max_new;
  std::string out_dir = "glimpse-out";
  std::vector<std::string> prompts;
  std::string prompt_file;
  std::string method = "fastcot";
  std::optional<std::size_t> budget;
  std::vector<std::size_t> windows;
};

const std::set<std::string> kTopLevelKeys{"backend", "decode", "prompts", "seed",
                                          "methods", "truncated_budget", "repeats",
                                          "windows", "corrupt"};
const std::vector<std::string> kBenchMethods{"ar", "truncated_cot", "fastcot_noskip",
                                             "fastcot_skip"};

std::shared_ptr<spdlog::logger> logger() {
  if (auto l = spdlog::get("glimpse")) return l;
  auto l = spdlog::stderr_color_mt("glimpse");
  l->set_level(spdlog::level::warn);
  return l;
}

void configure_logging() {
  logger();
  if (const char* levels = std::getenv("GLIMPSE_LOG")) {
    // "debug" or "glimpse=info,*=warn"
    spdlog::cfg::helpers::load_levels(levels);
  }
}

TokenSeq parse_tokens(const std::string& text, const std::string& where) {
  TokenSeq out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size() || word[0] == '-') {
      throw ConfigError(where + ": '" + word + "' is not a token id");
    }
    out.push_back(static_cast<Token>(v));
  }
  return out;
}

json read_prompt_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompt file '" + path.string() + "'");
  json prompts = json::array();
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    prompts.push_back(parse_tokens(line, path.string() + ":" + std::to_string(n)));
  }
  return prompts;
}

json load_config(const Options& o, fs::path& base_dir) {
  base_dir = fs::current_path();
  if (o.config_path.empty()) return json::object();
  const fs::path path = o.config_path;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  base_dir = path.has_parent_path() ? path.parent_path() : fs::current_path();
  return cfg;
}

// Folds command-line flags into the config so the manifest alone replays the run.
void apply_overrides(json& cfg, const Options& o) {
  if (!o.backend.empty()) {
    const bool same = cfg.contains("backend") && cfg["backend"].is_object() &&
                      cfg["backend"].value("kind", "") == o.backend;
    if (!same) cfg["backend"] = {{"kind", o.backend}};
  }
  if (o.seed) {
    cfg["seed"] = *o.seed;
    if (cfg.contains("backend") && cfg["backend"].value("kind", "") == "toy") {
      cfg["backend"]["seed"] = *o.seed;
    }
  }
  auto set_decode = [&](const char* key, const json& v) {
    if (!cfg.contains("decode")) cfg["decode"] = json::object();
    cfg["decode"][key] = v;
  };
  if (o.window) set_decode("window_len", *o.window);
  if (o.skip) set_decode("skip", *o.skip);
  if (o.max_iters) set_decode("iteration_cap", *o.max_iters);
  if (o.probe) set_decode("probe_threshold", *o.probe);
  if (o.max_new) set_decode("max_new_tokens", *o.max_new);
  if (!o.prompt_file.empty() || !o.prompts.empty()) {
    json prompts = o.prompt_file.empty() ? json::array() : read_prompt_file(o.prompt_file);
    for (const auto& p : o.prompts) prompts.push_back(parse_tokens(p, "--prompt"));
    cfg["prompts"] = prompts;
  }
  if (o.budget) cfg["truncated_budget"] = *o.budget;
  if (!o.windows.empty()) cfg["windows"] = o.windows;
}

template <typename T>
T value_or(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

struct Run {
  std::string command;
  json cfg;
  fs::path base_dir;
  fs::path out_dir;
  std::shared_ptr<const LanguageModel> backend;
  DecodeConfig decode;
  std::vector<TokenSeq> prompts;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;

  json manifest() const {
    json seed = nullptr;
    if (cfg.contains("backend") && cfg["backend"].contains("seed")) seed = cfg["backend"]["seed"];
    else if (cfg.contains("seed")) seed = cfg["seed"];
    return {{"command", command},
            {"config_digest", config_digest(cfg)},
            {"config", cfg},
            {"backend", {{"name", backend->name()}, {"spec", to_json(backend->spec())},
                         {"seed", seed}}},
            {"version", GLIMPSE_VERSION},
            {"outputs", outputs}};
  }

  void write(const std::string& name, const std::string& content) const {
    const fs::path path = out_dir / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  }

  std::string csv_header() const { return "# manifest " + manifest().dump() + "\n"; }
  std::string jsonl_header() const { return json{{"manifest", manifest()}}.dump() + "\n"; }
};

std::vector<TokenSeq> resolve_prompts(const json& cfg, const LanguageModel& m) {
  if (!cfg.contains("prompts") || !cfg["prompts"].is_array() || cfg["prompts"].empty()) {
    throw ConfigError("no prompts: give --prompt, --prompt-file or a 'prompts' config list");
  }
  const bool toy = cfg["backend"].value("kind", "") == "toy";
  std::vector<TokenSeq> out;
  for (const auto& p : cfg["prompts"]) {
    TokenSeq seq;
    if (p.is_string()) {
      if (!toy) throw ConfigError("text prompts need the toy backend's byte tokenizer");
      seq = encode_bytes(p.get<std::string>());
    } else {
      try {
        seq = p.get<TokenSeq>();
      } catch (const json::exception&) {
        throw ConfigError("prompts: each prompt is a list of token ids or a string");
      }
    }
    if (seq.empty()) throw ConfigError("prompts: empty prompt");
    for (Token t : seq) {
      if (t >= m.spec().vocab_size) {
        throw ConfigError("prompts: token " + std::to_string(t) + " outside the vocabulary");
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Run prepare(const Options& o, std::ostream& out, bool needs_prompts) {
  Run run;
  run.command = o.command;
  run.out = &out;
  run.cfg = load_config(o, run.base_dir);
  apply_overrides(run.cfg, o);
  if (!run.cfg.contains("backend")) {
    throw ConfigError("no backend: give --backend or a 'backend' config object");
  }
  run.backend = make_backend(run.cfg["backend"], run.base_dir);
  run.decode = decode_config_from_json(
      run.cfg.contains("decode") ? run.cfg["decode"] : json::object());
  if (needs_prompts) run.prompts = resolve_prompts(run.cfg, *run.backend);
  run.out_dir = o.out_dir;
  fs::create_directories(run.out_dir);
  logger()->info("{}: backend {}, config digest {}", run.command, run.backend->name(),
                 config_digest(run.cfg));
  return run;
}

std::string join(const TokenSeq& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(9);
  o << v;
  return o.str();
}

double wall_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int cmd_decode(const Options& o, std::ostream& out) {
  Run run = prepare(o, out, true);
  if (o.method == "truncated" && !run.cfg.contains("truncated_budget")) {
    throw ConfigError("method 'truncated' needs --budget or 'truncated_budget'");
  }
  const auto budget = value_or<std::size_t>(run.cfg, "truncated_budget", 0);
  run.outputs = {"results.jsonl", "trace.jsonl", "exact_tokens.txt"};

  std::string results = run.jsonl_header(), trace = run.jsonl_header(), exact;
  for (std::size_t i = 0; i < run.prompts.size(); ++i) {
    const TokenSeq& prompt = run.prompts[i];
    DecodeResult r;
    if (o.method == "fastcot") {
      r = fastcot(prompt, *run.backend, run.decode);
    } else if (o.method == "ar") {
      r = ar_baseline(prompt, *run.backend, run.decode);
      attach_answer(r, *run.backend, run.decode);
    } else {
      r = truncated_cot(prompt, *run.backend, run.decode, budget);
    }
    json line = result_json(r);
    line["index"] = i;
    line["method"] = o.method;
    results += line.dump() + "\n";
    for (const auto& rec : r.trace.iterations) {
      json j = to_json(rec);
      j["prompt_index"] = i;
      trace += j.dump() + "\n";
    }
    exact += join(r.exact_rationale) + "\n";
    logger()->info("prompt {}: {} exact tokens in {} iterations, stop {}", i,
                   r.exact_rationale.size(), r.iterations(), stop_reason_name(r.stop.reason));
  }
  run.write("results.jsonl", results);
  run.write("trace.jsonl", trace);
  run.write("exact_tokens.txt", exact);
  out << "decode: " << run.prompts.size() << " prompt(s) -> " << run.out_dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct Timed {
  DecodeResult result;
  double wall = 0.0;
};

int cmd_bench(const Options& o, std::ostream& out) {
  Run run = prepare(o, out, true);
  const auto methods = value_or<std::vector<std::string>>(run.cfg, "methods", kBenchMethods);
  for (const auto& m : methods) {
    if (std::find(kBenchMethods.begin(), kBenchMethods.end(), m) == kBenchMethods.end()) {
      throw ConfigError("bench: unknown method '" + m + "'");
    }
  }
  const auto repeats = value_or<std::size_t>(run.cfg, "repeats", 1);
  if (repeats == 0) throw ConfigError("bench: repeats must be positive");
  const bool fixed = run.cfg.contains("truncated_budget");
  const auto fixed_budget = value_or<std::size_t>(run.cfg, "truncated_budget", 0);
  run.outputs = {"bench.csv", "bench.json"};

  auto timed = [&](auto&& fn) {
    Timed best;
    for (std::size_t k = 0; k < repeats; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      DecodeResult r = fn();
      const double wall = wall_seconds(t0);
      if (k == 0 || wall < best.wall) best = {std::move(r), wall};
    }
    return best;
  };

  DecodeConfig skip = run.decode, noskip = run.decode;
  skip.skip = true;
  noskip.skip = false;
  const auto& m = *run.backend;

  json rows = json::array();
  std::map<std::string, json> summary;
  std::ostringstream csv;
  csv << run.csv_header()
      << "method,prompt,window,iterations,tokens,answer,stop,eos,wall_s,total_s,infer_s,"
         "decode_s,context_decode_s,kv_cache_s,stop_check_s,speedup\n";
  for (std::size_t i = 0; i < run.prompts.size(); ++i) {
    const TokenSeq& p = run.prompts[i];
    std::map<std::string, Timed> res;
    res["ar"] = timed([&] {
      auto r = ar_baseline(p, m, run.decode);
      attach_answer(r, m, run.decode);
      return r;
    });
    res["fastcot_skip"] = timed([&] { return fastcot(p, m, skip); });
    res["fastcot_noskip"] = timed([&] { return fastcot(p, m, noskip); });
    // same iteration budget as FastCoT unless fixed in the config
    const std::size_t budget = fixed ? fixed_budget : res["fastcot_skip"].result.iterations();
    res["truncated_cot"] = timed([&] { return truncated_cot(p, m, run.decode, budget); });

    const double ar_wall = res["ar"].wall;
    for (const auto& name : methods) {
      const auto& t = res[name];
      const auto& r = t.result;
      const auto& tb = r.trace.time;
      const double speedup = t.wall > 0.0 ? ar_wall / t.wall : 0.0;
      const std::size_t window = name.starts_with("fastcot") ? run.decode.window_len : 0;
      csv << name << ',' << i << ',' << window << ',' << r.iterations() << ','
          << r.exact_rationale.size() << ',' << join(r.answer) << ','
          << stop_reason_name(r.stop.reason) << ',' << r.eos_reached << ',' << fmt(t.wall) << ','
          << fmt(tb.total) << ',' << fmt(tb.infer()) << ',' << fmt(tb.decode()) << ','
          << fmt(tb.context_decode()) << ',' << fmt(tb.kv_cache()) << ','
          << fmt(tb.stop_check()) << ',' << fmt(speedup) << '\n';
      rows.push_back({{"method", name},
                      {"prompt", i},
                      {"window", window},
                      {"iterations", r.iterations()},
                      {"tokens", r.exact_rationale.size()},
                      {"answer", r.answer},
                      {"stop", to_json(r.stop)},
                      {"wall_s", t.wall},
                      {"time", to_json(tb)},
                      {"speedup", speedup}});
      json& s = summary[name];
      if (s.is_null()) s = {{"iterations", 0}, {"tokens", 0}, {"wall_s", 0.0}, {"ar_wall_s", 0.0}};
      s["iterations"] = s["iterations"].get<std::size_t>() + r.iterations();
      s["tokens"] = s["tokens"].get<std::size_t>() + r.exact_rationale.size();
      s["wall_s"] = s["wall_s"].get<double>() + t.wall;
      s["ar_wall_s"] = s["ar_wall_s"].get<double>() + ar_wall;
    }
  }
  json sum = json::object();
  out << "method           iterations   wall_ms   speedup\n";
  for (const auto& name : methods) {
    json s = summary[name];
    const double wall = s["wall_s"].get<double>();
    s["speedup"] = wall > 0.0 ? s["ar_wall_s"].get<double>() / wall : 0.0;
    sum[name] = s;
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %10zu %9.3f %9.3f\n", name.c_str(),
                  s["iterations"].get<std::size_t>(), wall * 1e3, s["speedup"].get<double>());
    out << line;
  }
  run.write("bench.csv", csv.str());
  run.write("bench.json",
            json{{"manifest", run.manifest()}, {"rows", rows}, {"summary", sum}}.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct IterationRow {
  std::size_t instances = 0, committed = 0, match_len = 0, windows = 0, positions = 0;
  std::size_t first_hit = 0, total_hit = 0, occur_pd_ad = 0, occur_ad_pd = 0;
};

int cmd_sweep(const Options& o, std::ostream& out) {
  Run run = prepare(o, out, true);
  const auto windows =
      value_or<std::vector<std::size_t>>(run.cfg, "windows", {0, 1, 2, 4, 7});
  if (std::set<std::size_t>(windows.begin(), windows.end()).size() != windows.size()) {
    throw ConfigError("sweep: window sizes must be distinct");
  }
  run.outputs = {"sweep.csv", "sweep_summary.csv", "sweep.json"};
  const auto& m = *run.backend;

  std::vector<DecodeResult> ar;
  for (const auto& p : run.prompts) ar.push_back(ar_baseline(p, m, run.decode));

  std::ostringstream rows_csv, sum_csv;
  rows_csv << run.csv_header()
           << "window,iteration,instances,committed,match_len,windows,positions,first_hit,"
              "total_hit,occur_pd_ad,occur_ad_pd\n";
  sum_csv << run.csv_header()
          << "method,window,iterations,tokens,mean_commit,first_hit_ratio,total_hit_ratio,"
             "occur_pd_ad_ratio,occur_ad_pd_ratio,infer_s,infer_s_per_call,total_s\n";
  json summary = json::array();

  auto summary_row = [&](const std::string& method, std::size_t c,
                         std::span<const DecodeResult> results, const HitReport& hits) {
    std::size_t iterations = 0, tokens = 0;
    TimeBreakdown time;
    for (const auto& r : results) {
      iterations += r.iterations();
      tokens += r.exact_rationale.size();
      time += r.trace.time;
    }
    const double mean_commit = iterations ? double(tokens) / double(iterations) : 0.0;
    const double per_call = iterations ? time.infer() / double(iterations) : 0.0;
    sum_csv << method << ',' << c << ',' << iterations << ',' << tokens << ','
            << fmt(mean_commit) << ',' << fmt(hits.first_hit_ratio()) << ','
            << fmt(hits.total_hit_ratio()) << ',' << fmt(hits.occur_pd_ad_ratio()) << ','
            << fmt(hits.occur_ad_pd_ratio()) << ',' << fmt(time.infer()) << ','
            << fmt(per_call) << ',' << fmt(time.total) << '\n';
    summary.push_back({{"method", method},
                       {"window", c},
                       {"iterations", iterations},
                       {"tokens", tokens},
                       {"mean_commit", mean_commit},
                       {"hits", to_json(hits)},
                       {"time", to_json(time)},
                       {"infer_s_per_call", per_call}});
  };
  summary_row("ar", 0, ar, HitReport{});

  for (std::size_t c : windows) {
    DecodeConfig dc = run.decode;
    dc.window_len = c;
    std::vector<DecodeResult> results;
    std::map<std::size_t, IterationRow> per_iter;
    HitReport hits;
    for (std::size_t i = 0; i < run.prompts.size(); ++i) {
      results.push_back(run_rationale(run.prompts[i], m, dc));
      const auto& r = results.back();
      for (const auto& rec : r.trace.iterations) {
        auto& row = per_iter[rec.iteration];
        ++row.instances;
        row.committed += rec.committed.size();
        row.match_len += rec.match_len;
      }
      const TokenSeq ref = reference_stream(ar[i]);
      for (const auto& snap : window_snapshots(r, ref)) {
        const auto w = score_window(snap);
        auto& row = per_iter[snap.iteration];
        ++row.windows;
        row.positions += w.width;
        row.first_hit += w.first_hit;
        row.total_hit += w.total_hit;
        row.occur_pd_ad += w.occur_pd_ad;
        row.occur_ad_pd += w.occur_ad_pd;
      }
      hits += hit_report(r, ar[i]);
    }
    for (const auto& [it, row] : per_iter) {
      rows_csv << c << ',' << it << ',' << row.instances << ',' << row.committed << ','
               << row.match_len << ',' << row.windows << ',' << row.positions << ','
               << row.first_hit << ',' << row.total_hit << ',' << row.occur_pd_ad << ','
               << row.occur_ad_pd << '\n';
    }
    summary_row("fastcot", c, results, hits);
    logger()->info("window {}: {} iterations over {} prompts", c, per_iter.size(),
                   run.prompts.size());
  }
  run.write("sweep.csv", rows_csv.str());
  run.write("sweep_summary.csv", sum_csv.str());
  run.write("sweep.json", json{{"manifest", run.manifest()}, {"summary", summary}}.dump(2) + "\n");
  out << "sweep: " << windows.size() << " window size(s) -> " << run.out_dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_corrupt(const Options& o, std::ostream& out) {
  Run run = prepare(o, out, false);
  if (run.cfg["backend"].value("kind", "") != "scripted") {
    throw ConfigError("corrupt: needs the scripted backend");
  }
  const Script script = script_from_json(run.cfg["backend"]);
  const json spec_cfg = run.cfg.contains("corrupt") ? run.cfg["corrupt"] : json::object();
  for (const auto& [key, value] : spec_cfg.items()) {
    static const std::set<std::string> known{"tasks", "rationale_len", "num_keys", "ratios",
                                             "seeds"};
    if (!known.contains(key)) throw ConfigError("corrupt: unknown key '" + key + "'");
  }
  TaskOptions opts;
  opts.rationale_len = value_or(spec_cfg, "rationale_len", opts.rationale_len);
  opts.num_keys = value_or(spec_cfg, "num_keys", opts.num_keys);
  const auto tasks = value_or<std::size_t>(spec_cfg, "tasks", 50);
  CorruptionSpec spec;
  spec.pad = script.pad;
  spec.ratios = value_or<std::vector<double>>(
      spec_cfg, "ratios", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  if (spec_cfg.contains("seeds") && spec_cfg["seeds"].is_array()) {
    spec.seeds = value_or<std::vector<std::uint64_t>>(spec_cfg, "seeds", {});
  } else {
    spec.seeds = CorruptionSpec::default_seeds(value_or<std::size_t>(spec_cfg, "seeds", 40));
  }
  spec.validate();

  DecodeConfig dc = run.decode;
  if (dc.answer_trigger.empty()) dc.answer_trigger = script.trigger;
  const json decode_cfg = run.cfg.contains("decode") ? run.cfg["decode"] : json::object();
  if (!decode_cfg.contains("answer_max_tokens")) dc.answer_max_tokens = opts.num_keys + 1;

  const auto cases =
      make_scripted_tasks(script, tasks, value_or<std::uint64_t>(run.cfg, "seed", 1), opts);
  const auto points = run_overlap_experiment(cases, spec, *run.backend, dc);
  run.outputs = {"corrupt.csv", "corrupt.json"};

  std::ostringstream csv;
  csv << run.csv_header() << "ratio,kept,survival,mean,stddev,seeds,correct,trials\n";
  json pts = json::array();
  for (const auto& p : points) {
    const auto kept = std::llround(p.ratio * double(opts.rationale_len));
    csv << fmt(p.ratio) << ',' << kept << ',' << fmt(double(kept) / double(opts.rationale_len))
        << ',' << fmt(p.mean) << ',' << fmt(p.stddev) << ',' << p.n << ',' << p.correct << ','
        << p.trials << '\n';
    pts.push_back(to_json(p));
  }
  run.write("corrupt.csv", csv.str());
  run.write("corrupt.json", json{{"manifest", run.manifest()}, {"points", pts}}.dump(2) + "\n");
  out << "corrupt: " << points.size() << " ratio(s), " << cases.size() << " task(s) -> "
      << run.out_dir.string() << "\n";
  return kExitOk;
}

void add_common(CLI::App& sub, Options& o) {
  sub.add_option("--config", o.config_path, "JSON config file");
  sub.add_option("--backend", o.backend, "Backend kind, overrides the config")
      ->check(CLI::IsMember({"toy", "ngram", "scripted", "counting"}));
  sub.add_option("--seed", o.seed, "Seed for the toy backend and task generation");
  sub.add_option("--out", o.out_dir, "Output directory")->capture_default_str();
}

void add_decode_flags(CLI::App& sub, Options& o) {
  sub.add_option("--window", o.window, "Context window length c");
  sub.add_flag_function(
      "--skip,!--no-skip", [&o](std::int64_t n) { o.skip = n > 0; },
      "Commit every verified window token (default) or one per iteration");
  sub.add_option("--max-iters", o.max_iters, "Iteration cap");
  sub.add_option_function<std::vector<std::string>>(
         "--probe-threshold",
         [&o](const std::vector<std::string>& v) {
           if (v.empty() || v.front().empty()) {
             o.probe = kDefaultProbeThreshold;
             return;
           }
           double x = 0.0;
           if (!CLI::detail::lexical_cast(v.front(), x)) {
             throw CLI::ConversionError("--probe-threshold", v);
           }
           o.probe = x;
         },
         "Enable the answer probe (default threshold 0.3)")
      ->expected(0, 1)
      ->trigger_on_parse();
  sub.add_option("--max-new-tokens", o.max_new, "Rationale token budget");
  sub.add_option("--prompt", o.prompts, "Inline prompt of space-separated token ids");
  sub.add_option("--prompt-file", o.prompt_file, "One prompt per line");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  configure_logging();
  Options o;
  CLI::App app{"Parallel rationale decoding with an exact prefix and an approximate window"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GLIMPSE_VERSION);

  auto* decode = app.add_subcommand("decode", "Decode prompts and write results and traces");
  add_common(*decode, o);
  add_decode_flags(*decode, o);
  decode->add_option("--method", o.method, "fastcot, ar or truncated")
      ->check(CLI::IsMember({"fastcot", "ar", "truncated"}))
      ->capture_default_str();
  decode->add_option("--budget", o.budget, "Token budget for the truncated method");

  auto* bench = app.add_subcommand("bench", "Compare AR, truncated CoT and FastCoT");
  add_common(*bench, o);
  add_decode_flags(*bench, o);
  bench->add_option("--budget", o.budget, "Fixed truncated-CoT budget");

  auto* sweep = app.add_subcommand("sweep", "Per-iteration hit metrics across window sizes");
  add_common(*sweep, o);
  add_decode_flags(*sweep, o);
  sweep->add_option("--windows", o.windows, "Window sizes")->delimiter(',');

  auto* corrupt = app.add_subcommand("corrupt", "Accuracy under PAD-corrupted rationales");
  add_common(*corrupt, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (decode->parsed()) {
      o.command = "decode";
      return cmd_decode(o, out);
    }
    if (bench->parsed()) {
      o.command = "bench";
      return cmd_bench(o, out);
    }
    if (sweep->parsed()) {
      o.command = "sweep";
      return cmd_sweep(o, out);
    }
    o.command = "corrupt";
    return cmd_corrupt(o, out);
  } catch (const ConfigError& e) {
    err << "glimpse: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "glimpse: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "glimpse: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace glimpse::cli
