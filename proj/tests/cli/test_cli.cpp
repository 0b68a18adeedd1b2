// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "cli.hpp"
#include "glimpse/backends.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = GLIMPSE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p =
      fs::temp_directory_path() / ("glimpse_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

struct Ran {
  int code = 0;
  std::string out, err;
};

Ran cli(std::vector<std::string> args) {
  args.insert(args.begin(), "glimpse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Ran r;
  r.code = glimpse::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::vector<std::string> header;
  std::vector<Row> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    REQUIRE(cells.size() == header.size());
    Row row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

fs::path write_config(const std::string& name, const json& cfg) {
  const fs::path p = scratch(name);
  std::ofstream(p) << cfg.dump();
  return p;
}

std::size_t num(const Row& r, const char* key) { return std::stoul(r.at(key)); }

}  // namespace

TEST_CASE("configuration errors exit with code 2") {
  CHECK(cli({"decode", "--config", "/nonexistent/glimpse.json"}).code == 2);
  CHECK(cli({"decode", "--window", "x"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);

  const auto bad_json = scratch("bad.json");
  std::ofstream(bad_json) << "{ not json";
  CHECK(cli({"decode", "--config", bad_json.string()}).code == 2);

  const auto out = scratch("errors").string();
  CHECK(cli({"decode", "--config", write_config("unknown.json", {{"colour", 1}}).string()})
            .code == 2);
  CHECK(cli({"decode", "--backend", "counting", "--out", out}).code == 2);  // no prompts
  CHECK(cli({"decode", "--prompt", "1 2", "--out", out}).code == 2);       // no backend
  CHECK(cli({"decode", "--backend", "counting", "--prompt", "1 x", "--out", out}).code == 2);
  CHECK(cli({"decode", "--backend", "counting", "--prompt", "99", "--out", out}).code == 2);
  CHECK(cli({"decode", "--backend", "ngram", "--prompt", "1", "--out", out}).code == 2);
  CHECK(cli({"decode", "--backend", "counting", "--prompt", "1", "--method", "truncated",
             "--out", out})
            .code == 2);
  const auto bad_method = write_config(
      "methods.json", {{"backend", {{"kind", "counting"}}}, {"prompts", {{1}}},
                       {"methods", {"ar", "beam"}}});
  const auto r = cli({"bench", "--config", bad_method.string(), "--out", out});
  CHECK(r.code == 2);
  CHECK(r.err.find("beam") != std::string::npos);
  const auto dup = write_config("dup.json", {{"backend", {{"kind", "counting"}}},
                                             {"prompts", {{1}}},
                                             {"windows", {1, 2, 1}}});
  CHECK(cli({"sweep", "--config", dup.string(), "--out", out}).code == 2);
  CHECK(cli({"corrupt", "--backend", "counting", "--out", out}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("runtime failures exit with code 1") {
  // the toy backend's position table is smaller than the requested budget
  const auto cfg = write_config(
      "small.json", {{"backend", {{"kind", "toy"}, {"max_positions", 16}}},
                     {"prompts", {{65, 66}}},
                     {"decode", {{"max_new_tokens", 8}, {"answer_max_tokens", 64}}}});
  const auto r = cli({"decode", "--config", cfg.string(), "--out", scratch("rt").string()});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());
}

TEST_CASE("c=0 decode and the AR baseline write identical exact-token files") {
  for (const char* config : {"toy.json", "ngram.json", "counting.json"}) {
    CAPTURE(config);
    const auto a = scratch(std::string("c0_") + config), b = scratch(std::string("ar_") + config);
    const std::string path = (kConfigs / config).string();
    REQUIRE(cli({"decode", "--config", path, "--window", "0", "--max-new-tokens", "40",
                 "--out", a.string()})
                .code == 0);
    REQUIRE(cli({"decode", "--config", path, "--method", "ar", "--max-new-tokens", "40",
                 "--out", b.string()})
                .code == 0);
    CHECK(slurp(a / "exact_tokens.txt") == slurp(b / "exact_tokens.txt"));
    CHECK(slurp(a / "trace.jsonl") != slurp(b / "trace.jsonl"));  // manifests differ
  }
}

TEST_CASE("decode outputs are deterministic and carry the manifest") {
  const std::string path = (kConfigs / "ngram.json").string();
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(cli({"decode", "--config", path, "--window", "3", "--out", dir.string()}).code == 0);
  }
  CHECK(slurp(a / "exact_tokens.txt") == slurp(b / "exact_tokens.txt"));
  auto strip = [](const fs::path& p) {
    auto lines = read_jsonl(p);
    for (auto& l : lines) {
      if (l.contains("manifest")) l["manifest"].erase("outputs");
      l.erase("time");
    }
    return lines;
  };
  // only the output paths and timings may differ between the two runs
  CHECK(strip(a / "results.jsonl") == strip(b / "results.jsonl"));
  CHECK(strip(a / "trace.jsonl") == strip(b / "trace.jsonl"));

  const auto results = read_jsonl(a / "results.jsonl");
  REQUIRE(results.size() == 4);
  const auto& m = results[0].at("manifest");
  CHECK(m.at("command") == "decode");
  CHECK(m.at("config_digest").get<std::string>().size() == 16);
  CHECK(m.at("config").at("decode").at("window_len") == 3);
  CHECK(m.at("backend").at("name") == "ngram");
  CHECK(!m.at("version").get<std::string>().empty());
  CHECK(read_jsonl(a / "trace.jsonl")[0].contains("manifest"));

  // the manifest's config replays the run
  const auto replay_cfg = write_config("replay.json", m.at("config"));
  fs::copy_file(kConfigs / "ngram_table.txt", replay_cfg.parent_path() / "ngram_table.txt",
                fs::copy_options::overwrite_existing);
  const auto c = scratch("det_c");
  REQUIRE(cli({"decode", "--config", replay_cfg.string(), "--out", c.string()}).code == 0);
  CHECK(slurp(c / "exact_tokens.txt") == slurp(a / "exact_tokens.txt"));
  CHECK(read_jsonl(c / "results.jsonl")[0]["manifest"]["config_digest"] ==
        m.at("config_digest"));
}

TEST_CASE("bench report shape and skip invariant") {
  const auto dir = scratch("bench");
  REQUIRE(cli({"bench", "--config", (kConfigs / "ngram.json").string(), "--out", dir.string()})
              .code == 0);
  const auto rows = read_csv(dir / "bench.csv");
  CHECK(rows.size() == 4 * 3);
  std::set<std::pair<std::string, std::string>> keys;
  std::map<std::string, std::map<std::string, std::size_t>> iters;
  for (const auto& r : rows) {
    keys.insert({r.at("method"), r.at("prompt")});
    iters[r.at("prompt")][r.at("method")] = num(r, "iterations");
    CHECK(std::stod(r.at("wall_s")) >= 0.0);
  }
  CHECK(keys.size() == rows.size());
  for (const auto& [prompt, m] : iters) {
    CHECK(m.at("fastcot_skip") <= m.at("fastcot_noskip"));
    CHECK(m.at("truncated_cot") <= m.at("fastcot_skip"));
  }
  const auto report = json::parse(slurp(dir / "bench.json"));
  CHECK(report.at("summary").size() == 4);
  CHECK(report.at("manifest").at("command") == "bench");
}

TEST_CASE("bench on the counting backend speeds up FastCoT with skip") {
  const auto dir = scratch("bench_counting");
  REQUIRE(cli({"bench", "--config", (kConfigs / "counting.json").string(), "--out",
               dir.string()})
              .code == 0);
  const auto report = json::parse(slurp(dir / "bench.json"));
  const double speedup = report["summary"]["fastcot_skip"]["speedup"].get<double>();
  MESSAGE("counting c=7 FastCoT(skip) speedup " << speedup);
  CHECK(speedup > 1.0);
}

TEST_CASE("sweep rows, AR reproduction and hits against brute-force traces") {
  const auto dir = scratch("sweep");
  const std::vector<std::size_t> windows{0, 1, 2, 3, 5, 7};
  REQUIRE(cli({"sweep", "--config", (kConfigs / "counting.json").string(), "--prompt", "0",
               "--max-new-tokens", "64", "--windows", "0,1,2,3,5,7", "--out", dir.string()})
              .code == 0);
  const auto summary = read_csv(dir / "sweep_summary.csv");
  REQUIRE(summary.size() == windows.size() + 1);
  CHECK(summary[0].at("method") == "ar");
  CHECK(summary[1].at("window") == "0");
  CHECK(summary[1].at("iterations") == summary[0].at("iterations"));
  CHECK(summary[1].at("tokens") == summary[0].at("tokens"));

  auto counting = glimpse::make_counting_backend(10);
  const auto rows = read_csv(dir / "sweep.csv");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::map<std::size_t, std::map<std::size_t, Row>> by;
  for (const auto& r : rows) {
    CHECK(seen.insert({num(r, "window"), num(r, "iteration")}).second);
    by[num(r, "window")][num(r, "iteration")] = r;
  }
  for (std::size_t c : windows) {
    const auto ref = oracle::jacobi(*counting, {0}, c, true, 64);
    REQUIRE(by[c].size() == ref.commits.size());
    for (std::size_t i = 0; i < ref.commits.size(); ++i) {
      const auto& r = by[c][i + 1];
      CHECK(num(r, "committed") == ref.commits[i]);
      // a scored window hits exactly on the committed guesses
      if (num(r, "windows") == 1) CHECK(num(r, "total_hit") == ref.commits[i] - 1);
    }
  }
  // hits per iteration never drop as the window grows, wherever both are scored
  for (std::size_t k = 1; k < windows.size(); ++k) {
    for (const auto& [it, small] : by[windows[k - 1]]) {
      const auto large = by[windows[k]].find(it);
      if (large == by[windows[k]].end()) continue;
      if (num(small, "windows") == 0 || num(large->second, "windows") == 0) continue;
      CHECK(num(large->second, "total_hit") >= num(small, "total_hit"));
    }
  }
}

TEST_CASE("corrupt writes the accuracy curve deterministically") {
  const auto a = scratch("corrupt_a"), b = scratch("corrupt_b");
  const std::string path = (kConfigs / "scripted.json").string();
  for (const auto& dir : {a, b}) {
    REQUIRE(cli({"corrupt", "--config", path, "--out", dir.string()}).code == 0);
  }
  CHECK(slurp(a / "corrupt.csv") == slurp(b / "corrupt.csv"));
  const auto rows = read_csv(a / "corrupt.csv");
  REQUIRE(rows.size() == 11);
  CHECK(std::stod(rows.front().at("mean")) == 0.0);
  CHECK(std::stod(rows.back().at("mean")) == 1.0);
  CHECK(num(rows.back(), "trials") == 50 * 40);

  const auto seeded = scratch("corrupt_seed");
  REQUIRE(cli({"corrupt", "--config", path, "--seed", "8", "--out", seeded.string()}).code == 0);
  const auto manifest = json::parse(slurp(seeded / "corrupt.json")).at("manifest");
  CHECK(manifest.at("config").at("seed") == 8);
}
