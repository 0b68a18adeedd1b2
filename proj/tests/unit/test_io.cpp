// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include <doctest.h>

#include "glimpse/io.hpp"

using namespace glimpse;

TEST_CASE("decode config JSON round trip") {
  DecodeConfig cfg;
  cfg.window_len = 7;
  cfg.skip = false;
  cfg.iteration_cap = 9;
  cfg.probe_threshold = 0.3;
  cfg.answer_trigger = {4, 5, 6};
  cfg.window_fill = WindowFill::kPad;
  const auto back = decode_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));

  const auto partial = decode_config_from_json(json{{"window_len", 3}});
  CHECK(partial.window_len == 3);
  CHECK(partial.max_new_tokens == DecodeConfig{}.max_new_tokens);

  CHECK_THROWS_AS(decode_config_from_json(json{{"windw_len", 3}}), ConfigError);
  CHECK_THROWS_AS(decode_config_from_json(json{{"window_len", "three"}}), ConfigError);
  CHECK_THROWS_AS(decode_config_from_json(json{{"window_fill", "zeros"}}), ConfigError);
  CHECK_THROWS_AS(decode_config_from_json(json{{"max_new_tokens", 0}}), ConfigError);
}

TEST_CASE("backend registry") {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "glimpse_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "t.txt") << "@vocab 8\n@pad 6\n@eos 7\n1 -> 2\n";
  }
  CHECK(make_backend(json{{"kind", "toy"}, {"seed", 42}}, dir)->name() == "toy");
  CHECK(make_backend(json{{"kind", "counting"}, {"modulus", 5}}, dir)->spec().vocab_size == 7);
  CHECK(make_backend(json{{"kind", "ngram"}, {"order", 1}, {"table", "t.txt"}}, dir)
            ->spec()
            .vocab_size == 8);
  CHECK(make_backend(json{{"kind", "scripted"}, {"rule", "key_scan"}}, dir)->spec().supports_attention);
  CHECK_THROWS_AS(make_backend(json{{"kind", "gpt"}}, dir), ConfigError);
  CHECK_THROWS_AS(make_backend(json{{"kind", "toy"}, {"sead", 1}}, dir), ConfigError);
  CHECK_THROWS_AS(make_backend(json{{"kind", "scripted"}, {"rule", "marker_successor"}}, dir),
                  ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config digest is stable and key-order independent") {
  const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const json b = json::parse(R"({"a": [1, 2], "b": 1})");
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);
  CHECK(config_digest(a) != config_digest(json{{"b", 2}}));
  // FNV-1a 64 of "{}"
  CHECK(config_digest(json::object()) == "08f44b07b5901a25");
}

TEST_CASE("trace JSONL has one line per iteration") {
  auto m = make_counting_backend(10);
  DecodeConfig cfg;
  cfg.window_len = 3;
  cfg.max_new_tokens = 12;
  const auto r = run_rationale(TokenSeq{0}, *m, cfg);
  const std::string text = trace_jsonl(r);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == r.iterations());
  const auto first = json::parse(text.substr(0, text.find('\n')));
  CHECK(first.at("frontier") == 1);
  CHECK(first.at("committed") == json::array({1}));
  CHECK(result_json(r).at("stop").at("reason") == "max_tokens");
}

TEST_CASE("cache debug dump") {
  auto m = make_toy_transformer({});
  CacheBuffer cache(2, 16, m->spec());
  m->forward(encode_bytes("abc"), 3, CacheSlot{&cache, 1});
  cache.write_back(1, 0, 3);
  const auto j = cache_debug_json(cache);
  CHECK(j.at("valid_len") == json::array({0, 3}));
  CHECK(j.at("padding").at("mask") == json::parse("[[0,0,0],[1,1,1]]"));
}
