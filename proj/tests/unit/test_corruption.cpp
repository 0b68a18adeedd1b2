// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <doctest.h>

#include "glimpse/corruption.hpp"

using namespace glimpse;

namespace {

std::size_t pads(const TokenSeq& s, Token pad) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), pad));
}

DecodeConfig answer_cfg(const Script& script, std::size_t keys) {
  DecodeConfig cfg;
  cfg.answer_trigger = script.trigger;
  cfg.answer_max_tokens = keys + 1;
  return cfg;
}

}  // namespace

TEST_CASE("corrupt keeps round(r * len) positions") {
  const TokenSeq r{11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  CHECK(corrupt(r, 1.0, 5, 0) == r);
  CHECK(corrupt(r, 0.0, 5, 0) == TokenSeq(10, 0));
  const auto half = corrupt(r, 0.5, 5, 0);
  CHECK(half.size() == 10);
  CHECK(pads(half, 0) == 5);
  CHECK(half == corrupt(r, 0.5, 5, 0));
  CHECK(pads(corrupt(r, 0.44, 5, 0), 0) == 6);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK((half[i] == 0 || half[i] == r[i]));

  bool differs = false;
  for (std::uint64_t s = 6; s < 20; ++s) differs |= corrupt(r, 0.5, s, 0) != half;
  CHECK(differs);
  CHECK_THROWS_AS(corrupt(r, 1.5, 1, 0), ContractViolation);
}

TEST_CASE("corruption spec validation") {
  CorruptionSpec spec{{0.0, 0.5, 1.0}, CorruptionSpec::default_seeds(), 0};
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.seeds.size() == 40);
  spec.ratios = {0.5, 0.2};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.ratios = {0.2, 1.2};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.ratios = {0.2};
  spec.seeds = {1, 1};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("make_scripted_tasks") {
  Script script;
  const auto cases = make_scripted_tasks(script, 5, 1);
  CHECK(cases.size() == 5);
  auto backend = make_scripted_backend(script);
  for (const auto& c : cases) {
    CHECK(c.reference_answer.size() == 1);
    CHECK(script.is_key(c.reference_answer[0]));
    CHECK(c.rationale.size() == 20);
    CHECK(answer_phase(c.prompt, c.rationale, {}, *backend, answer_cfg(script, 1)) ==
          c.reference_answer);
  }
  CHECK_THROWS_AS(make_scripted_tasks(script, 0, 1), ConfigError);
  Script marker = script;
  marker.rule = Script::Rule::kMarkerSuccessor;
  marker.marker = 20;
  CHECK_THROWS_AS(make_scripted_tasks(marker, 3, 1), ConfigError);

  const auto again = make_scripted_tasks(script, 5, 1);
  for (std::size_t i = 0; i < cases.size(); ++i) CHECK(again[i].prompt == cases[i].prompt);
}

TEST_CASE("overlap experiment endpoints and partial accuracy") {
  Script script;
  auto backend = make_scripted_backend(script);
  const auto cases = make_scripted_tasks(script, 10, 3);
  CorruptionSpec spec{{0.0, 0.4, 1.0}, CorruptionSpec::default_seeds(10), script.pad};
  const auto pts = run_overlap_experiment(cases, spec, *backend, answer_cfg(script, 1));
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].mean == 0.0);
  CHECK(pts[2].mean == 1.0);
  CHECK(pts[2].stddev == 0.0);
  CHECK(pts[1].mean > 0.0);
  CHECK(pts[1].mean < 1.0);
  CHECK(pts[1].trials == 100);
}

TEST_CASE("all-key tasks collapse unless nearly everything survives") {
  Script script;
  auto backend = make_scripted_backend(script);
  TaskOptions all;
  all.rationale_len = 12;
  all.num_keys = 12;
  const auto cases = make_scripted_tasks(script, 8, 4, all);
  CorruptionSpec spec{{0.5, 0.9, 1.0}, CorruptionSpec::default_seeds(10), script.pad};
  const auto pts = run_overlap_experiment(cases, spec, *backend, answer_cfg(script, 12));
  CHECK(pts[0].mean == 0.0);
  CHECK(pts[1].mean == 0.0);
  CHECK(pts[2].mean == 1.0);
}
