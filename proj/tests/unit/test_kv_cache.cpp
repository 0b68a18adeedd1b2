// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <doctest.h>

#include "glimpse/backends.hpp"
#include "glimpse/engine.hpp"
#include "glimpse/kv_cache.hpp"
#include "oracle.hpp"

using namespace glimpse;

namespace {

float max_diff(const StepOutput& a, const StepOutput& b) {
  float d = 0.0f;
  for (std::size_t j = 0; j < a.rows.size(); ++j) {
    for (std::size_t v = 0; v < a.rows[j].size(); ++v) {
      d = std::max(d, std::abs(a.rows[j][v] - b.rows[j][v]));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("alloc initializes and validates sizes") {
  auto m = make_toy_transformer({});
  CacheBuffer cache(2, 128, m->spec());
  CHECK(cache.valid_len(0) == 0);
  CHECK(cache.valid_len(1) == 0);
  CHECK(cache.allocation_count() == 1);
  CHECK(cache.key(0, 1, 127)[63] == 0.0f);
  CHECK_THROWS_AS(CacheBuffer(0, 128, m->spec()), ConfigError);
  CHECK_THROWS_AS(CacheBuffer(2, 0, m->spec()), ConfigError);
  CHECK_THROWS_AS(CacheBuffer(1, 8, make_counting_backend()->spec()), ConfigError);
}

TEST_CASE("write_back contract") {
  auto m = make_toy_transformer({});
  CacheBuffer cache(1, 32, m->spec());
  const CacheSlot slot{&cache, 0};
  const TokenSeq ctx = encode_bytes("0123456789ab");
  m->forward(TokenSeq(ctx.begin(), ctx.begin() + 8), 8, slot);
  cache.write_back(0, 0, 8);
  m->forward(ctx, 4, slot);
  cache.write_back(0, 8, 3);
  CHECK(cache.valid_len(0) == 11);
  CHECK_THROWS_AS(cache.write_back(0, 12, 1), ContractViolation);  // gap
  CHECK_THROWS_AS(cache.write_back(0, 10, 1), ContractViolation);  // overlap
  CHECK_THROWS_AS(cache.write_back(0, 11, 2), ContractViolation);  // not computed
  cache.truncate(0, 5);
  CHECK(cache.valid_len(0) == 5);
  CHECK_THROWS_AS(cache.truncate(0, 6), ContractViolation);
}

TEST_CASE("forward checks cache consistency and capacity") {
  auto m = make_toy_transformer({});
  CacheBuffer cache(1, 10, m->spec());
  const CacheSlot slot{&cache, 0};
  const TokenSeq ctx = encode_bytes("abcdef");
  m->forward(ctx, 6, slot);
  cache.write_back(0, 0, 6);
  // cache covers more than the prefix before the block
  CHECK_THROWS_AS(m->forward(ctx, 2, slot), CacheMismatch);
  TokenSeq other = ctx;
  other[1] = 'z';
  other.push_back('g');
  CHECK_THROWS_AS(m->forward(other, 1, slot), CacheMismatch);
  CHECK_THROWS_AS(m->forward(TokenSeq(11, 'a'), 1, slot), CapacityError);

  auto counting = make_counting_backend();
  CacheBuffer unrelated(1, 10, m->spec());
  CHECK_THROWS_AS(counting->forward(TokenSeq{1}, 1, CacheSlot{&unrelated, 0}), ConfigError);
}

TEST_CASE("padding plans") {
  const std::vector<std::size_t> lens{8, 11};
  const auto plan = plan_kv_padding(lens);
  CHECK(plan.target_len == 11);
  CHECK(plan.pad_counts == std::vector<std::size_t>{3, 0});
  std::size_t masked = 0;
  for (std::size_t p = 0; p < 11; ++p) masked += !plan.admits(0, p);
  CHECK(masked == 3);
  CHECK(!plan.is_identity());
  CHECK(plan_kv_padding(std::vector<std::size_t>{5, 5}).is_identity());
  CHECK(plan_kv_padding(std::vector<std::size_t>{7}).is_identity());

  const TokenSeq a{1, 2, 3, 4}, b{5, 6};
  const std::vector<TokenSpan> blocks{a, b};
  const auto in = plan_input_padding(blocks, 0);
  CHECK(in.plan.target_len == 4);
  CHECK(in.plan.pad_counts == std::vector<std::size_t>{0, 2});
  CHECK(in.block == TokenSeq{1, 2, 3, 4, 5, 6, 0, 0});
  CHECK(!in.plan.admits(1, 2));
  const std::vector<TokenSpan> same{a, a};
  CHECK(plan_input_padding(same, 0).plan.is_identity());
}

TEST_CASE("cache soundness across 50 mixed iterations") {
  auto m = make_toy_transformer({});
  std::mt19937_64 rng(21);
  const std::size_t c = 4;
  CacheBuffer cache(1, 512, m->spec());
  const CacheSlot slot{&cache, 0};
  TokenSeq exact = oracle::random_tokens(rng, 6, 5, 250);
  m->forward(TokenSpan(exact).first(5), 5, slot);
  cache.write_back(0, 0, 5);
  for (int it = 0; it < 50; ++it) {
    const TokenSeq window = oracle::random_tokens(rng, c, 5, 250);
    const TokenSeq full = concat({exact, window});
    const auto cached = m->forward(full, c + 1, slot);
    const auto plain = m->forward(full, c + 1);
    CHECK(max_diff(cached, plain) <= 1e-6f);
    const std::size_t commit = 1 + rng() % (c + 1);
    cache.write_back(0, cache.valid_len(0), commit);
    exact.insert(exact.end(), window.begin(),
                 window.begin() + static_cast<std::ptrdiff_t>(commit - 1));
    exact.push_back(static_cast<Token>(5 + rng() % 245));
    CHECK(cache.valid_len(0) == exact.size() - 1);
  }
}

TEST_CASE("batched toy forward is bit-identical to solo calls") {
  auto m = make_toy_transformer({});
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t batch = 1 + rng() % 6;
    CacheBuffer cache(batch, 256, m->spec());
    std::vector<TokenSeq> ctxs;
    std::vector<BatchQuery> queries;
    std::vector<std::size_t> blocks;
    for (std::size_t i = 0; i < batch; ++i) {
      ctxs.push_back(oracle::random_tokens(rng, 10 + rng() % 30, 5, 250));
      blocks.push_back(1 + rng() % 5);
      // unequal cached prefixes exercise the type one mask
      const std::size_t warm = rng() % (ctxs[i].size() - blocks[i]);
      if (warm > 0) {
        m->forward(TokenSpan(ctxs[i]).first(warm), 1, CacheSlot{&cache, i});
        cache.write_back(i, 0, warm);
      }
    }
    for (std::size_t i = 0; i < batch; ++i) queries.push_back({ctxs[i], blocks[i], i});
    const auto batched = m->forward_batch(queries, &cache);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto solo = m->forward(ctxs[i], blocks[i]);
      CHECK(batched[i].rows == solo.rows);
    }
    const auto uncached = m->forward_batch(queries, nullptr);
    for (std::size_t i = 0; i < batch; ++i) {
      CHECK(max_diff(uncached[i], batched[i]) <= 1e-6f);
    }
  }
}

TEST_CASE("forward_batch rejects shared cache rows") {
  auto m = make_toy_transformer({});
  CacheBuffer cache(2, 32, m->spec());
  const TokenSeq a{5, 6, 7};
  const std::vector<BatchQuery> q{{a, 1, 0}, {a, 1, 0}};
  CHECK_THROWS_AS(m->forward_batch(q, &cache), ContractViolation);
}

TEST_CASE("cached decoding reads O(n^2) keys, uncached O(n^3)") {
  auto m = make_toy_transformer({});
  const TokenSeq prompt = encode_bytes("ab");
  auto reads = [&](std::size_t n, bool use_cache) {
    DecodeConfig cfg;
    cfg.max_new_tokens = n;
    cfg.use_cache = use_cache;
    cfg.repetition_penalty = 1.0;
    m->reset_counters();
    const auto r = ar_baseline(prompt, *m, cfg);
    REQUIRE(r.exact_rationale.size() == n);
    return static_cast<double>(m->key_reads());
  };
  const double c1 = reads(40, true), c2 = reads(80, true);
  const double u1 = reads(40, false), u2 = reads(80, false);
  CHECK(c2 / c1 == doctest::Approx(4.0).epsilon(0.1));
  CHECK(u2 / u1 == doctest::Approx(8.0).epsilon(0.1));
}

TEST_CASE("decoding performs no cache allocation after construction") {
  auto m = make_toy_transformer({});
  DecodeConfig cfg;
  cfg.window_len = 3;
  cfg.max_new_tokens = 100;
  DecodeSession session(*m, cfg, {encode_bytes("first"), encode_bytes("second prompt")});
  REQUIRE(session.cache());
  const float* storage = session.cache()->key_storage();
  session.run();
  CHECK(session.cache()->allocation_count() == 1);
  CHECK(session.cache()->key_storage() == storage);
}
