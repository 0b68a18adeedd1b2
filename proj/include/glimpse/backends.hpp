// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glimpse/backend.hpp"

namespace glimpse {

// ---------------------------------------------------------------------------
// Counting backend.

enum class CountingRule {
  // Token at position n is (context[0] + n) mod m. Along any autoregressive
  // trajectory this is (last + 1) mod m, but predictions do not depend on
  // window guesses, so parallel iterations converge.
  kAnchored,
  // Literal (last + 1) mod m on the immediately preceding token.
  kLastToken,
};

// Vocabulary is modulus + 2: ids [0, m) count, pad = m, eos = m + 1.
// Rows are one-hot (1 at the successor, 0 elsewhere).
std::shared_ptr<const LanguageModel> make_counting_backend(
    std::size_t modulus = 10, CountingRule rule = CountingRule::kAnchored);

// ---------------------------------------------------------------------------
// N-gram table backend.

struct NgramTable {
  struct Entry {
    std::optional<Token> successor;
    std::vector<float> scores;
  };

  std::size_t order = 1;
  BackendSpec spec;
  std::map<TokenSeq, Entry> entries;
};

// Parses the text table format:
//
//   # comment
//   @vocab 16          optional directives; must precede score-vector rows
//   @pad 14
//   @eos 15
//   3 5 -> 7           context tokens -> single successor
//   5 -> 0 0 1.5 ...   context tokens -> full score vector (vocab_size reals)
//    -> 2              empty context: unconditional fallback row
//
// Contexts longer than `order` are rejected. Without @vocab the vocabulary is
// max id + 1 with pad/eos appended after it.
NgramTable parse_ngram_table(std::istream& in, std::size_t order);

std::shared_ptr<const LanguageModel> make_ngram_backend(NgramTable table);
std::shared_ptr<const LanguageModel> make_ngram_backend(
    std::size_t order, const std::filesystem::path& table_file);

// ---------------------------------------------------------------------------
// Toy transformer.

struct ToyConfig {
  std::uint64_t seed = 42;
  std::size_t vocab_size = 256;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t model_dim = 64;
  std::size_t max_positions = 1024;
  Token pad_id = 0;
  Token eos_id = 4;
};

// Pre-LN GPT-style decoder with learned positions and tied output embedding.
// Weights are drawn from a splitmix64 stream seeded by ToyConfig::seed: each
// matrix entry takes the next value u in [-1, 1) (24-bit mantissa) times the
// tensor's scale, in the order wte (1.0), wpe (0.1), then per layer w_qkv,
// w_proj, w_fc (1/sqrt(d)) and w_fc_proj (1/sqrt(4d)). Biases are zero and
// LayerNorm gains one. All reductions run in a fixed order in single
// precision, so outputs are reproducible bit-for-bit.
class ToyTransformer final : public LanguageModel {
 public:
  explicit ToyTransformer(const ToyConfig& config);

  const BackendSpec& spec() const override { return spec_; }
  std::string name() const override { return "toy"; }
  const ToyConfig& config() const { return config_; }

  // Key vectors read by attention since construction, summed over layers and
  // queries (one per admitted key per layer per query; heads share a read).
  std::uint64_t key_reads() const { return key_reads_.load(); }
  void reset_counters() const { key_reads_.store(0); }

 protected:
  StepOutput compute(TokenSpan context, std::size_t block_len,
                     CacheSlot cache) const override;
  std::vector<StepOutput> compute_batch(std::span<const BatchQuery> queries,
                                        CacheBuffer* cache) const override;

 private:
  struct Layer {
    std::vector<float> ln1_g, ln1_b;
    std::vector<float> w_qkv, b_qkv;  // [D x 3D]
    std::vector<float> w_proj, b_proj;  // [D x D]
    std::vector<float> ln2_g, ln2_b;
    std::vector<float> w_fc, b_fc;  // [D x 4D]
    std::vector<float> w_fc_proj, b_fc_proj;  // [4D x D]
  };

  ToyConfig config_;
  BackendSpec spec_;
  std::vector<float> wte_;  // [V x D]
  std::vector<float> wpe_;  // [P x D]
  std::vector<Layer> layers_;
  std::vector<float> lnf_g_, lnf_b_;
  mutable std::atomic<std::uint64_t> key_reads_{0};
};

std::shared_ptr<const ToyTransformer> make_toy_transformer(const ToyConfig& config);

// Byte-level tokenizer for the toy transformer.
TokenSeq encode_bytes(std::string_view text);
std::string decode_bytes(TokenSpan tokens, Token pad_id, Token eos_id);

// ---------------------------------------------------------------------------
// Scripted task backend.

// Deterministic next-token rules over the visible context.
//
// Answer mode: the context contains `trigger`. The region scanned for the
// answer is the tokens after the first `sep` (or from the start when there is
// no sep) up to the last trigger occurrence. With k tokens already emitted
// after the trigger:
//   kMarkerSuccessor: k == 0 emits the token following the last `marker` in
//     the region (unk if absent, if it is the final region token, or if it is
//     pad); k >= 1 emits eos.
//   kKeyScan: emits the k-th token of the region whose id lies in
//     [key_begin, key_end); unk at k == 0 if there is none; eos afterwards.
// Rationale mode: payload = tokens before the first sep; with p tokens after
// the sep the model emits payload[p], then eos. Without a sep it emits eos.
//
// With expose_attention, each queried row puts all attention mass on the most
// recent answer-bearing token (key, or the successor of a marker) at or before
// the query within the region, and is uniform over the visible prefix
// otherwise.
struct Script {
  enum class Rule { kMarkerSuccessor, kKeyScan };

  std::size_t vocab_size = 64;
  Token pad = 0;
  Token eos = 1;
  Token unk = 2;
  Token sep = 3;
  TokenSeq trigger{4, 5, 6};
  Rule rule = Rule::kKeyScan;
  std::optional<Token> marker;
  Token key_begin = 32;
  Token key_end = 64;
  bool expose_attention = true;

  void validate() const;
  bool is_key(Token t) const { return t >= key_begin && t < key_end; }
};

std::shared_ptr<const LanguageModel> make_scripted_backend(const Script& script);

}  // namespace glimpse
