// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <memory>
#include <set>
#include <string>

#include "glimpse/backends.hpp"

namespace glimpse {

void Script::validate() const {
  if (vocab_size == 0) throw ConfigError("script: vocab_size must be positive");
  const std::set<Token> specials{pad, eos, unk, sep};
  if (specials.size() != 4) throw ConfigError("script: pad/eos/unk/sep must be distinct");
  for (Token t : specials) {
    if (t >= vocab_size) throw ConfigError("script: special token outside vocabulary");
  }
  if (trigger.empty()) throw ConfigError("script: trigger must be nonempty");
  for (Token t : trigger) {
    if (t >= vocab_size || specials.count(t)) {
      throw ConfigError("script: trigger tokens must be ordinary vocabulary ids");
    }
  }
  if (rule == Rule::kMarkerSuccessor) {
    if (!marker) throw ConfigError("script: marker rule references an undefined marker");
    if (*marker >= vocab_size || specials.count(*marker)) {
      throw ConfigError("script: marker " + std::to_string(*marker) +
                        " is not an ordinary vocabulary id");
    }
  } else {
    if (key_begin >= key_end || key_end > vocab_size) {
      throw ConfigError("script: key range must be a nonempty slice of the vocabulary");
    }
    for (Token t : specials) {
      if (is_key(t)) throw ConfigError("script: key range overlaps special tokens");
    }
    for (Token t : trigger) {
      if (is_key(t)) throw ConfigError("script: key range overlaps the trigger");
    }
  }
}

namespace {

class ScriptedBackend final : public LanguageModel {
 public:
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {
    script_.validate();
    spec_.vocab_size = script_.vocab_size;
    spec_.pad_id = script_.pad;
    spec_.eos_id = script_.eos;
    spec_.supports_attention = script_.expose_attention;
  }

  const BackendSpec& spec() const override { return spec_; }
  std::string name() const override { return "scripted"; }

 protected:
  StepOutput compute(TokenSpan context, std::size_t block_len,
                     CacheSlot) const override {
    StepOutput out;
    out.rows.reserve(block_len);
    const std::size_t split = context.size() - block_len;
    if (script_.expose_attention) out.attention.emplace(block_len, context.size());
    for (std::size_t j = 0; j < block_len; ++j) {
      const TokenSpan prefix = context.first(split + j + 1);
      LogitsRow row(spec_.vocab_size, 0.0f);
      row[next_token(prefix)] = 1.0f;
      out.rows.push_back(std::move(row));
      if (out.attention) fill_attention(prefix, out.attention->row(j));
    }
    return out;
  }

 private:
  std::size_t region_begin(TokenSpan prefix) const {
    auto it = std::find(prefix.begin(), prefix.end(), script_.sep);
    return it == prefix.end() ? 0 : static_cast<std::size_t>(it - prefix.begin()) + 1;
  }

  // Start index of the last trigger occurrence in prefix, if any.
  std::optional<std::size_t> last_trigger(TokenSpan prefix) const {
    const auto& trig = script_.trigger;
    if (prefix.size() < trig.size()) return std::nullopt;
    for (std::size_t s = prefix.size() - trig.size() + 1; s-- > 0;) {
      if (std::equal(trig.begin(), trig.end(), prefix.begin() + static_cast<std::ptrdiff_t>(s))) {
        return s;
      }
    }
    return std::nullopt;
  }

  Token next_token(TokenSpan prefix) const {
    const std::size_t begin = region_begin(prefix);
    if (auto trig = last_trigger(prefix); trig && *trig >= begin) {
      const std::size_t emitted = prefix.size() - (*trig + script_.trigger.size());
      const TokenSpan region = prefix.subspan(begin, *trig - begin);
      return answer_token(region, emitted);
    }
    if (begin == 0) return script_.eos;
    const std::size_t payload_len = begin - 1;
    const std::size_t p = prefix.size() - begin;
    return p < payload_len ? prefix[p] : script_.eos;
  }

  Token answer_token(TokenSpan region, std::size_t k) const {
    if (script_.rule == Script::Rule::kMarkerSuccessor) {
      if (k >= 1) return script_.eos;
      for (std::size_t i = region.size(); i-- > 0;) {
        if (region[i] != *script_.marker) continue;
        if (i + 1 >= region.size() || region[i + 1] == script_.pad) return script_.unk;
        return region[i + 1];
      }
      return script_.unk;
    }
    std::size_t seen = 0;
    for (Token t : region) {
      if (!script_.is_key(t)) continue;
      if (seen++ == k) return t;
    }
    return (k == 0 && seen == 0) ? script_.unk : script_.eos;
  }

  void fill_attention(TokenSpan prefix, std::span<float> row) const {
    const std::size_t begin = region_begin(prefix);
    for (std::size_t i = prefix.size(); i-- > begin;) {
      if (carries_answer(prefix, i, begin)) {
        row[i] = 1.0f;
        return;
      }
    }
    const float w = 1.0f / static_cast<float>(prefix.size());
    for (std::size_t i = 0; i < prefix.size(); ++i) row[i] = w;
  }

  bool carries_answer(TokenSpan prefix, std::size_t i, std::size_t begin) const {
    if (script_.rule == Script::Rule::kKeyScan) return script_.is_key(prefix[i]);
    return i > begin && prefix[i - 1] == *script_.marker && prefix[i] != script_.pad;
  }

  Script script_;
  BackendSpec spec_;
};

}  // namespace

std::shared_ptr<const LanguageModel> make_scripted_backend(const Script& script) {
  return std::make_shared<ScriptedBackend>(script);
}

}  // namespace glimpse
